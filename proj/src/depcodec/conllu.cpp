#include "morphbert/conllu.hpp"

#include <charconv>
#include <ostream>
#include <stdexcept>

namespace morphbert::conllu {

namespace {

bool is_word_id(std::string_view id) {
  if (id.empty()) return false;
  for (const char c : id) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

}  // namespace

std::string_view Sentence::column(std::size_t word, int col) const {
  const auto cols = split_tabs(lines[word_lines[word]]);
  if (col < 0 || static_cast<std::size_t>(col) >= cols.size()) {
    throw std::runtime_error("CoNLL-U token line has too few columns: " + lines[word_lines[word]]);
  }
  return cols[static_cast<std::size_t>(col)];
}

depcodec::DepTree Sentence::tree() const {
  depcodec::DepTree tree;
  tree.head.reserve(size());
  tree.rel.reserve(size());
  for (std::size_t w = 0; w < size(); ++w) {
    const std::string_view head = column(w, 6);
    int value = 0;
    const auto res = std::from_chars(head.data(), head.data() + head.size(), value);
    if (res.ec != std::errc() || res.ptr != head.data() + head.size()) {
      throw std::runtime_error("non-integer HEAD '" + std::string(head) + "' in token line: " +
                               lines[word_lines[w]]);
    }
    tree.head.push_back(value);
    tree.rel.emplace_back(column(w, 7));
  }
  return tree;
}

Sentence Sentence::with_tree(const depcodec::DepTree& tree) const {
  if (tree.size() != size()) throw std::invalid_argument("tree size does not match sentence");
  Sentence out = *this;
  for (std::size_t w = 0; w < size(); ++w) {
    auto cols = split_tabs(lines[word_lines[w]]);
    if (cols.size() < 10) throw std::runtime_error("CoNLL-U token line needs 10 columns");
    const std::string head = std::to_string(tree.head[w]);
    cols[6] = head;
    cols[7] = tree.rel[w];
    std::string line;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) line.push_back('\t');
      line.append(cols[c]);
    }
    out.lines[word_lines[w]] = std::move(line);
  }
  return out;
}

Sentence Sentence::from_tree(const std::vector<std::string>& forms, const depcodec::DepTree& tree) {
  if (forms.size() != tree.size()) throw std::invalid_argument("form count does not match tree");
  Sentence s;
  for (std::size_t w = 0; w < forms.size(); ++w) {
    s.word_lines.push_back(s.lines.size());
    s.lines.push_back(std::to_string(w + 1) + '\t' + forms[w] + "\t_\t_\t_\t_\t" +
                      std::to_string(tree.head[w]) + '\t' + tree.rel[w] + "\t_\t_");
  }
  return s;
}

bool Reader::next(Sentence& sentence) {
  sentence = {};
  std::string line;
  bool any = false;
  while (lines_.next(line)) {
    ++line_no_;
    if (line.empty()) {
      if (any) return true;
      continue;
    }
    if (is_provenance_line(line)) continue;
    any = true;
    if (line.front() != '#') {
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        throw std::runtime_error(lines_.path().string() + ":" + std::to_string(line_no_) +
                                 ": token line without tabs");
      }
      if (is_word_id(std::string_view(line).substr(0, tab))) {
        sentence.word_lines.push_back(sentence.lines.size());
      }
    }
    sentence.lines.push_back(std::move(line));
  }
  return any;
}

std::vector<Sentence> read_all(const std::filesystem::path& path) {
  Reader reader(path);
  std::vector<Sentence> out;
  Sentence s;
  while (reader.next(s)) out.push_back(std::move(s));
  return out;
}

void write(std::ostream& out, const Sentence& sentence) {
  for (const std::string& line : sentence.lines) out << line << '\n';
  out << '\n';
}

}  // namespace morphbert::conllu
