#include "morphbert/common/tagged_tsv.hpp"

#include <ostream>
#include <stdexcept>

namespace morphbert {

bool TaggedReader::next(TaggedSentence& sentence) {
  sentence = {};
  std::string line;
  while (lines_.next(line)) {
    ++line_no_;
    if (is_provenance_line(line)) continue;
    if (line.empty()) {
      if (!sentence.forms.empty()) return true;
      continue;
    }
    const auto first_tab = line.find('\t');
    const auto last_tab = line.rfind('\t');
    if (first_tab == std::string::npos) {
      throw std::runtime_error(lines_.path().string() + ":" + std::to_string(line_no_) +
                               ": expected FORM<TAB>TAG");
    }
    sentence.forms.push_back(line.substr(0, first_tab));
    sentence.tags.push_back(line.substr(last_tab + 1));
  }
  return !sentence.forms.empty();
}

std::vector<TaggedSentence> read_tagged_tsv(const std::filesystem::path& path) {
  TaggedReader reader(path);
  std::vector<TaggedSentence> out;
  TaggedSentence s;
  while (reader.next(s)) out.push_back(std::move(s));
  return out;
}

void write_tagged_sentence(std::ostream& out, const TaggedSentence& sentence) {
  for (std::size_t i = 0; i < sentence.forms.size(); ++i) {
    out << sentence.forms[i] << '\t' << sentence.tags[i] << '\n';
  }
  out << '\n';
}

}  // namespace morphbert
