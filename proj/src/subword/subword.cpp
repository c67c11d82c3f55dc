#include "morphbert/subword.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "morphbert/common/text_io.hpp"
#include "morphbert/common/utf8.hpp"

namespace morphbert::subword {

namespace {

constexpr std::string_view kSpecialText[] = {"<pad>", "<unk>", "<s>", "</s>", "<mask>"};

bool starts_with_marker(std::string_view text) {
  return text.substr(0, kWordBegin.size()) == kWordBegin;
}

// 0 = word characters (letters, marks, digits), 1 = everything else.
int char_class(std::string_view code_point) {
  return utf8::is_word_char(utf8::decode(code_point)) ? 0 : 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> learned, std::size_t target_size)
    : target_size_(target_size) {
  pieces_.reserve(learned.size() + kReservedCount);
  for (PieceId id = 0; id < 5; ++id) {
    pieces_.push_back({std::string(kSpecialText[id]), id, false});
  }
  pieces_.push_back({std::string(kWordBegin), kBareMarker, true});
  for (std::string& text : learned) {
    const auto id = static_cast<PieceId>(pieces_.size());
    const bool wb = starts_with_marker(text);
    pieces_.push_back({std::move(text), id, wb});
  }
  index();
}

void Vocabulary::index() {
  by_text_.clear();
  by_text_.reserve(pieces_.size());
  for (const Piece& p : pieces_) {
    if (is_special(p.id)) continue;
    if (!by_text_.emplace(p.text, p.id).second) {
      throw VocabError("duplicate piece '" + p.text + "' in vocabulary");
    }
  }
}

const Piece& Vocabulary::piece(PieceId id) const {
  if (!valid(id)) throw VocabError("piece id " + std::to_string(id) + " out of range");
  return pieces_[static_cast<std::size_t>(id)];
}

PieceId Vocabulary::find(std::string_view text) const {
  const auto it = by_text_.find(std::string(text));
  return it == by_text_.end() ? -1 : it->second;
}

void Vocabulary::save(std::ostream& out) const {
  nlohmann::ordered_json header;
  header["format"] = "morphbert-vocab/1";
  header["algorithm"] = "bpe";
  header["target_size"] = target_size_;
  header["specials"] = {{"pad", specials_.pad},
                        {"unk", specials_.unk},
                        {"bos", specials_.bos},
                        {"eos", specials_.eos},
                        {"mask", specials_.mask}};
  header["word_begin_marker"] = std::string(kWordBegin);
  out << header.dump() << '\n';
  for (const Piece& p : pieces_) {
    out << p.text << '\t' << p.id << '\t' << (p.word_begin ? 1 : 0) << '\n';
  }
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VocabError("cannot write " + path.string());
  save(out);
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw VocabError("empty vocabulary file");
  } while (is_provenance_line(line));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw VocabError(std::string("bad vocabulary header: ") + e.what());
  }

  Vocabulary vocab;
  vocab.target_size_ = header.at("target_size").get<std::size_t>();
  const auto& sp = header.at("specials");
  const SpecialIds expected;
  if (sp.at("pad") != expected.pad || sp.at("unk") != expected.unk ||
      sp.at("bos") != expected.bos || sp.at("eos") != expected.eos ||
      sp.at("mask") != expected.mask) {
    throw VocabError("unsupported special-id layout in vocabulary header");
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw VocabError("malformed vocabulary line: " + line);
    Piece p;
    p.text = line.substr(0, t1);
    p.id = static_cast<PieceId>(std::stol(line.substr(t1 + 1, t2 - t1 - 1)));
    p.word_begin = line.substr(t2 + 1) == "1";
    if (static_cast<std::size_t>(p.id) != vocab.pieces_.size()) {
      throw VocabError("vocabulary ids must be 0..N-1 in order; got " + std::to_string(p.id));
    }
    vocab.pieces_.push_back(std::move(p));
  }
  if (vocab.pieces_.size() < kReservedCount) throw VocabError("vocabulary lacks reserved pieces");
  vocab.index();
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return load(in);
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct TrainWord {
  std::vector<int> syms;
  std::uint64_t freq = 0;
};

std::uint64_t pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

class MergeTrainer {
 public:
  explicit MergeTrainer(const std::map<std::string, std::uint64_t>& word_freq,
                        const std::set<std::string>& base) {
    for (const std::string& b : base) intern(b);
    words_.reserve(word_freq.size());
    for (const auto& [word, freq] : word_freq) {
      TrainWord w;
      w.freq = freq;
      bool first = true;
      for (std::string_view cp : utf8::code_points(word)) {
        std::string sym = first ? std::string(kWordBegin).append(cp) : std::string(cp);
        w.syms.push_back(intern(sym, char_class(cp)));
        first = false;
      }
      words_.push_back(std::move(w));
    }
    for (std::uint32_t i = 0; i < words_.size(); ++i) add_pairs(i);
  }

  // Runs merges until `budget` new pieces were added or no pair remains.
  std::vector<std::string> run(std::size_t budget) {
    std::vector<std::string> learned;
    while (learned.size() < budget && !queue_.empty()) {
      const Entry top = *queue_.begin();
      std::string merged = text_[top.a] + text_[top.b];
      const bool is_new = !ids_.contains(merged);
      const int z = intern(merged, class_[top.a]);
      if (is_new) learned.push_back(merged);
      apply(top.a, top.b, z);
    }
    return learned;
  }

 private:
  struct Entry {
    std::int64_t count;
    int a;
    int b;
  };
  struct EntryLess {
    const std::vector<std::string>* text;
    bool operator()(const Entry& x, const Entry& y) const {
      if (x.count != y.count) return x.count > y.count;
      const auto& t = *text;
      if (t[x.a] != t[y.a]) return t[x.a] < t[y.a];
      return t[x.b] < t[y.b];
    }
  };

  int intern(const std::string& s, int cls = -1) {
    const auto it = ids_.find(s);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(text_.size());
    text_.push_back(s);
    if (cls < 0) {
      std::string_view body(s);
      if (starts_with_marker(body)) body.remove_prefix(kWordBegin.size());
      cls = char_class(body);
    }
    class_.push_back(cls);
    ids_.emplace(s, id);
    return id;
  }

  void adjust(int a, int b, std::int64_t delta) {
    const std::uint64_t key = pair_key(a, b);
    std::int64_t& c = count_[key];
    if (c > 0) queue_.erase(Entry{c, a, b});
    c += delta;
    if (c > 0) queue_.insert(Entry{c, a, b});
  }

  bool mergeable(int a, int b) const { return class_[a] == class_[b]; }

  void add_pairs(std::uint32_t w) {
    const TrainWord& word = words_[w];
    const auto freq = static_cast<std::int64_t>(word.freq);
    for (std::size_t i = 0; i + 1 < word.syms.size(); ++i) {
      const int a = word.syms[i];
      const int b = word.syms[i + 1];
      if (!mergeable(a, b)) continue;
      adjust(a, b, freq);
      where_[pair_key(a, b)].push_back(w);
    }
  }

  void remove_pairs(std::uint32_t w) {
    const TrainWord& word = words_[w];
    const auto freq = static_cast<std::int64_t>(word.freq);
    for (std::size_t i = 0; i + 1 < word.syms.size(); ++i) {
      const int a = word.syms[i];
      const int b = word.syms[i + 1];
      if (mergeable(a, b)) adjust(a, b, -freq);
    }
  }

  void apply(int a, int b, int z) {
    const std::uint64_t key = pair_key(a, b);
    std::vector<std::uint32_t> candidates = std::move(where_[key]);
    where_.erase(key);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (const std::uint32_t w : candidates) {
      auto& syms = words_[w].syms;
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        if (syms[i] == a && syms[i + 1] == b) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      remove_pairs(w);
      std::vector<int> merged;
      merged.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          merged.push_back(z);
          i += 2;
        } else {
          merged.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(merged);
      add_pairs(w);
    }
    // Every occurrence is gone; drop any residue so the loop cannot stall.
    auto it = count_.find(key);
    if (it != count_.end() && it->second > 0) {
      queue_.erase(Entry{it->second, a, b});
      it->second = 0;
    }
  }

  std::vector<std::string> text_;
  std::vector<int> class_;
  std::unordered_map<std::string, int> ids_;
  std::vector<TrainWord> words_;
  std::unordered_map<std::uint64_t, std::int64_t> count_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where_;
  std::set<Entry, EntryLess> queue_{EntryLess{&text_}};
};

std::map<std::string, std::uint64_t> count_words(std::span<const std::string> sample) {
  std::map<std::string, std::uint64_t> freq;
  for (const std::string& line : sample) {
    for (std::string_view word : utf8::split_words(line)) {
      if (word.find(kWordBegin) != std::string_view::npos) continue;
      ++freq[std::string(word)];
    }
  }
  return freq;
}

std::set<std::string> base_pieces(const std::map<std::string, std::uint64_t>& word_freq) {
  std::set<std::string> base;
  for (const auto& [word, freq] : word_freq) {
    for (std::string_view cp : utf8::code_points(word)) {
      base.emplace(cp);
      base.insert(std::string(kWordBegin).append(cp));
    }
  }
  return base;
}

}  // namespace

std::size_t character_inventory(std::span<const std::string> sample) {
  return base_pieces(count_words(sample)).size();
}

Vocabulary train_vocab(std::span<const std::string> sample, std::size_t target_size,
                       Algorithm algorithm) {
  if (algorithm != Algorithm::kBpe) throw VocabError("unsupported subword algorithm");
  const auto word_freq = count_words(sample);
  if (word_freq.empty()) throw VocabError("vocabulary sample contains no words");
  const auto base = base_pieces(word_freq);
  if (target_size < base.size()) {
    throw VocabError("target size " + std::to_string(target_size) +
                     " is smaller than the character inventory (" +
                     std::to_string(base.size()) + ")");
  }
  std::vector<std::string> learned(base.begin(), base.end());
  MergeTrainer trainer(word_freq, base);
  for (std::string& piece : trainer.run(target_size - base.size())) {
    learned.push_back(std::move(piece));
  }
  return Vocabulary(std::move(learned), target_size);
}

// ---------------------------------------------------------------------------
// Encoding

std::vector<PieceId> Encoder::encode_word(std::string_view word) const {
  const Vocabulary& v = *vocab_;
  struct Sym {
    PieceId id;
    std::string text;
  };
  std::vector<Sym> syms;
  bool first = true;
  for (std::string_view cp : utf8::code_points(word)) {
    if (first) {
      std::string text = std::string(kWordBegin).append(cp);
      const PieceId id = v.find(text);
      if (id >= 0) {
        syms.push_back({id, std::move(text)});
      } else {
        syms.push_back({Vocabulary::kBareMarker, std::string(kWordBegin)});
        const PieceId inner = v.find(cp);
        syms.push_back({inner >= 0 ? inner : v.specials().unk, std::string(cp)});
      }
      first = false;
      continue;
    }
    const PieceId id = v.find(cp);
    syms.push_back({id >= 0 ? id : v.specials().unk, std::string(cp)});
  }

  auto joinable = [&](const Sym& s) {
    return s.id != v.specials().unk && s.id != Vocabulary::kBareMarker;
  };
  while (syms.size() > 1) {
    PieceId best = -1;
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      if (!joinable(syms[i]) || !joinable(syms[i + 1])) continue;
      const PieceId id = v.find(syms[i].text + syms[i + 1].text);
      if (id >= 0 && (best < 0 || id < best)) {
        best = id;
        best_at = i;
      }
    }
    if (best < 0) break;
    syms[best_at].text += syms[best_at + 1].text;
    syms[best_at].id = best;
    syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(best_at) + 1);
  }

  std::vector<PieceId> ids;
  ids.reserve(syms.size());
  for (const Sym& s : syms) ids.push_back(s.id);
  return ids;
}

Encoding Encoder::encode(std::string_view text) const {
  Encoding enc;
  for (std::string_view word : utf8::split_words(text)) {
    const std::size_t begin = enc.ids.size();
    for (const PieceId id : encode_word(word)) enc.ids.push_back(id);
    enc.word_spans.push_back({begin, enc.ids.size()});
  }
  return enc;
}

std::string Encoder::decode(std::span<const PieceId> ids) const {
  const Vocabulary& v = *vocab_;
  const SpecialIds& sp = v.specials();
  std::string out;
  for (const PieceId id : ids) {
    if (!v.valid(id)) throw VocabError("unknown piece id " + std::to_string(id));
    if (id == sp.pad || id == sp.bos || id == sp.eos) continue;
    if (id == sp.unk || id == sp.mask) {
      out += kSpecialText[id];
      continue;
    }
    std::string_view text = v.piece(id).text;
    if (starts_with_marker(text)) {
      out.push_back(' ');
      text.remove_prefix(kWordBegin.size());
    }
    out.append(text);
  }
  if (!out.empty() && out.front() == ' ') out.erase(0, 1);
  return out;
}

double fertility(std::span<const std::string> lines, const Encoder& encoder) {
  std::uint64_t pieces = 0;
  std::uint64_t words = 0;
  for (const std::string& line : lines) {
    for (std::string_view word : utf8::split_words(line)) {
      pieces += encoder.encode_word(word).size();
      ++words;
    }
  }
  if (words == 0) throw VocabError("fertility is undefined on a corpus with no words");
  return static_cast<double>(pieces) / static_cast<double>(words);
}

}  // namespace morphbert::subword
