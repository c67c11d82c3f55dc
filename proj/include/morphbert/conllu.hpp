#pragma once

// CoNLL-U sentences kept as raw lines so that files can be rewritten with
// only HEAD and DEPREL changed.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "morphbert/common/text_io.hpp"
#include "morphbert/depcodec.hpp"

namespace morphbert::conllu {

struct Sentence {
  std::vector<std::string> lines;       // comments, tokens, ranges, empty nodes
  std::vector<std::size_t> word_lines;  // indices of integer-ID token lines

  std::size_t size() const { return word_lines.size(); }
  std::string_view column(std::size_t word, int col) const;  // 0-based word, 0..9
  std::string_view form(std::size_t word) const { return column(word, 1); }

  // HEAD/DEPREL of the basic tokens. Throws std::runtime_error on a
  // non-integer HEAD.
  depcodec::DepTree tree() const;
  // Copy with HEAD (column 7) and DEPREL (column 8) replaced.
  Sentence with_tree(const depcodec::DepTree& tree) const;
  // A minimal sentence (ID, FORM, HEAD, DEPREL filled, '_' elsewhere).
  static Sentence from_tree(const std::vector<std::string>& forms, const depcodec::DepTree& tree);
};

// Streaming reader. Multiword ranges ("1-2") and empty nodes ("1.1") are
// kept in `lines` but are not words. Provenance comments are dropped.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : lines_(path) {}
  bool next(Sentence& sentence);
  std::size_t line_number() const { return line_no_; }

 private:
  LineReader lines_;
  std::size_t line_no_ = 0;
};

std::vector<Sentence> read_all(const std::filesystem::path& path);

void write(std::ostream& out, const Sentence& sentence);

}  // namespace morphbert::conllu
