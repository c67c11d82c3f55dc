#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "morphbert/common/text_io.hpp"

namespace morphbert {

// `FORM<TAB>TAG` per token, blank line between sentences. Used for BIO NER
// files, POS files and dependency label files.
struct TaggedSentence {
  std::vector<std::string> forms;
  std::vector<std::string> tags;
};

// Streaming reader over the same format.
class TaggedReader {
 public:
  explicit TaggedReader(const std::filesystem::path& path) : lines_(path) {}
  bool next(TaggedSentence& sentence);
  std::size_t line_number() const { return line_no_; }

 private:
  LineReader lines_;
  std::size_t line_no_ = 0;
};

// Provenance lines are skipped. Lines without a tab are an error; extra
// columns are ignored (the last column is the tag).
std::vector<TaggedSentence> read_tagged_tsv(const std::filesystem::path& path);

void write_tagged_sentence(std::ostream& out, const TaggedSentence& sentence);

}  // namespace morphbert
