#pragma once

// Word analogy as masked-token prediction: one of the four words is masked
// inside a boilerplate sentence and recovered from the scorer's top pieces.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "morphbert/metrics.hpp"
#include "morphbert/scorer.hpp"
#include "morphbert/subword.hpp"

namespace morphbert::analogy {

using subword::PieceId;

struct AnalogyEntry {
  std::string category;
  std::string w1, w2, w3, w4;

  friend bool operator==(const AnalogyEntry&, const AnalogyEntry&) = default;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `: category` header lines followed by `w1 w2 w3 w4` lines. Blank lines,
// provenance lines and `#` comments are skipped.
std::vector<AnalogyEntry> read_dataset(std::istream& in);
std::vector<AnalogyEntry> read_dataset(const std::filesystem::path& path);

enum class MaskSlot { kW2, kW4 };
MaskSlot parse_mask_slot(std::string_view text);  // "w2" | "w4"

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-language sentence templates with {w1}..{w4} placeholders. Each
// placeholder occurs exactly once and starts a whitespace-delimited token.
class TemplateSet {
 public:
  // Ships with English only.
  static TemplateSet builtin();
  // `language<TAB>template` lines; `#` comments allowed. Entries override
  // the built-in ones.
  static TemplateSet load(const std::filesystem::path& path);

  void add(std::string language, std::string text);
  const std::string& get(std::string_view language) const;  // throws TemplateError
  bool contains(std::string_view language) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

inline constexpr std::string_view kEnglishTemplate =
    "If the word {w1} corresponds to the word {w2}, then the word {w3} corresponds to the "
    "word {w4}.";

class ProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Probe {
  std::string text;                         // the filled sentence, unmasked
  std::string masked_word;
  std::vector<PieceId> gold_pieces;         // encoding of masked_word
  std::vector<PieceId> ids;                 // BOS ... EOS with MASK at the slot
  std::vector<std::size_t> mask_positions;  // contiguous, ascending

  std::size_t mask_piece_count() const { return mask_positions.size(); }
};

// Throws ProbeError when the masked word's pieces do not appear as a
// contiguous run in the encoding of the full sentence (only possible when
// the word ends in punctuation that merges with the template's).
Probe build_probe(const AnalogyEntry& entry, const subword::Encoder& encoder,
                  std::string_view template_text, MaskSlot slot = MaskSlot::kW2);

struct Prediction {
  std::string word;
  std::vector<PieceId> pieces;
  double score = 0.0;  // summed log-probability
};

struct PredictOptions {
  std::size_t k = 5;
  std::size_t beam = 10;
};

// Left-to-right beam search over the masks. Each step asks the scorer for
// the next mask given the pieces already chosen for earlier masks. Pieces
// that cannot continue a single word are pruned before the beam is cut:
// specials anywhere, a word-begin piece after the first mask, a non-initial
// piece at the first mask. Returns at most k distinct words, best first.
// Scorer failures surface as scorer::ScorerError.
std::vector<Prediction> predict_word(const Probe& probe, scorer::MaskedLmScorer& scorer,
                                     const subword::Encoder& encoder,
                                     const PredictOptions& options = {});

struct EvalOptions {
  PredictOptions predict;
  MaskSlot slot = MaskSlot::kW2;
  std::size_t threads = 1;
};

struct EvalReport {
  metrics::AnalogyScore score;
  std::size_t evaluated = 0;
  std::size_t total = 0;
  bool partial = false;  // the scorer failed; score covers `evaluated` entries
  std::string error;
};

// Throws TemplateError if the language has no template and ProbeError for
// an unusable entry. Results do not depend on the thread count.
EvalReport evaluate(std::span<const AnalogyEntry> dataset, scorer::MaskedLmScorer& scorer,
                    const subword::Encoder& encoder, const TemplateSet& templates,
                    std::string_view language, const EvalOptions& options = {});

// `category,n,hits,p_at_5` plus a final `macro` row.
void write_report_csv(std::ostream& out, const metrics::AnalogyScore& score);

}  // namespace morphbert::analogy
