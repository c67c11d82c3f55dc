#pragma once

// Task scores: NER span F1 (macro over classes), POS micro F1, UAS/LAS and
// analogy precision@k.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "morphbert/common/tagged_tsv.hpp"
#include "morphbert/depcodec.hpp"

namespace morphbert::metrics {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& default_ner_classes() {
  static const std::vector<std::string> kClasses = {"PER", "LOC", "ORG"};
  return kClasses;
}

// Token positions are inclusive: [start, end].
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string cls;

  friend auto operator<=>(const Span&, const Span&) = default;
};

struct SpanAnnotation {
  std::string sentence_id;
  std::vector<Span> spans;
};

// A span is a maximal B-c (I-c)* run; an I-c that does not continue a span
// of class c opens a new one. Tags other than B-*/I-* are outside.
std::vector<Span> bio_to_spans(std::span<const std::string> tags);

struct ClassScore {
  std::string cls;
  std::uint64_t true_positives = 0;
  std::uint64_t predicted = 0;
  std::uint64_t gold = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct NerScore {
  std::vector<ClassScore> per_class;
  double macro_f1 = 0.0;
};

// Exact span match (boundaries and class). Sentences are matched by id; the
// id sets must be identical. Undefined precision/recall/F1 count as 0.
NerScore ner_f1(std::span<const SpanAnnotation> gold, std::span<const SpanAnnotation> pred,
                const std::vector<std::string>& classes = default_ner_classes());

// BIO-tagged sentences; sentence i gets id "i". Token counts must agree.
NerScore ner_f1(std::span<const TaggedSentence> gold, std::span<const TaggedSentence> pred,
                const std::vector<std::string>& classes = default_ner_classes());

// Token-level variant: a token counts for class c when its B-/I- tag names c.
NerScore ner_f1_token_level(std::span<const TaggedSentence> gold,
                            std::span<const TaggedSentence> pred,
                            const std::vector<std::string>& classes = default_ner_classes());

struct PosScore {
  std::uint64_t tokens = 0;
  std::uint64_t correct = 0;
  double precision = 0.0;
  double recall = 0.0;
  double micro_f1 = 0.0;
  double accuracy = 0.0;
};

// Micro F1 over tokens. Throws MetricError on sentence or length mismatch.
PosScore pos_f1(std::span<const std::vector<std::string>> gold,
                std::span<const std::vector<std::string>> pred);
PosScore pos_f1(std::span<const TaggedSentence> gold, std::span<const TaggedSentence> pred);

struct AttachmentScore {
  std::uint64_t tokens = 0;
  std::uint64_t head_correct = 0;
  std::uint64_t labeled_correct = 0;
  double uas = 0.0;  // percent
  double las = 0.0;  // percent
};

// Every token counts, punctuation included. Relations compare as full
// strings (subtypes included).
AttachmentScore attachment_scores(std::span<const depcodec::DepTree> gold,
                                  std::span<const depcodec::DepTree> pred);

// Gold and candidates compared after case folding and trimming.
bool precision_at_k(std::string_view gold, std::span<const std::string> ranked,
                    std::size_t k = 5);

struct CategoryScore {
  std::string category;
  std::size_t n = 0;
  std::size_t hits = 0;
  double p_at_k = 0.0;
};

struct AnalogyScore {
  std::vector<CategoryScore> categories;  // in first-seen order
  double macro = 0.0;                     // unweighted mean over categories
  std::size_t empty_predictions = 0;
};

class PrecisionAtK {
 public:
  explicit PrecisionAtK(std::size_t k = 5) : k_(k) {}
  // An empty candidate list is a miss and is counted separately.
  bool add(const std::string& category, std::string_view gold,
           std::span<const std::string> ranked);
  void add_result(const std::string& category, bool hit);
  AnalogyScore finish() const;

 private:
  std::size_t k_;
  std::vector<CategoryScore> categories_;
  std::map<std::string, std::size_t> index_;
  std::size_t empty_ = 0;
};

struct TaskResult {
  std::string model;
  std::string language;
  std::string task;    // NER, POS, DP, WA
  std::string metric;  // macro_f1, micro_f1, uas, las, p_at_5
  double value = 0.0;

  friend bool operator==(const TaskResult&, const TaskResult&) = default;
};

// Header `model,language,task,metric,value`.
void write_results_csv(std::ostream& out, std::span<const TaskResult> rows);
std::vector<TaskResult> read_results_csv(std::istream& in);
std::vector<TaskResult> read_results_csv(const std::filesystem::path& path);

}  // namespace morphbert::metrics
