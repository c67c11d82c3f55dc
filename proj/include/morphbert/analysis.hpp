#pragma once

// Relative-gap analysis: each score becomes 1 - x / x_best within its
// (language, task) group, scaled and offset per task for plotting, and is
// joined with the model's dictionary size and training-corpus size.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "morphbert/metrics.hpp"

namespace morphbert::analysis {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelMetadata {
  std::string model;
  std::string language;  // or "total" for whole-model figures
  std::optional<double> vocab_k;
  std::optional<double> train_tokens_b;
  std::string note;  // e.g. "estimated", "unknown"

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

// `model,language,vocab_k,train_tokens_b[,note]`; empty cells are null.
std::vector<ModelMetadata> read_metadata_csv(std::istream& in);
std::vector<ModelMetadata> read_metadata_csv(const std::filesystem::path& path);

struct BundledData {
  std::vector<metrics::TaskResult> results;
  std::vector<ModelMetadata> metadata;
};

// Published scores and corpus/dictionary sizes, compiled in from data/.
// Throws AnalysisError if the embedded text does not match its checksum.
BundledData bundled_paper_results();

enum class GapTask { kNer, kPos, kDpUas, kDpLas, kWa };

std::string_view task_name(GapTask task);  // "NER", "POS", "DP-UAS", "DP-LAS", "WA"
// Maps a result row to its gap task: NER, POS, WA by task; DP by metric
// (uas/las). "DP-UAS"/"DP-LAS" are accepted as task names too.
GapTask gap_task(const metrics::TaskResult& result);

struct TaskAxis {
  double offset = 0.0;  // magnitude; applied downwards
  double scale = 1.0;
};
TaskAxis task_axis(GapTask task);

struct GapPoint {
  std::string model;
  std::string language;
  GapTask task = GapTask::kNer;
  double raw_value = 0.0;
  double gap = 0.0;
  double plotted_y = 0.0;
  std::optional<double> vocab_size;    // thousands of pieces
  std::optional<double> train_tokens;  // billions
};

// Throws AnalysisError when a group has fewer than two models, when a group
// maximum is not positive, when a (model, language) pair repeats within a
// group, or when a model has no metadata row for its language.
std::vector<GapPoint> compute_gaps(std::span<const metrics::TaskResult> results,
                                   std::span<const ModelMetadata> metadata);

// Sorted by vocab_size (nulls last), then task, language and model.
std::vector<GapPoint> plot_order(std::vector<GapPoint> points);

// `model,language,task,vocab_size,gap,plotted_y` in plot_order.
void emit_plot_data(std::ostream& out, std::span<const GapPoint> points);

// One whitespace-separated series per task (`fig1_<task>.dat`) for gnuplot
// style plotting. Returns the paths written.
std::vector<std::filesystem::path> emit_series(const std::filesystem::path& dir,
                                               std::span<const GapPoint> points,
                                               std::string_view header_comment = {});

}  // namespace morphbert::analysis
