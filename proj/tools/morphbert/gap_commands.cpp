#include <iostream>
#include <memory>
#include <sstream>

#include "command.hpp"
#include "morphbert/analysis.hpp"

namespace morphbert::cli {

namespace {

struct GapArgs {
  bool bundled = false;
  std::filesystem::path results;
  std::filesystem::path metadata;
  std::filesystem::path output = "-";
  std::filesystem::path series_dir;
};

void run_gaps(const CLI::App& app, const GapArgs& a) {
  std::vector<metrics::TaskResult> results;
  std::vector<analysis::ModelMetadata> metadata;
  if (a.bundled) {
    if (!a.results.empty()) throw UsageError("--bundled and --results are exclusive");
    auto data = analysis::bundled_paper_results();
    results = std::move(data.results);
    metadata = std::move(data.metadata);
  } else {
    if (a.results.empty()) throw UsageError("give --bundled or --results");
    results = metrics::read_results_csv(a.results);
  }
  if (!a.metadata.empty()) metadata = analysis::read_metadata_csv(a.metadata);
  if (metadata.empty()) throw UsageError("--metadata is required with --results");

  const auto points = analysis::compute_gaps(results, metadata);
  const std::string prov = provenance(app, 0).line();
  std::ostringstream text;
  text << prov << '\n';
  analysis::emit_plot_data(text, points);
  if (a.output == "-") {
    std::cout << text.str();
  } else {
    open_output(a.output) << text.str();
  }
  if (!a.series_dir.empty()) {
    std::filesystem::create_directories(a.series_dir);
    analysis::emit_series(a.series_dir, points, prov);
  }
}

}  // namespace

void register_gap_commands(CLI::App& root, std::vector<Command>& out) {
  auto args = std::make_shared<GapArgs>();
  CLI::App* app = root.add_subcommand(
      "gaps",
      "Relative gap to the best model per (language, task), scaled and offset for plotting. "
      "Writes model,language,task,vocab_size,gap,plotted_y");
  app->add_flag("--bundled", args->bundled, "use the published results shipped with the tool");
  app->add_option("--results", args->results, "results CSV (model,language,task,metric,value)")
      ->check(CLI::ExistingFile);
  app->add_option("--metadata", args->metadata,
                  "metadata CSV (model,language,vocab_k,train_tokens_b)")
      ->check(CLI::ExistingFile);
  app->add_option("-o,--output", args->output, "plot data CSV, - for stdout")
      ->capture_default_str()
      ->group(kOutputGroup);
  app->add_option("--series-dir", args->series_dir, "also write one fig1_<task>.dat per task")
      ->group(kOutputGroup);
  out.push_back({app, [app, args] { run_gaps(*app, *args); }});
}

}  // namespace morphbert::cli
