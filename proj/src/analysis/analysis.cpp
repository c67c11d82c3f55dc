#include "morphbert/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "bundled_data.hpp"
#include "morphbert/common/csv.hpp"
#include "morphbert/common/format.hpp"
#include "morphbert/common/hash.hpp"
#include "morphbert/common/text_io.hpp"

namespace morphbert::analysis {

namespace {

std::optional<double> parse_optional(const std::string& cell, std::size_t line_no) {
  if (cell.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw AnalysisError("metadata line " + std::to_string(line_no) + ": bad number '" + cell + "'");
  }
}

void verify_checksum(std::string_view name, std::string_view text) {
  const std::string expected_suffix = "  " + std::string(name);
  std::istringstream in{std::string(detail::kChecksums)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() > 16 && line.substr(16) == expected_suffix) {
      if (line.substr(0, 16) != to_hex(fnv1a64(text))) {
        throw AnalysisError("bundled " + std::string(name) + " does not match its checksum");
      }
      return;
    }
  }
  throw AnalysisError("no checksum recorded for bundled " + std::string(name));
}

constexpr GapTask kTasks[] = {GapTask::kNer, GapTask::kPos, GapTask::kDpUas, GapTask::kDpLas,
                              GapTask::kWa};

}  // namespace

std::vector<ModelMetadata> read_metadata_csv(std::istream& in) {
  std::vector<ModelMetadata> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = csv::split(line);
    if (header) {
      header = false;
      if (f.size() < 4 || f[0] != "model" || f[1] != "language" || f[2] != "vocab_k" ||
          f[3] != "train_tokens_b") {
        throw AnalysisError("metadata CSV must start with model,language,vocab_k,train_tokens_b");
      }
      continue;
    }
    if (f.size() != 4 && f.size() != 5) {
      throw AnalysisError("metadata line " + std::to_string(line_no) + ": need 4 or 5 fields");
    }
    out.push_back({f[0], f[1], parse_optional(f[2], line_no), parse_optional(f[3], line_no),
                   f.size() == 5 ? f[4] : std::string{}});
  }
  return out;
}

std::vector<ModelMetadata> read_metadata_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return read_metadata_csv(in);
}

BundledData bundled_paper_results() {
  verify_checksum("paper_results.csv", detail::kResultsCsv);
  verify_checksum("paper_metadata.csv", detail::kMetadataCsv);
  BundledData data;
  std::istringstream results{std::string(detail::kResultsCsv)};
  data.results = metrics::read_results_csv(results);
  std::istringstream metadata{std::string(detail::kMetadataCsv)};
  data.metadata = read_metadata_csv(metadata);
  return data;
}

std::string_view task_name(GapTask task) {
  switch (task) {
    case GapTask::kNer: return "NER";
    case GapTask::kPos: return "POS";
    case GapTask::kDpUas: return "DP-UAS";
    case GapTask::kDpLas: return "DP-LAS";
    case GapTask::kWa: return "WA";
  }
  return "?";
}

GapTask gap_task(const metrics::TaskResult& r) {
  if (r.task == "NER") return GapTask::kNer;
  if (r.task == "POS") return GapTask::kPos;
  if (r.task == "WA") return GapTask::kWa;
  if (r.task == "DP-UAS" || (r.task == "DP" && r.metric == "uas")) return GapTask::kDpUas;
  if (r.task == "DP-LAS" || (r.task == "DP" && r.metric == "las")) return GapTask::kDpLas;
  throw AnalysisError("cannot place task '" + r.task + "' / metric '" + r.metric + "' on an axis");
}

TaskAxis task_axis(GapTask task) {
  switch (task) {
    case GapTask::kNer: return {0.0, 10.0};
    case GapTask::kPos: return {0.5, 10.0};
    case GapTask::kDpUas: return {1.0, 10.0};
    case GapTask::kDpLas: return {1.5, 10.0};
    case GapTask::kWa: return {2.0, 1.0};
  }
  return {};
}

std::vector<GapPoint> compute_gaps(std::span<const metrics::TaskResult> results,
                                   std::span<const ModelMetadata> metadata) {
  std::map<std::pair<std::string_view, std::string_view>, const ModelMetadata*> meta;
  for (const ModelMetadata& m : metadata) meta[{m.model, m.language}] = &m;

  using GroupKey = std::pair<std::string, GapTask>;
  std::map<GroupKey, std::vector<std::size_t>> groups;
  std::vector<GapTask> tasks(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    tasks[i] = gap_task(results[i]);
    groups[{results[i].language, tasks[i]}].push_back(i);
  }

  std::map<GroupKey, double> best;
  for (const auto& [key, members] : groups) {
    const std::string where = key.first + "/" + std::string(task_name(key.second));
    if (members.size() < 2) throw AnalysisError("group " + where + " has fewer than two models");
    double top = results[members.front()].value;
    std::map<std::string_view, int> seen;
    for (const std::size_t i : members) {
      top = std::max(top, results[i].value);
      if (++seen[results[i].model] > 1) {
        throw AnalysisError("model '" + results[i].model + "' appears twice in group " + where);
      }
    }
    if (!(top > 0.0)) throw AnalysisError("group " + where + " has no positive score");
    best[key] = top;
  }

  std::vector<GapPoint> points;
  points.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const metrics::TaskResult& r = results[i];
    const auto m = meta.find({r.model, r.language});
    if (m == meta.end()) {
      throw AnalysisError("no metadata for model '" + r.model + "' in language '" + r.language + "'");
    }
    const TaskAxis axis = task_axis(tasks[i]);
    GapPoint p;
    p.model = r.model;
    p.language = r.language;
    p.task = tasks[i];
    p.raw_value = r.value;
    p.gap = 1.0 - r.value / best.at({r.language, tasks[i]});
    p.plotted_y = -(axis.offset + axis.scale * p.gap);
    if (p.plotted_y == 0.0) p.plotted_y = 0.0;  // no "-0" in output
    p.vocab_size = m->second->vocab_k;
    p.train_tokens = m->second->train_tokens_b;
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<GapPoint> plot_order(std::vector<GapPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const GapPoint& a, const GapPoint& b) {
    const bool an = !a.vocab_size;
    const bool bn = !b.vocab_size;
    if (an != bn) return bn;
    if (!an && *a.vocab_size != *b.vocab_size) return *a.vocab_size < *b.vocab_size;
    return std::tie(a.task, a.language, a.model) < std::tie(b.task, b.language, b.model);
  });
  return points;
}

void emit_plot_data(std::ostream& out, std::span<const GapPoint> points) {
  out << "model,language,task,vocab_size,gap,plotted_y\n";
  for (const GapPoint& p : plot_order({points.begin(), points.end()})) {
    out << csv::field(p.model) << ',' << csv::field(p.language) << ',' << task_name(p.task) << ','
        << (p.vocab_size ? format_double(*p.vocab_size) : std::string{}) << ','
        << format_double(p.gap) << ',' << format_double(p.plotted_y) << '\n';
  }
}

std::vector<std::filesystem::path> emit_series(const std::filesystem::path& dir,
                                               std::span<const GapPoint> points,
                                               std::string_view header_comment) {
  const std::vector<GapPoint> ordered = plot_order({points.begin(), points.end()});
  std::vector<std::filesystem::path> written;
  for (const GapTask task : kTasks) {
    const std::filesystem::path path = dir / ("fig1_" + std::string(task_name(task)) + ".dat");
    std::ofstream out(path);
    if (!out) throw AnalysisError("cannot write " + path.string());
    if (!header_comment.empty()) out << header_comment << '\n';
    out << "# model language vocab_size gap plotted_y\n";
    for (const GapPoint& p : ordered) {
      if (p.task != task) continue;
      out << '"' << p.model << "\" " << p.language << ' '
          << (p.vocab_size ? format_double(*p.vocab_size) : std::string("NaN")) << ' '
          << format_double(p.gap) << ' ' << format_double(p.plotted_y) << '\n';
    }
    written.push_back(path);
  }
  return written;
}

}  // namespace morphbert::analysis
