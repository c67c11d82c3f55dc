#include "morphbert/metrics.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "morphbert/common/csv.hpp"
#include "morphbert/common/format.hpp"
#include "morphbert/common/text_io.hpp"
#include "morphbert/common/utf8.hpp"

namespace morphbert::metrics {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

void finalize(ClassScore& s) {
  s.precision = safe_div(static_cast<double>(s.true_positives), static_cast<double>(s.predicted));
  s.recall = safe_div(static_cast<double>(s.true_positives), static_cast<double>(s.gold));
  s.f1 = safe_div(2.0 * s.precision * s.recall, s.precision + s.recall);
}

NerScore macro(std::vector<ClassScore> per_class) {
  NerScore score;
  double sum = 0.0;
  for (ClassScore& s : per_class) {
    finalize(s);
    sum += s.f1;
  }
  score.macro_f1 = per_class.empty() ? 0.0 : sum / static_cast<double>(per_class.size());
  score.per_class = std::move(per_class);
  return score;
}

// "B-PER" -> ('B', "PER"); anything else -> ('O', "").
std::pair<char, std::string_view> split_tag(std::string_view tag) {
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
    return {tag[0], tag.substr(2)};
  }
  return {'O', {}};
}

std::string trim_fold(std::string_view text) {
  return utf8::casefold(utf8::collapse_whitespace(text));
}

}  // namespace

std::vector<Span> bio_to_spans(std::span<const std::string> tags) {
  std::vector<Span> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto [kind, cls] = split_tag(tags[i]);
    if (kind == 'O') {
      open = false;
      continue;
    }
    if (kind == 'I' && open && spans.back().cls == cls) {
      spans.back().end = i;
      continue;
    }
    spans.push_back({i, i, std::string(cls)});
    open = true;
  }
  return spans;
}

NerScore ner_f1(std::span<const SpanAnnotation> gold, std::span<const SpanAnnotation> pred,
                const std::vector<std::string>& classes) {
  std::map<std::string_view, const SpanAnnotation*> pred_by_id;
  for (const auto& p : pred) {
    if (!pred_by_id.emplace(p.sentence_id, &p).second) {
      throw MetricError("duplicate predicted sentence id '" + p.sentence_id + "'");
    }
  }
  if (pred_by_id.size() != gold.size()) {
    throw MetricError("gold and predicted sentence sets differ in size");
  }

  std::vector<ClassScore> per_class;
  std::map<std::string_view, std::size_t> class_index;
  for (const auto& c : classes) {
    class_index.emplace(c, per_class.size());
    per_class.push_back({c});
  }

  std::set<std::string_view> seen;
  for (const auto& g : gold) {
    if (!seen.insert(g.sentence_id).second) {
      throw MetricError("duplicate gold sentence id '" + g.sentence_id + "'");
    }
    const auto it = pred_by_id.find(g.sentence_id);
    if (it == pred_by_id.end()) {
      throw MetricError("sentence id '" + g.sentence_id + "' missing from predictions");
    }
    const std::set<Span> gold_spans(g.spans.begin(), g.spans.end());
    const std::set<Span> pred_spans(it->second->spans.begin(), it->second->spans.end());
    for (const Span& s : gold_spans) {
      if (auto c = class_index.find(s.cls); c != class_index.end()) ++per_class[c->second].gold;
    }
    for (const Span& s : pred_spans) {
      const auto c = class_index.find(s.cls);
      if (c == class_index.end()) continue;
      ++per_class[c->second].predicted;
      if (gold_spans.contains(s)) ++per_class[c->second].true_positives;
    }
  }
  return macro(std::move(per_class));
}

namespace {

void check_aligned(std::span<const TaggedSentence> gold, std::span<const TaggedSentence> pred) {
  if (gold.size() != pred.size()) {
    throw MetricError("gold has " + std::to_string(gold.size()) + " sentences, prediction has " +
                      std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tags.size() != pred[i].tags.size()) {
      throw MetricError("sentence " + std::to_string(i) + ": gold has " +
                        std::to_string(gold[i].tags.size()) + " tokens, prediction has " +
                        std::to_string(pred[i].tags.size()));
    }
  }
}

}  // namespace

NerScore ner_f1(std::span<const TaggedSentence> gold, std::span<const TaggedSentence> pred,
                const std::vector<std::string>& classes) {
  check_aligned(gold, pred);
  std::vector<SpanAnnotation> g;
  std::vector<SpanAnnotation> p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    g.push_back({std::to_string(i), bio_to_spans(gold[i].tags)});
    p.push_back({std::to_string(i), bio_to_spans(pred[i].tags)});
  }
  return ner_f1(g, p, classes);
}

NerScore ner_f1_token_level(std::span<const TaggedSentence> gold,
                            std::span<const TaggedSentence> pred,
                            const std::vector<std::string>& classes) {
  check_aligned(gold, pred);
  std::vector<ClassScore> per_class;
  for (const auto& c : classes) per_class.push_back({c});
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (std::size_t t = 0; t < gold[i].tags.size(); ++t) {
      const auto gc = split_tag(gold[i].tags[t]).second;
      const auto pc = split_tag(pred[i].tags[t]).second;
      for (ClassScore& s : per_class) {
        const bool in_gold = gc == s.cls;
        const bool in_pred = pc == s.cls;
        s.gold += in_gold;
        s.predicted += in_pred;
        s.true_positives += in_gold && in_pred;
      }
    }
  }
  return macro(std::move(per_class));
}

PosScore pos_f1(std::span<const std::vector<std::string>> gold,
                std::span<const std::vector<std::string>> pred) {
  if (gold.size() != pred.size()) throw MetricError("POS files differ in sentence count");
  PosScore s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw MetricError("sentence " + std::to_string(i) + " differs in length");
    }
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      ++s.tokens;
      s.correct += gold[i][t] == pred[i][t];
    }
  }
  // One tag per token: predicted count == gold count == tokens.
  s.precision = safe_div(static_cast<double>(s.correct), static_cast<double>(s.tokens));
  s.recall = s.precision;
  s.micro_f1 = safe_div(2.0 * static_cast<double>(s.correct), 2.0 * static_cast<double>(s.tokens));
  s.accuracy = safe_div(static_cast<double>(s.correct), static_cast<double>(s.tokens));
  return s;
}

PosScore pos_f1(std::span<const TaggedSentence> gold, std::span<const TaggedSentence> pred) {
  std::vector<std::vector<std::string>> g;
  std::vector<std::vector<std::string>> p;
  for (const auto& s : gold) g.push_back(s.tags);
  for (const auto& s : pred) p.push_back(s.tags);
  return pos_f1(g, p);
}

AttachmentScore attachment_scores(std::span<const depcodec::DepTree> gold,
                                  std::span<const depcodec::DepTree> pred) {
  if (gold.size() != pred.size()) throw MetricError("treebanks differ in sentence count");
  AttachmentScore s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      throw MetricError("sentence " + std::to_string(i) + " is not token-aligned");
    }
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      ++s.tokens;
      if (gold[i].head[t] == pred[i].head[t]) {
        ++s.head_correct;
        s.labeled_correct += gold[i].rel[t] == pred[i].rel[t];
      }
    }
  }
  s.uas = 100.0 * safe_div(static_cast<double>(s.head_correct), static_cast<double>(s.tokens));
  s.las = 100.0 * safe_div(static_cast<double>(s.labeled_correct), static_cast<double>(s.tokens));
  return s;
}

bool precision_at_k(std::string_view gold, std::span<const std::string> ranked, std::size_t k) {
  const std::string target = trim_fold(gold);
  const std::size_t limit = std::min(k, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (trim_fold(ranked[i]) == target) return true;
  }
  return false;
}

bool PrecisionAtK::add(const std::string& category, std::string_view gold,
                       std::span<const std::string> ranked) {
  if (ranked.empty()) ++empty_;
  const bool hit = precision_at_k(gold, ranked, k_);
  add_result(category, hit);
  return hit;
}

void PrecisionAtK::add_result(const std::string& category, bool hit) {
  auto it = index_.find(category);
  if (it == index_.end()) {
    it = index_.emplace(category, categories_.size()).first;
    categories_.push_back({category});
  }
  CategoryScore& c = categories_[it->second];
  ++c.n;
  c.hits += hit;
}

AnalogyScore PrecisionAtK::finish() const {
  AnalogyScore score;
  score.categories = categories_;
  double sum = 0.0;
  for (CategoryScore& c : score.categories) {
    c.p_at_k = safe_div(static_cast<double>(c.hits), static_cast<double>(c.n));
    sum += c.p_at_k;
  }
  score.macro = score.categories.empty() ? 0.0 : sum / static_cast<double>(score.categories.size());
  score.empty_predictions = empty_;
  return score;
}

void write_results_csv(std::ostream& out, std::span<const TaskResult> rows) {
  out << "model,language,task,metric,value\n";
  for (const TaskResult& r : rows) {
    out << csv::field(r.model) << ',' << csv::field(r.language) << ',' << csv::field(r.task)
        << ',' << csv::field(r.metric) << ',' << format_double(r.value) << '\n';
  }
}

std::vector<TaskResult> read_results_csv(std::istream& in) {
  std::vector<TaskResult> rows;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      if (line != "model,language,task,metric,value") {
        throw MetricError("results CSV must start with header model,language,task,metric,value");
      }
      continue;
    }
    const auto f = csv::split(line);
    if (f.size() != 5) throw MetricError("results CSV line " + std::to_string(line_no) + ": need 5 fields");
    TaskResult r{f[0], f[1], f[2], f[3], 0.0};
    try {
      r.value = std::stod(f[4]);
    } catch (const std::exception&) {
      throw MetricError("results CSV line " + std::to_string(line_no) + ": bad value '" + f[4] + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<TaskResult> read_results_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return read_results_csv(in);
}

}  // namespace morphbert::metrics
