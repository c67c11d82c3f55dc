#include <iostream>
#include <memory>
#include <sstream>

#include "command.hpp"
#include "morphbert/analogy.hpp"
#include "morphbert/common/format.hpp"
#include "morphbert/common/tagged_tsv.hpp"
#include "morphbert/common/utf8.hpp"
#include "morphbert/conllu.hpp"
#include "morphbert/metrics.hpp"
#include "morphbert/scorer.hpp"

namespace morphbert::cli {

namespace {

struct ResultArgs {
  std::string model = "model";
  std::string language = "xx";
  std::filesystem::path output = "-";
};

void add_result_options(CLI::App* app, ResultArgs& r) {
  app->add_option("--model", r.model, "model name for the results rows")->capture_default_str();
  app->add_option("--language", r.language, "language code for the results rows")
      ->capture_default_str();
  app->add_option("-o,--output", r.output, "results CSV, - for stdout")
      ->capture_default_str()
      ->group(kOutputGroup);
}

void write_results(const CLI::App& app, const ResultArgs& r,
                   const std::vector<metrics::TaskResult>& rows) {
  std::ostringstream text;
  text << provenance(app, 0).line() << '\n';
  metrics::write_results_csv(text, rows);
  if (r.output == "-") {
    std::cout << text.str();
  } else {
    open_output(r.output) << text.str();
  }
}

struct TaggedArgs {
  std::filesystem::path gold;
  std::filesystem::path pred;
  bool token_level = false;
  ResultArgs result;
};

void run_eval_ner(const CLI::App& app, const TaggedArgs& a) {
  const auto gold = read_tagged_tsv(a.gold);
  const auto pred = read_tagged_tsv(a.pred);
  const metrics::NerScore s =
      a.token_level ? metrics::ner_f1_token_level(gold, pred) : metrics::ner_f1(gold, pred);
  std::vector<metrics::TaskResult> rows;
  for (const auto& c : s.per_class) {
    rows.push_back({a.result.model, a.result.language, "NER", "f1_" + c.cls, c.f1});
  }
  rows.push_back({a.result.model, a.result.language, "NER",
                  a.token_level ? "token_macro_f1" : "macro_f1", s.macro_f1});
  write_results(app, a.result, rows);
}

void run_eval_pos(const CLI::App& app, const TaggedArgs& a) {
  const auto gold = read_tagged_tsv(a.gold);
  const auto pred = read_tagged_tsv(a.pred);
  const metrics::PosScore s = metrics::pos_f1(gold, pred);
  write_results(app, a.result,
                {{a.result.model, a.result.language, "POS", "micro_f1", s.micro_f1},
                 {a.result.model, a.result.language, "POS", "accuracy", s.accuracy}});
}

void run_eval_dp(const CLI::App& app, const TaggedArgs& a) {
  std::vector<depcodec::DepTree> gold;
  std::vector<depcodec::DepTree> pred;
  for (const auto& s : conllu::read_all(a.gold)) {
    if (s.size() > 0) gold.push_back(s.tree());
  }
  for (const auto& s : conllu::read_all(a.pred)) {
    if (s.size() > 0) pred.push_back(s.tree());
  }
  const metrics::AttachmentScore s = metrics::attachment_scores(gold, pred);
  write_results(app, a.result,
                {{a.result.model, a.result.language, "DP", "uas", s.uas},
                 {a.result.model, a.result.language, "DP", "las", s.las}});
}

struct WaArgs {
  std::filesystem::path dataset;
  std::filesystem::path vocab;
  std::string language;
  std::filesystem::path templates;
  std::string scorer;
  std::vector<std::filesystem::path> train;
  std::string mask_slot = "w2";
  std::size_t beam = 10;
  std::size_t k = 5;
  unsigned threads = 1;
  int timeout_ms = 30000;
  std::filesystem::path output = "-";
};

void run_eval_wa(const CLI::App& app, const WaArgs& a) {
  if (a.scorer.empty() == a.train.empty()) {
    throw UsageError("give exactly one of --scorer (external command) or --train (count scorer)");
  }
  analogy::EvalOptions options;
  try {
    options.slot = analogy::parse_mask_slot(a.mask_slot);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.beam == 0 || a.k == 0) throw UsageError("--beam and --k must be positive");
  options.predict = {a.k, a.beam};
  options.threads = a.threads;

  const auto templates =
      a.templates.empty() ? analogy::TemplateSet::builtin() : analogy::TemplateSet::load(a.templates);
  const auto dataset = analogy::read_dataset(a.dataset);
  const subword::Vocabulary vocab = subword::Vocabulary::load(a.vocab);
  const subword::Encoder encoder(vocab);

  std::unique_ptr<scorer::MaskedLmScorer> model;
  if (!a.scorer.empty()) {
    std::vector<std::string> argv;
    for (const std::string_view w : utf8::split_words(a.scorer)) argv.emplace_back(w);
    model = std::make_unique<scorer::ProcessScorer>(
        argv, scorer::ClientOptions{std::chrono::milliseconds(a.timeout_ms)});
  } else {
    std::vector<std::string> lines;
    for (const auto& path : a.train) {
      LineReader reader(path);
      std::string line;
      while (reader.next(line)) {
        if (!line.empty() && !is_provenance_line(line)) lines.push_back(line);
      }
    }
    model = std::make_unique<scorer::CountScorer>(vocab, lines);
  }

  const analogy::EvalReport report =
      analogy::evaluate(dataset, *model, encoder, templates, a.language, options);

  std::ostringstream text;
  text << provenance(app, 0).line() << '\n';
  if (report.partial) {
    text << "# partial: " << report.evaluated << " of " << report.total
         << " entries evaluated before the scorer failed\n";
  }
  analogy::write_report_csv(text, report.score);
  if (a.output == "-") {
    std::cout << text.str();
  } else {
    open_output(a.output) << text.str();
  }
  std::cerr << "macro P@" << a.k << ": " << format_double(report.score.macro) << " over "
            << report.score.categories.size() << " categories";
  if (report.score.empty_predictions > 0) {
    std::cerr << " (warning: " << report.score.empty_predictions << " probes had no candidates)";
  }
  std::cerr << '\n';
  if (report.partial) throw std::runtime_error("scorer failed: " + report.error);
}

}  // namespace

void register_eval_commands(CLI::App& root, std::vector<Command>& out) {
  struct Spec {
    const char* name;
    const char* help;
    void (*run)(const CLI::App&, const TaggedArgs&);
    bool ner;
  };
  const Spec specs[] = {
      {"eval-ner", "Span-level NER macro F1 over PER/LOC/ORG from BIO files (FORM<TAB>TAG)",
       run_eval_ner, true},
      {"eval-pos", "POS micro F1 from tagged files (FORM<TAB>TAG)", run_eval_pos, false},
      {"eval-dp", "UAS/LAS (percent, punctuation included) from two CoNLL-U files", run_eval_dp,
       false},
  };
  for (const Spec& spec : specs) {
    auto args = std::make_shared<TaggedArgs>();
    CLI::App* app = root.add_subcommand(spec.name, spec.help);
    app->add_option("--gold", args->gold, "gold file")->required()->check(CLI::ExistingFile);
    app->add_option("--pred", args->pred, "predicted file")->required()->check(CLI::ExistingFile);
    if (spec.ner) {
      app->add_flag("--token-level", args->token_level, "score tokens instead of exact spans");
    }
    add_result_options(app, args->result);
    out.push_back({app, [app, args, run = spec.run] { run(*app, *args); }});
  }

  auto args = std::make_shared<WaArgs>();
  CLI::App* app = root.add_subcommand(
      "eval-wa",
      "Word analogy by masked prediction; writes category,n,hits,p_at_5 plus a macro row. "
      "Dataset: ': category' lines, then 'w1 w2 w3 w4' lines");
  app->add_option("--dataset", args->dataset, "analogy file")->required()->check(CLI::ExistingFile);
  app->add_option("--vocab", args->vocab, "vocabulary file matching the scorer")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--language", args->language, "template language")->required();
  app->add_option("--templates", args->templates, "language<TAB>template file")
      ->check(CLI::ExistingFile);
  app->add_option("--scorer", args->scorer, "scorer command line (JSON lines on stdin/stdout)");
  app->add_option("--train", args->train, "sentence files for the built-in count scorer")
      ->check(CLI::ExistingFile);
  app->add_option("--mask-slot", args->mask_slot, "w2 | w4")->capture_default_str();
  app->add_option("--beam", args->beam, "beam width for multi-piece words")->capture_default_str();
  app->add_option("--k", args->k, "candidates kept (P@k)")->capture_default_str();
  app->add_option("--threads", args->threads, "probes in flight")->capture_default_str();
  app->add_option("--timeout-ms", args->timeout_ms, "per-request scorer timeout")
      ->capture_default_str();
  app->add_option("-o,--output", args->output, "report CSV, - for stdout")
      ->capture_default_str()
      ->group(kOutputGroup);
  out.push_back({app, [app, args] { run_eval_wa(*app, *args); }});
}

}  // namespace morphbert::cli
