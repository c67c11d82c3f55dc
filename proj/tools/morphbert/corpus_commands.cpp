#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

#include "command.hpp"
#include "morphbert/common/format.hpp"
#include "morphbert/corpus.hpp"
#include "morphbert/subword.hpp"

namespace morphbert::cli {

namespace {

struct CorpusPrepArgs {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> inputs;
  std::string language;
  std::filesystem::path abbreviations;
  std::filesystem::path out_dir;
  unsigned threads = 1;
};

void run_corpus_prep(const CLI::App& app, const CorpusPrepArgs& a) {
  corpus::CorpusManifest manifest;
  if (!a.manifest.empty()) {
    manifest = corpus::load_manifest(a.manifest);
  } else {
    if (a.inputs.empty()) throw UsageError("give --manifest or at least one --input");
    if (a.language.empty()) throw UsageError("--input requires --language");
    manifest.languages = {a.language};
    for (const auto& p : a.inputs) manifest.documents.push_back({p, a.language, "cli"});
  }
  if (manifest.languages.empty()) {
    for (const auto& d : manifest.documents) {
      if (std::find(manifest.languages.begin(), manifest.languages.end(), d.language) ==
          manifest.languages.end()) {
        manifest.languages.push_back(d.language);
      }
    }
  }

  std::map<std::string, std::unique_ptr<corpus::RuleBasedSplitter>> splitters;
  for (const std::string& lang : manifest.languages) {
    splitters[lang] = std::make_unique<corpus::RuleBasedSplitter>(
        a.abbreviations.empty() ? corpus::RuleBasedSplitter::for_language(lang)
                                : corpus::RuleBasedSplitter::from_file(a.abbreviations));
  }

  const Provenance prov = provenance(app, 0);
  std::map<std::string, std::ofstream> outputs;
  for (const std::string& lang : manifest.languages) {
    auto& out = outputs[lang] = open_output(a.out_dir / (lang + ".txt"));
    out << prov.line() << '\n';
  }

  corpus::Deduplicator dedup;
  corpus::StatsAccumulator stats;
  const std::size_t batch = std::max(1u, a.threads);
  for (std::size_t start = 0; start < manifest.documents.size(); start += batch) {
    const std::size_t end = std::min(manifest.documents.size(), start + batch);
    std::vector<std::vector<corpus::SentenceLine>> normalized(end - start);
    std::vector<std::exception_ptr> errors(end - start);
    {
      std::vector<std::jthread> pool;
      for (std::size_t i = start; i < end; ++i) {
        pool.emplace_back([&, i] {
          try {
            const auto& entry = manifest.documents[i];
            const corpus::Document doc{entry.path.string(), entry.language, read_file(entry.path)};
            normalized[i - start] = corpus::normalize(doc, *splitters.at(entry.language));
          } catch (...) {
            errors[i - start] = std::current_exception();
          }
        });
      }
    }
    for (std::size_t i = 0; i < normalized.size(); ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
      for (const corpus::SentenceLine& line : normalized[i]) {
        if (!dedup.admit(line)) continue;
        outputs.at(line.language) << line.text << '\n';
        stats.add(line);
      }
    }
  }

  const auto rows = stats.finish(dedup.counts());
  auto out = open_output(a.out_dir / "stats.csv");
  out << prov.line() << '\n';
  corpus::write_stats_csv(out, rows);
  if (!manifest.reported_tokens.empty()) {
    auto rep = open_output(a.out_dir / "reported_tokens.csv");
    rep << prov.line() << '\n' << "language,reported_tokens\n";
    for (const auto& [lang, count] : manifest.reported_tokens) {
      rep << lang << ',' << format_double(count) << '\n';
    }
  }
  for (const auto& r : rows) {
    std::cerr << r.language << ": " << r.sentence_count << " sentences, " << r.token_count
              << " tokens, duplicate ratio " << format_double(r.duplicate_ratio) << '\n';
  }
}

struct VocabTrainArgs {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> languages;
  std::size_t sample_lines = 0;
  std::string policy = "random";
  std::uint64_t seed = 0;
  std::size_t target_size = 0;
  std::string preset;
  std::filesystem::path output;
};

void run_vocab_train(const CLI::App& app, const VocabTrainArgs& a) {
  std::size_t target = a.target_size;
  if (!a.preset.empty()) {
    if (a.preset == "litlat") {
      target = subword::kLitLatTargetSize;
    } else if (a.preset == "estroberta") {
      target = subword::kEstRobertaTargetSize;
    } else {
      throw UsageError("--preset must be litlat or estroberta");
    }
    if (a.target_size != 0 && a.target_size != target) {
      throw UsageError("--target-size conflicts with --preset");
    }
  }
  if (target == 0) throw UsageError("give --target-size or --preset");
  if (!a.languages.empty() && a.languages.size() != a.inputs.size()) {
    throw UsageError("--language must be given once per --input");
  }

  std::vector<corpus::LanguageFile> files;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    files.push_back({a.languages.empty() ? a.inputs[i].stem().string() : a.languages[i],
                     a.inputs[i]});
  }
  corpus::SamplePolicy policy = corpus::SamplePolicy::kRandom;
  if (a.policy == "equal-parts") {
    policy = corpus::SamplePolicy::kEqualParts;
  } else if (a.policy != "random") {
    throw UsageError("--policy must be random or equal-parts");
  }

  std::vector<corpus::SentenceLine> sample;
  if (a.sample_lines == 0) {
    if (policy == corpus::SamplePolicy::kEqualParts) {
      throw UsageError("--policy equal-parts needs --sample-lines");
    }
    for (const auto& f : files) {
      LineReader reader(f.path);
      std::string line;
      while (reader.next(line)) {
        if (!line.empty() && !is_provenance_line(line)) sample.push_back(corpus::make_line(f.language, line));
      }
    }
  } else {
    sample = corpus::sample_files_for_vocab(files, a.sample_lines, policy, a.seed);
  }
  std::vector<std::string> texts;
  texts.reserve(sample.size());
  for (auto& s : sample) texts.push_back(std::move(s.text));

  const subword::Vocabulary vocab = subword::train_vocab(texts, target);
  auto out = open_output(a.output, std::ios::binary);
  out << provenance(app, a.seed).line() << '\n';
  vocab.save(out);
  if (!out) throw std::runtime_error("failed writing " + a.output.string());

  const subword::Encoder encoder(vocab);
  std::cerr << "sample lines: " << texts.size() << ", base pieces: "
            << subword::character_inventory(texts) << ", learned pieces: " << vocab.learned_count()
            << ", fertility on sample: " << format_double(subword::fertility(texts, encoder))
            << '\n';
}

}  // namespace

void register_corpus_commands(CLI::App& root, std::vector<Command>& out) {
  {
    auto args = std::make_shared<CorpusPrepArgs>();
    CLI::App* app = root.add_subcommand(
        "corpus-prep",
        "Normalize documents to one sentence per line, deduplicate, write per-language files "
        "<lang>.txt and stats.csv (language,token_count,sentence_count,duplicate_ratio)");
    app->add_option("--manifest", args->manifest,
                    "JSON manifest: {\"languages\":[..],\"documents\":[{\"path\",\"language\","
                    "\"source\"}],\"reported_tokens\":{lang:count}}")
        ->check(CLI::ExistingFile);
    app->add_option("-i,--input", args->inputs, "document files (plain or gzip), one document each")
        ->check(CLI::ExistingFile);
    app->add_option("-l,--language", args->language, "language of --input documents");
    app->add_option("--abbreviations", args->abbreviations,
                    "abbreviation list (one per line) replacing the built-in ones")
        ->check(CLI::ExistingFile);
    app->add_option("-o,--out-dir", args->out_dir, "output directory")
        ->required()
        ->group(kOutputGroup);
    app->add_option("--threads", args->threads, "documents normalized concurrently")
        ->capture_default_str();
    out.push_back({app, [app, args] { run_corpus_prep(*app, *args); }});
  }
  {
    auto args = std::make_shared<VocabTrainArgs>();
    CLI::App* app = root.add_subcommand(
        "vocab-train",
        "Sample sentence files and induce a subword vocabulary. Output: JSON header line, then "
        "piece<TAB>id<TAB>word_begin");
    app->add_option("-i,--input", args->inputs, "one-sentence-per-line files, one per language")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("-l,--language", args->languages,
                    "language of each input, in order (default: file stem)");
    app->add_option("--sample-lines", args->sample_lines, "lines to sample (0 = all)")
        ->capture_default_str();
    app->add_option("--policy", args->policy, "random | equal-parts")->capture_default_str();
    app->add_option("--seed", args->seed, "sampling seed")->capture_default_str();
    app->add_option("--target-size", args->target_size, "learned pieces to induce");
    app->add_option("--preset", args->preset, "litlat (84000) | estroberta (40000)");
    app->add_option("-o,--output", args->output, "vocabulary file")
        ->required()
        ->group(kOutputGroup);
    out.push_back({app, [app, args] { run_vocab_train(*app, *args); }});
  }
}

}  // namespace morphbert::cli
