#include <iostream>
#include <memory>

#include <nlohmann/json.hpp>

#include "command.hpp"
#include "morphbert/common/format.hpp"
#include "morphbert/mlmdata.hpp"
#include "morphbert/subword.hpp"

namespace morphbert::cli {

namespace {

struct BatchArgs {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path vocab;
  double mask_prob = 0.15;
  std::size_t seq_len = 512;
  std::uint64_t seed = 0;
  std::string corruption = "0.8,0.1,0.1";
  std::string format = "binary";
  unsigned threads = 1;
  std::filesystem::path output;
};

constexpr std::size_t kChunkWindows = 4096;

void run_mlm_batches(const CLI::App& app, const BatchArgs& a) {
  mlmdata::MaskingConfig cfg;
  cfg.mask_prob = a.mask_prob;
  cfg.seq_len = a.seq_len;
  cfg.seed = a.seed;
  try {
    cfg.corruption = mlmdata::parse_corruption(a.corruption);
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const bool binary = a.format == "binary";
  if (!binary && a.format != "debug") throw UsageError("--format must be binary or debug");

  const subword::Vocabulary vocab = subword::Vocabulary::load(a.vocab);
  const subword::Encoder encoder(vocab);
  const Provenance prov = provenance(app, a.seed);

  auto out = open_output(a.output, std::ios::binary);
  if (binary) {
    nlohmann::ordered_json header;
    header["provenance"] = prov.line();
    header["seq_len"] = cfg.seq_len;
    header["mask_prob"] = cfg.mask_prob;
    header["corruption"] = {cfg.corruption.mask, cfg.corruption.random, cfg.corruption.keep};
    header["seed"] = cfg.seed;
    header["vocab_size"] = vocab.size();
    header["ignore_index"] = mlmdata::kIgnoreIndex;
    mlmdata::write_batch_header(out, header.dump());
  } else {
    out << prov.line() << '\n' << "# index\tinput_ids\ttarget_ids\tmask_flags\n";
  }

  mlmdata::SequencePacker packer(cfg.seq_len, vocab.specials());
  mlmdata::MaskingCounters counters;
  std::vector<mlmdata::PackedSequence> pending;
  auto drain = [&](bool force) {
    if (pending.empty() || (!force && pending.size() < kChunkWindows)) return;
    for (const auto& ex : mlmdata::mask_windows(pending, cfg, vocab, a.threads, &counters)) {
      if (binary) {
        mlmdata::write_record(out, ex);
      } else {
        mlmdata::write_debug_record(out, ex);
      }
    }
    pending.clear();
  };
  auto take = [&](std::vector<mlmdata::PackedSequence> windows) {
    for (auto& w : windows) pending.push_back(std::move(w));
    drain(false);
  };

  // Each input file is a document; a blank line also ends one.
  for (const auto& path : a.inputs) {
    LineReader reader(path);
    std::string line;
    while (reader.next(line)) {
      if (is_provenance_line(line)) continue;
      if (line.empty()) {
        take(packer.end_document());
        continue;
      }
      take(packer.push(encoder.encode(line)));
    }
    take(packer.end_document());
  }
  drain(true);
  if (!out) throw std::runtime_error("failed writing " + a.output.string());

  const auto& pc = packer.counters();
  std::cerr << "windows: " << pc.windows << ", split sentences: " << pc.split_sentences
            << ", truncated words: " << pc.truncated_words
            << ", unmaskable windows: " << counters.unmaskable_windows << ", masked "
            << counters.masked_tokens << " of " << counters.maskable_tokens << " tokens";
  if (counters.maskable_tokens > 0) {
    std::cerr << " (" << format_double(static_cast<double>(counters.masked_tokens) /
                                       static_cast<double>(counters.maskable_tokens))
              << ")";
  }
  std::cerr << '\n';
}

struct ManifestArgs {
  std::string model;
  std::string finetune;
  std::filesystem::path output = "-";
};

void run_manifest(const CLI::App& app, const ManifestArgs& a) {
  if (a.model.empty() == a.finetune.empty()) throw UsageError("give exactly one of --model, --finetune");
  std::string body;
  if (!a.model.empty()) {
    const auto preset = mlmdata::parse_model_preset(a.model);
    if (!preset) throw UsageError("--model must be litlat or estroberta");
    body = mlmdata::emit_manifest(*preset).to_json();
  } else {
    mlmdata::FinetuneTask task;
    if (a.finetune == "ner") {
      task = mlmdata::FinetuneTask::kNer;
    } else if (a.finetune == "pos") {
      task = mlmdata::FinetuneTask::kPos;
    } else if (a.finetune == "dp") {
      task = mlmdata::FinetuneTask::kDp;
    } else {
      throw UsageError("--finetune must be ner, pos or dp");
    }
    body = mlmdata::emit_finetune_manifest(task).to_json();
  }
  // JSON has no comments, so provenance travels as a field.
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(body);
  nlohmann::ordered_json doc;
  doc["provenance"] = provenance(app, 0).line();
  for (auto& [k, v] : j.items()) doc[k] = v;
  const std::string text = doc.dump(2) + "\n";
  if (a.output == "-") {
    std::cout << text;
  } else {
    open_output(a.output) << text;
  }
}

}  // namespace

void register_data_commands(CLI::App& root, std::vector<Command>& out) {
  {
    auto args = std::make_shared<BatchArgs>();
    CLI::App* app = root.add_subcommand(
        "mlm-batches",
        "Encode, pack and whole-word-mask sentences. Binary records: u64 index, u32 n, n x i32 "
        "input ids, n x i32 targets (-100 = ignored), n x u8 mask flags, little-endian, after "
        "the magic MBWWM001 and a u32-length JSON header");
    app->add_option("-i,--input", args->inputs,
                    "one-sentence-per-line files; each file and each blank line ends a document")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--vocab", args->vocab, "vocabulary file")->required()->check(CLI::ExistingFile);
    app->add_option("--mask-prob", args->mask_prob, "fraction of tokens to select")
        ->capture_default_str();
    app->add_option("--seq-len", args->seq_len, "window length including BOS/EOS")
        ->capture_default_str();
    app->add_option("--seed", args->seed, "masking seed")->capture_default_str();
    app->add_option("--corruption", args->corruption, "mask,rand,keep fractions")
        ->capture_default_str();
    app->add_option("--format", args->format, "binary | debug")->capture_default_str();
    app->add_option("--threads", args->threads, "masking threads (output is identical for any N)")
        ->capture_default_str();
    app->add_option("-o,--output", args->output, "batch file")->required()->group(kOutputGroup);
    out.push_back({app, [app, args] { run_mlm_batches(*app, *args); }});
  }
  {
    auto args = std::make_shared<ManifestArgs>();
    CLI::App* app = root.add_subcommand(
        "manifest", "Emit the pretraining (--model) or fine-tuning (--finetune) manifest as JSON");
    app->add_option("--model", args->model, "litlat | estroberta");
    app->add_option("--finetune", args->finetune, "ner | pos | dp");
    app->add_option("-o,--output", args->output, "output file, - for stdout")
        ->capture_default_str()
        ->group(kOutputGroup);
    out.push_back({app, [app, args] { run_manifest(*app, *args); }});
  }
}

}  // namespace morphbert::cli
