#include "morphbert/mlmdata.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "morphbert/common/rng.hpp"

namespace morphbert::mlmdata {

void MaskingConfig::validate() const {
  if (!(mask_prob > 0.0 && mask_prob < 1.0)) {
    throw std::invalid_argument("mask probability must lie in (0, 1)");
  }
  const double parts[] = {corruption.mask, corruption.random, corruption.keep};
  for (double p : parts) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("corruption fractions must be in [0, 1]");
  }
  if (std::abs(corruption.mask + corruption.random + corruption.keep - 1.0) > 1e-9) {
    throw std::invalid_argument("corruption split must sum to 1");
  }
  if (seq_len < 2) throw std::invalid_argument("sequence length must be at least 2");
}

CorruptionSplit parse_corruption(std::string_view text) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string field(text.substr(start, comma == std::string_view::npos
                                                   ? std::string_view::npos
                                                   : comma - start));
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != field.size()) {
      throw std::invalid_argument("bad corruption split '" + std::string(text) +
                                  "'; expected mask,rand,keep");
    }
    parts.push_back(value);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 3) {
    throw std::invalid_argument("corruption split needs three fractions: mask,rand,keep");
  }
  return {parts[0], parts[1], parts[2]};
}

// ---------------------------------------------------------------------------
// Packing

SequencePacker::SequencePacker(std::size_t seq_len, subword::SpecialIds specials)
    : capacity_(seq_len - 2), specials_(specials) {
  if (seq_len < 3) throw std::invalid_argument("sequence length must leave room for pieces");
}

void SequencePacker::append(std::span<const PieceId> ids, std::span<const WordSpan> spans,
                            std::size_t offset) {
  const std::size_t base = ids_.size();
  ids_.insert(ids_.end(), ids.begin(), ids.end());
  for (const WordSpan& s : spans) {
    spans_.push_back({s.begin - offset + base, s.end - offset + base});
  }
}

std::optional<PackedSequence> SequencePacker::flush() {
  if (ids_.empty()) return std::nullopt;
  PackedSequence window;
  window.index = next_index_++;
  window.ids.reserve(ids_.size() + 2);
  window.ids.push_back(specials_.bos);
  window.ids.insert(window.ids.end(), ids_.begin(), ids_.end());
  window.ids.push_back(specials_.eos);
  window.word_spans.reserve(spans_.size());
  for (const WordSpan& s : spans_) window.word_spans.push_back({s.begin + 1, s.end + 1});
  ids_.clear();
  spans_.clear();
  ++counters_.windows;
  return window;
}

std::vector<PackedSequence> SequencePacker::push(const subword::Encoding& sentence) {
  std::vector<PackedSequence> done;
  auto emit = [&] {
    if (auto w = flush()) done.push_back(std::move(*w));
  };
  const std::span<const PieceId> ids(sentence.ids);
  const std::span<const WordSpan> spans(sentence.word_spans);

  if (ids.size() <= capacity_) {
    if (ids_.size() + ids.size() > capacity_) emit();
    append(ids, spans, 0);
    return done;
  }

  emit();
  ++counters_.split_sentences;
  std::size_t word = 0;
  while (word < spans.size()) {
    const std::size_t start = spans[word].begin;
    if (spans.back().end - start <= capacity_) {
      append(ids.subspan(start, spans.back().end - start), spans.subspan(word), start);
      break;
    }
    std::size_t last = word;
    while (last < spans.size() && spans[last].end - start <= capacity_) ++last;
    if (last == word) {
      // A single word longer than the window: keep its first pieces only.
      ++counters_.truncated_words;
      const WordSpan cut{start, start + capacity_};
      append(ids.subspan(start, capacity_), std::span<const WordSpan>(&cut, 1), start);
      ++word;
    } else {
      append(ids.subspan(start, spans[last - 1].end - start), spans.subspan(word, last - word),
             start);
      word = last;
    }
    emit();
  }
  return done;
}

std::vector<PackedSequence> SequencePacker::end_document() {
  std::vector<PackedSequence> done;
  if (auto w = flush()) done.push_back(std::move(*w));
  return done;
}

std::vector<PackedSequence> pack_sequences(std::span<const subword::Encoding> encodings,
                                           std::size_t seq_len, subword::SpecialIds specials,
                                           PackingCounters* counters) {
  SequencePacker packer(seq_len, specials);
  std::vector<PackedSequence> out;
  for (const auto& enc : encodings) {
    for (auto& w : packer.push(enc)) out.push_back(std::move(w));
  }
  for (auto& w : packer.end_document()) out.push_back(std::move(w));
  if (counters != nullptr) *counters = packer.counters();
  return out;
}

// ---------------------------------------------------------------------------
// Masking

MaskedExample mask_window(const PackedSequence& window, const MaskingConfig& cfg,
                          const subword::Vocabulary& vocab, MaskingCounters* counters) {
  MaskedExample ex;
  ex.index = window.index;
  ex.input_ids = window.ids;
  ex.target_ids.assign(window.ids.size(), kIgnoreIndex);
  ex.mask_flags.assign(window.ids.size(), 0);

  std::vector<std::size_t> words;
  std::size_t maskable = 0;
  for (std::size_t w = 0; w < window.word_spans.size(); ++w) {
    if (window.word_spans[w].size() == 0) continue;
    words.push_back(w);
    maskable += window.word_spans[w].size();
  }
  MaskingCounters local;
  local.windows = 1;
  local.maskable_tokens = maskable;
  if (words.empty()) {
    local.unmaskable_windows = 1;
    if (counters != nullptr) *counters += local;
    return ex;
  }

  Rng rng(mix_seed(cfg.seed, window.index));
  for (std::size_t i = words.size(); i > 1; --i) {
    std::swap(words[i - 1], words[rng.below(i)]);
  }

  const double target = cfg.mask_prob * static_cast<double>(maskable);
  std::size_t selected_tokens = 0;
  std::vector<std::size_t> selected;
  for (const std::size_t w : words) {
    const std::size_t len = window.word_spans[w].size();
    const double with = static_cast<double>(selected_tokens + len);
    if (with <= target) {
      selected.push_back(w);
      selected_tokens += len;
      continue;
    }
    const double over = with - target;
    const double under = target - static_cast<double>(selected_tokens);
    if (over < under || (over == under && rng.below(2) == 1)) {
      selected.push_back(w);
      selected_tokens += len;
    }
    break;
  }

  const auto& split = cfg.corruption;
  const PieceId mask_id = vocab.specials().mask;
  const auto first_random = static_cast<std::uint64_t>(vocab.first_learned());
  const std::uint64_t random_range = vocab.size() - first_random;
  for (const std::size_t w : selected) {
    const WordSpan span = window.word_spans[w];
    const double u = rng.uniform();
    for (std::size_t p = span.begin; p < span.end; ++p) {
      ex.target_ids[p] = window.ids[p];
      ex.mask_flags[p] = 1;
    }
    if (u < split.mask) {
      for (std::size_t p = span.begin; p < span.end; ++p) ex.input_ids[p] = mask_id;
    } else if (u < split.mask + split.random && random_range > 0) {
      for (std::size_t p = span.begin; p < span.end; ++p) {
        ex.input_ids[p] = static_cast<PieceId>(first_random + rng.below(random_range));
      }
    }
  }
  local.masked_tokens = selected_tokens;
  if (counters != nullptr) *counters += local;
  return ex;
}

std::vector<MaskedExample> mask_windows(std::span<const PackedSequence> windows,
                                        const MaskingConfig& cfg,
                                        const subword::Vocabulary& vocab, unsigned threads,
                                        MaskingCounters* counters) {
  std::vector<MaskedExample> out(windows.size());
  const unsigned workers = std::max(
      1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, windows.size()))));
  std::vector<MaskingCounters> partial(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < windows.size(); i += workers) {
          out[i] = mask_window(windows[i], cfg, vocab, &partial[w]);
        }
      });
    }
  }
  if (counters != nullptr) {
    for (const auto& p : partial) *counters += p;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary records

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>(u & 0xff);
    u = static_cast<U>(u >> 8);
  }
  out.write(bytes, sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | bytes[i]);
  value = static_cast<T>(u);
  return true;
}

}  // namespace

void write_batch_header(std::ostream& out, std::string_view header) {
  out.write(kBatchMagic.data(), static_cast<std::streamsize>(kBatchMagic.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
}

void write_record(std::ostream& out, const MaskedExample& ex) {
  put_le<std::uint64_t>(out, ex.index);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ex.input_ids.size()));
  for (const PieceId id : ex.input_ids) put_le<std::int32_t>(out, id);
  for (const PieceId id : ex.target_ids) put_le<std::int32_t>(out, id);
  out.write(reinterpret_cast<const char*>(ex.mask_flags.data()),
            static_cast<std::streamsize>(ex.mask_flags.size()));
}

std::string read_batch_header(std::istream& in) {
  std::string magic(kBatchMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kBatchMagic) {
    throw std::runtime_error("not a masked-batch stream (bad magic)");
  }
  std::uint32_t len = 0;
  if (!get_le(in, len)) throw std::runtime_error("truncated batch header");
  std::string header(len, '\0');
  if (!in.read(header.data(), len)) throw std::runtime_error("truncated batch header");
  return header;
}

bool read_record(std::istream& in, MaskedExample& ex) {
  if (!get_le(in, ex.index)) {
    if (in.gcount() == 0) return false;
    throw std::runtime_error("truncated batch record");
  }
  std::uint32_t n = 0;
  if (!get_le(in, n)) throw std::runtime_error("truncated batch record");
  ex.input_ids.resize(n);
  ex.target_ids.resize(n);
  ex.mask_flags.resize(n);
  for (auto& id : ex.input_ids) {
    if (!get_le(in, id)) throw std::runtime_error("truncated batch record");
  }
  for (auto& id : ex.target_ids) {
    if (!get_le(in, id)) throw std::runtime_error("truncated batch record");
  }
  if (!in.read(reinterpret_cast<char*>(ex.mask_flags.data()), n)) {
    throw std::runtime_error("truncated batch record");
  }
  return true;
}

void write_debug_record(std::ostream& out, const MaskedExample& ex) {
  out << ex.index << '\t';
  for (std::size_t i = 0; i < ex.input_ids.size(); ++i) out << (i ? " " : "") << ex.input_ids[i];
  out << '\t';
  for (std::size_t i = 0; i < ex.target_ids.size(); ++i) out << (i ? " " : "") << ex.target_ids[i];
  out << '\t';
  for (const auto f : ex.mask_flags) out << (f ? '1' : '0');
  out << '\n';
}

// ---------------------------------------------------------------------------
// Manifests

std::optional<ModelPreset> parse_model_preset(std::string_view name) {
  if (name == "litlat") return ModelPreset::kLitLat;
  if (name == "estroberta") return ModelPreset::kEstRoberta;
  return std::nullopt;
}

TrainManifest emit_manifest(ModelPreset model) {
  TrainManifest m;
  switch (model) {
    case ModelPreset::kLitLat:
      m.model = "litlat";
      m.vocab_size = static_cast<std::int64_t>(subword::kLitLatTargetSize);
      break;
    case ModelPreset::kEstRoberta:
      m.model = "estroberta";
      m.vocab_size = static_cast<std::int64_t>(subword::kEstRobertaTargetSize);
      break;
  }
  m.effective_batch_tokens = m.expected_effective_batch_tokens();
  return m;
}

std::string TrainManifest::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["architecture"] = architecture;
  j["layers"] = layers;
  j["hidden_size"] = hidden_size;
  j["vocab_size"] = vocab_size;
  j["seq_len"] = seq_len;
  j["optimizer"] = {{"name", optimizer}, {"beta1", adam_beta1}, {"beta2", adam_beta2}};
  j["dropout"] = dropout;
  j["epochs"] = epochs;
  j["per_device_batch_tokens"] = per_device_batch_tokens;
  j["grad_accum_steps"] = grad_accum_steps;
  j["devices"] = devices;
  j["effective_batch_tokens"] = effective_batch_tokens;
  j["masking"] = {{"mask_prob", mask_prob}, {"whole_word", whole_word_masking}};
  j["training_toolkit"] = training_toolkit;
  j["learning_rate"] = nullptr;
  j["warmup"] = nullptr;
  j["lr_schedule"] = nullptr;
  return j.dump(2);
}

FinetuneManifest emit_finetune_manifest(FinetuneTask task) {
  switch (task) {
    case FinetuneTask::kNer:
      return {"ner", 3, 8, "token-classification"};
    case FinetuneTask::kPos:
      return {"pos", 3, 8, "token-classification"};
    case FinetuneTask::kDp:
      return {"dp", 10, 8, "sequence-labeling/arc-standard"};
  }
  throw std::invalid_argument("unknown fine-tuning task");
}

std::string FinetuneManifest::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = task;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["head"] = head;
  j["learning_rate"] = nullptr;
  return j.dump(2);
}

}  // namespace morphbert::mlmdata
