#pragma once

// Whole-word-masked pretraining batches and the pretraining manifest.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "morphbert/subword.hpp"

namespace morphbert::mlmdata {

using subword::PieceId;
using subword::WordSpan;

// Target value at positions that are not predicted. Outside the id range.
inline constexpr PieceId kIgnoreIndex = -100;

struct CorruptionSplit {
  double mask = 0.8;
  double random = 0.1;
  double keep = 0.1;
};

struct MaskingConfig {
  double mask_prob = 0.15;
  CorruptionSplit corruption;
  std::size_t seq_len = 512;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

// Parses "mask,rand,keep" (e.g. "0.8,0.1,0.1").
CorruptionSplit parse_corruption(std::string_view text);

// A BOS ... EOS window of whole sentences (or sentence fragments cut at word
// boundaries). word_spans index into ids.
struct PackedSequence {
  std::uint64_t index = 0;
  std::vector<PieceId> ids;
  std::vector<WordSpan> word_spans;
};

struct PackingCounters {
  std::uint64_t windows = 0;
  std::uint64_t split_sentences = 0;
  std::uint64_t truncated_words = 0;
};

// Greedy packer: consecutive sentences of one document share a window while
// they fit in seq_len - 2 pieces. A sentence that is too long on its own is
// cut at the last word boundary that fits and the rest continues in the next
// window; a single word longer than seq_len - 2 is truncated (counted).
class SequencePacker {
 public:
  SequencePacker(std::size_t seq_len, subword::SpecialIds specials);

  // Returns the windows completed by this sentence (possibly none).
  std::vector<PackedSequence> push(const subword::Encoding& sentence);
  // Closes the current document; returns the pending window if any.
  std::vector<PackedSequence> end_document();

  const PackingCounters& counters() const { return counters_; }

 private:
  void append(std::span<const PieceId> ids, std::span<const WordSpan> spans, std::size_t offset);
  std::optional<PackedSequence> flush();

  std::size_t capacity_;
  subword::SpecialIds specials_;
  std::vector<PieceId> ids_;
  std::vector<WordSpan> spans_;
  std::uint64_t next_index_ = 0;
  PackingCounters counters_;
};

std::vector<PackedSequence> pack_sequences(std::span<const subword::Encoding> encodings,
                                           std::size_t seq_len, subword::SpecialIds specials,
                                           PackingCounters* counters = nullptr);

struct MaskedExample {
  std::uint64_t index = 0;
  std::vector<PieceId> input_ids;
  std::vector<PieceId> target_ids;
  std::vector<std::uint8_t> mask_flags;

  friend bool operator==(const MaskedExample&, const MaskedExample&) = default;
};

struct MaskingCounters {
  std::uint64_t windows = 0;
  std::uint64_t unmaskable_windows = 0;
  std::uint64_t maskable_tokens = 0;
  std::uint64_t masked_tokens = 0;

  MaskingCounters& operator+=(const MaskingCounters& o) {
    windows += o.windows;
    unmaskable_windows += o.unmaskable_windows;
    maskable_tokens += o.maskable_tokens;
    masked_tokens += o.masked_tokens;
    return *this;
  }
};

// Whole-word masking of one window. Words are visited in a random order and
// selected while the selected-token count stays within mask_prob of the
// window's word tokens; the first word that would overshoot is also taken if
// that lands strictly closer to the target (a tie is a coin flip). Each
// selected word is then masked, replaced by random pieces or kept, as a
// unit. The random stream depends only on (cfg.seed, window.index).
MaskedExample mask_window(const PackedSequence& window, const MaskingConfig& cfg,
                          const subword::Vocabulary& vocab, MaskingCounters* counters = nullptr);

// Masks windows on up to `threads` workers; output order equals input order.
std::vector<MaskedExample> mask_windows(std::span<const PackedSequence> windows,
                                        const MaskingConfig& cfg,
                                        const subword::Vocabulary& vocab, unsigned threads,
                                        MaskingCounters* counters = nullptr);

// Binary batch stream: magic "MBWWM001", u32 header length, header bytes
// (provenance text), then per record: u64 window index, u32 length n,
// n x i32 input ids, n x i32 target ids, n x u8 mask flags. Little-endian.
inline constexpr std::string_view kBatchMagic = "MBWWM001";
void write_batch_header(std::ostream& out, std::string_view header);
void write_record(std::ostream& out, const MaskedExample& example);
// Reads the header; returns it.
std::string read_batch_header(std::istream& in);
// False at clean end of stream; throws on truncation.
bool read_record(std::istream& in, MaskedExample& example);
// "index<TAB>inputs<TAB>targets<TAB>flags" with space-separated ids and a
// 0/1 flag string.
void write_debug_record(std::ostream& out, const MaskedExample& example);

enum class ModelPreset { kLitLat, kEstRoberta };

std::optional<ModelPreset> parse_model_preset(std::string_view name);

struct TrainManifest {
  std::string model;
  std::string architecture = "roberta-base-like, 12 layers, hidden 768";
  int layers = 12;
  int hidden_size = 768;
  std::string optimizer = "adam";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double dropout = 0.1;
  int epochs = 40;
  std::int64_t per_device_batch_tokens = 20480;
  std::int64_t grad_accum_steps = 32;
  std::int64_t devices = 4;
  std::int64_t effective_batch_tokens = 0;
  std::int64_t seq_len = 512;
  std::int64_t vocab_size = 0;
  double mask_prob = 0.15;
  bool whole_word_masking = true;
  std::string training_toolkit = "fairseq";

  std::int64_t expected_effective_batch_tokens() const {
    return per_device_batch_tokens * grad_accum_steps * devices;
  }
  // JSON; unstated hyperparameters (learning rate, warmup, schedule) are
  // emitted as null.
  std::string to_json() const;
};

TrainManifest emit_manifest(ModelPreset model);

enum class FinetuneTask { kNer, kPos, kDp };

struct FinetuneManifest {
  std::string task;
  int epochs = 0;
  int batch_size = 0;
  std::string head;
  std::string to_json() const;
};

FinetuneManifest emit_finetune_manifest(FinetuneTask task);

}  // namespace morphbert::mlmdata
