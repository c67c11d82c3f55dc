#pragma once

// Subword vocabulary induction (byte-pair-style merges over whitespace
// words with a fused word-begin marker) and encoding/decoding.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace morphbert::subword {

using PieceId = std::int32_t;

// U+2581 LOWER ONE EIGHTH BLOCK, as in sentencepiece.
inline constexpr std::string_view kWordBegin = "\xe2\x96\x81";

struct Piece {
  std::string text;
  PieceId id = 0;
  bool word_begin = false;

  friend bool operator==(const Piece&, const Piece&) = default;
};

struct SpecialIds {
  PieceId pad = 0;
  PieceId unk = 1;
  PieceId bos = 2;
  PieceId eos = 3;
  PieceId mask = 4;
};

// Ids 0..4 are the specials, id 5 is the bare word-begin marker (used only
// to open a word whose first character is unknown), learned pieces follow:
// first every single character seen in training, in both its word-initial
// ("▁c") and word-internal ("c") form, sorted bytewise; then merges in the
// order they were learned. target_size bounds the number of learned pieces.
class Vocabulary {
 public:
  static constexpr std::size_t kReservedCount = 6;
  static constexpr PieceId kBareMarker = 5;

  Vocabulary() = default;
  Vocabulary(std::vector<std::string> learned, std::size_t target_size);

  std::size_t size() const { return pieces_.size(); }
  std::size_t learned_count() const { return pieces_.size() - kReservedCount; }
  std::size_t target_size() const { return target_size_; }
  const SpecialIds& specials() const { return specials_; }
  const Piece& piece(PieceId id) const;
  const std::vector<Piece>& pieces() const { return pieces_; }
  bool is_special(PieceId id) const { return id >= 0 && id < 5; }
  bool valid(PieceId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < pieces_.size();
  }
  // First id that is an ordinary (non-special, non-reserved) piece.
  PieceId first_learned() const { return static_cast<PieceId>(kReservedCount); }
  // -1 if absent.
  PieceId find(std::string_view text) const;

  // Text format: a JSON header line, then `piece<TAB>id<TAB>word_begin`.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.pieces_ == b.pieces_ && a.target_size_ == b.target_size_;
  }

 private:
  void index();

  std::vector<Piece> pieces_;
  std::unordered_map<std::string, PieceId> by_text_;
  SpecialIds specials_;
  std::size_t target_size_ = 0;
};

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { kBpe };

// Model presets for the dictionary sizes used by the released models.
inline constexpr std::size_t kLitLatTargetSize = 84000;
inline constexpr std::size_t kEstRobertaTargetSize = 40000;

// Number of base pieces (two forms per distinct character) for `sample`.
std::size_t character_inventory(std::span<const std::string> sample);

// Greedy merge induction. The most frequent adjacent pair is merged each
// round, ties broken by the lexicographically smallest (left, right) pair.
// Pairs whose halves differ in character class (word vs punctuation/symbol)
// are never merged. Stops at target_size learned pieces or when no pair is
// left. Throws VocabError if target_size is below the character inventory
// or the sample has no words.
Vocabulary train_vocab(std::span<const std::string> sample, std::size_t target_size,
                       Algorithm algorithm = Algorithm::kBpe);

struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  std::size_t size() const { return end - begin; }
  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

struct Encoding {
  std::vector<PieceId> ids;
  std::vector<WordSpan> word_spans;

  friend bool operator==(const Encoding&, const Encoding&) = default;
};

// Thread-safe: all methods are const and hold no caches.
class Encoder {
 public:
  explicit Encoder(const Vocabulary& vocab) : vocab_(&vocab) {}

  // Splits on whitespace; each word is segmented independently by repeatedly
  // joining the adjacent pair whose concatenation is the lowest-id piece.
  Encoding encode(std::string_view text) const;
  // Piece ids for one word (no whitespace inside).
  std::vector<PieceId> encode_word(std::string_view word) const;

  // Word-begin markers become spaces; the leading space is dropped. UNK
  // renders as "<unk>", MASK as "<mask>"; PAD, BOS and EOS render as
  // nothing. Throws VocabError on an id outside the vocabulary.
  std::string decode(std::span<const PieceId> ids) const;

  const Vocabulary& vocab() const { return *vocab_; }

 private:
  const Vocabulary* vocab_;
};

// Mean pieces per word over `lines`. Throws VocabError if there are no words.
double fertility(std::span<const std::string> lines, const Encoder& encoder);

}  // namespace morphbert::subword
