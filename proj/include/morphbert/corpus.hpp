#pragma once

// Corpus preparation: normalization to one sentence per line, exact
// deduplication, per-language statistics and vocabulary-sample drawing.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "morphbert/common/rng.hpp"

namespace morphbert::corpus {

struct Document {
  std::string doc_id;
  std::string language;  // ISO 639-1
  std::string text;
};

struct SentenceLine {
  std::string language;
  std::string text;
  std::uint64_t content_hash = 0;

  friend bool operator==(const SentenceLine&, const SentenceLine&) = default;
};

// Digest of already-normalized sentence text.
std::uint64_t content_hash(std::string_view normalized_text);

SentenceLine make_line(std::string language, std::string text);

class IngestionError : public std::runtime_error {
 public:
  IngestionError(std::string doc_id, std::size_t byte_offset);
  const std::string& doc_id() const { return doc_id_; }
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::string doc_id_;
  std::size_t byte_offset_;
};

class SentenceSplitter {
 public:
  virtual ~SentenceSplitter() = default;
  // Input is NFC text; output pieces are raw (whitespace not yet collapsed).
  virtual std::vector<std::string> split(std::string_view text) const = 0;
};

// Splits after runs of terminal punctuation (. ? ! … and closing quotes or
// brackets that follow them) when followed by whitespace or end of text.
// A blank line is always a boundary. A single '.' does not end a sentence
// when its token is in the abbreviation list (exact match, or case-folded
// match for entries longer than two bytes) or when the next word starts
// lowercase.
class RuleBasedSplitter : public SentenceSplitter {
 public:
  RuleBasedSplitter() = default;
  explicit RuleBasedSplitter(std::set<std::string> abbreviations)
      : abbreviations_(std::move(abbreviations)) {}

  // Built-in abbreviation list for et, lv, lt, en; empty for other codes.
  static RuleBasedSplitter for_language(std::string_view language);
  // One abbreviation per line; '#' comments and blank lines ignored.
  static RuleBasedSplitter from_file(const std::filesystem::path& path);

  std::vector<std::string> split(std::string_view text) const override;

 private:
  std::set<std::string> abbreviations_;  // NFC, with the final '.'
};

// Validates UTF-8, NFC-normalizes, splits and collapses whitespace. Empty
// sentences are dropped; order is preserved.
std::vector<SentenceLine> normalize(const Document& raw, const SentenceSplitter& splitter);

// Per-language counters maintained by the deduplicator.
struct DedupCounts {
  std::uint64_t input_lines = 0;
  std::uint64_t removed_lines = 0;
};

// Streaming exact deduplication. The seen-set is keyed by language, then by
// content hash; hash matches are confirmed by full string comparison.
class Deduplicator {
 public:
  // True if the line is the first occurrence and should be kept.
  bool admit(const SentenceLine& line);

  std::vector<SentenceLine> run(std::span<const SentenceLine> lines);

  const std::map<std::string, DedupCounts>& counts() const { return counts_; }
  std::size_t unique_lines() const { return unique_; }

 private:
  using Bucket = std::vector<std::string>;
  std::unordered_map<std::string, std::unordered_map<std::uint64_t, Bucket>> seen_;
  std::map<std::string, DedupCounts> counts_;
  std::size_t unique_ = 0;
};

std::vector<SentenceLine> deduplicate(std::span<const SentenceLine> lines);

// Dedups each shard locally (in parallel, up to `threads` workers), then
// runs a sequential merge pass across shards in shard order. The result is
// identical to deduplicating the concatenation of all shards.
std::vector<SentenceLine> deduplicate_sharded(
    const std::vector<std::vector<SentenceLine>>& shards, unsigned threads,
    std::map<std::string, DedupCounts>* counts = nullptr);

struct CorpusStats {
  std::string language;
  std::uint64_t token_count = 0;
  std::uint64_t sentence_count = 0;
  double duplicate_ratio = 0.0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

class StatsAccumulator {
 public:
  void add(const SentenceLine& line);
  // duplicate_ratio comes from `dedup`; languages absent there get 0.
  std::vector<CorpusStats> finish(const std::map<std::string, DedupCounts>& dedup = {}) const;

 private:
  std::map<std::string, CorpusStats> per_language_;
};

std::vector<CorpusStats> stats(std::span<const SentenceLine> lines,
                               const std::map<std::string, DedupCounts>& dedup = {});

void write_stats_csv(std::ostream& out, std::span<const CorpusStats> rows);

// Input manifest (JSON):
//   {"name": "...", "languages": ["lt","lv","en"],
//    "documents": [{"path": "...", "language": "lt", "source": "..."}],
//    "reported_tokens": {"lt": 1.21e9}}
// Relative paths are resolved against the manifest's directory.
// "reported_tokens" carries published corpus sizes through unchanged.
struct ManifestEntry {
  std::filesystem::path path;
  std::string language;
  std::string source;
};

struct CorpusManifest {
  std::string name;
  std::vector<std::string> languages;
  std::vector<ManifestEntry> documents;
  std::map<std::string, double> reported_tokens;
};

CorpusManifest load_manifest(const std::filesystem::path& path);

enum class SamplePolicy { kRandom, kEqualParts };

class ShortfallError : public std::runtime_error {
 public:
  ShortfallError(std::string language, std::size_t needed, std::size_t available);
  const std::string& language() const { return language_; }

 private:
  std::string language_;
};

// Lines of one language, in corpus order.
struct LanguageLines {
  std::string language;
  std::vector<SentenceLine> lines;
};

// Draws the subword-training sample. Languages are taken in the given order;
// under equal-parts the remainder of total/L goes one line each to the first
// languages. Output keeps corpus order (language order, then line order).
std::vector<SentenceLine> sample_for_vocab(std::span<const LanguageLines> corpora,
                                           std::size_t total_lines, SamplePolicy policy,
                                           std::uint64_t seed);

// One-sentence-per-line file of a single language.
struct LanguageFile {
  std::string language;
  std::filesystem::path path;
};

// Streaming form of sample_for_vocab over files: one pass to count lines,
// one to collect the chosen ones. Blank and provenance lines are skipped.
// Returns the same sample as sample_for_vocab on the files' contents.
std::vector<SentenceLine> sample_files_for_vocab(std::span<const LanguageFile> files,
                                                 std::size_t total_lines, SamplePolicy policy,
                                                 std::uint64_t seed);

// Per-language quotas used by the equal-parts policy.
std::vector<std::size_t> equal_part_quotas(std::size_t total_lines, std::size_t languages);

// Reservoir sampler (uniform without replacement over a stream of unknown
// length). Used by sample_for_vocab and by streaming callers.
class Reservoir {
 public:
  Reservoir(std::size_t capacity, std::uint64_t seed);
  void offer(std::uint64_t position);
  std::size_t seen() const { return seen_; }
  // Positions kept, ascending.
  std::vector<std::uint64_t> positions() const;

 private:
  std::size_t capacity_;
  std::size_t seen_ = 0;
  std::vector<std::uint64_t> kept_;
  Rng rng_;
};

}  // namespace morphbert::corpus
