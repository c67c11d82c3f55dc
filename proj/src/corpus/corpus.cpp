#include "morphbert/corpus.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "morphbert/common/format.hpp"
#include "morphbert/common/hash.hpp"
#include "morphbert/common/text_io.hpp"
#include "morphbert/common/utf8.hpp"

namespace morphbert::corpus {

std::uint64_t content_hash(std::string_view normalized_text) {
  return fnv1a64(normalized_text);
}

SentenceLine make_line(std::string language, std::string text) {
  SentenceLine line{std::move(language), std::move(text), 0};
  line.content_hash = content_hash(line.text);
  return line;
}

IngestionError::IngestionError(std::string doc_id, std::size_t byte_offset)
    : std::runtime_error("invalid UTF-8 in document '" + doc_id + "' at byte offset " +
                         std::to_string(byte_offset)),
      doc_id_(std::move(doc_id)),
      byte_offset_(byte_offset) {}

// ---------------------------------------------------------------------------
// Sentence splitting

namespace {

bool is_terminal(char32_t cp) {
  return cp == '.' || cp == '?' || cp == '!' || cp == 0x2026;  // …
}

bool is_closer(char32_t cp) {
  switch (cp) {
    case '"':
    case '\'':
    case ')':
    case ']':
    case 0x00bb:  // »
    case 0x2019:  // ’
    case 0x201d:  // ”
    case 0x201c:  // “ (closing quote in lt/lv typography)
      return true;
    default:
      return false;
  }
}

bool starts_lowercase(std::string_view text) {
  for (std::string_view cp : utf8::code_points(text)) {
    const char32_t c = utf8::decode(cp);
    if (utf8::is_space(c)) continue;
    return utf8::is_lower(c);
  }
  return false;
}

const std::map<std::string, std::vector<std::string>, std::less<>>& builtin_abbreviations() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> kLists = {
      {"en", {"mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "vs.", "etc.", "e.g.", "i.e.",
              "jr.", "sr.", "no.", "fig.", "inc.", "ltd.", "co.", "approx."}},
      {"et", {"nt.", "jne.", "jm.", "vt.", "dr.", "prof.", "hr.", "pr.", "lk.", "nr.", "jt.",
              "s.t.", "st.", "tn.", "mnt.", "v.a.", "k.a.", "u.", "a."}},
      {"lv", {"piem.", "u.c.", "utt.", "t.i.", "t.sk.", "sk.", "prof.", "dr.", "g.", "nr.",
              "pl.", "v.", "k.", "u.tml."}},
      {"lt", {"pvz.", "t.y.", "kt.", "prof.", "dr.", "m.", "a.", "gim.", "str.", "p.", "nr.",
              "tel.", "žr.", "t.t.", "doc.", "val."}},
  };
  return kLists;
}

}  // namespace

RuleBasedSplitter RuleBasedSplitter::for_language(std::string_view language) {
  const auto& lists = builtin_abbreviations();
  const auto it = lists.find(language);
  if (it == lists.end()) return RuleBasedSplitter{};
  return RuleBasedSplitter(std::set<std::string>(it->second.begin(), it->second.end()));
}

RuleBasedSplitter RuleBasedSplitter::from_file(const std::filesystem::path& path) {
  std::set<std::string> abbreviations;
  LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    std::string entry = utf8::collapse_whitespace(line);
    if (entry.empty() || entry.front() == '#') continue;
    abbreviations.insert(utf8::nfc(entry));
  }
  return RuleBasedSplitter(std::move(abbreviations));
}

std::vector<std::string> RuleBasedSplitter::split(std::string_view text) const {
  std::vector<std::string> out;
  const auto cps = utf8::code_points(text);
  std::size_t sentence_start = 0;
  std::size_t offset = 0;
  auto emit = [&](std::size_t end) {
    if (end > sentence_start) out.emplace_back(text.substr(sentence_start, end - sentence_start));
    sentence_start = end;
  };

  for (std::size_t i = 0; i < cps.size();) {
    const char32_t c = utf8::decode(cps[i]);

    // Blank line: newline, optional horizontal space, newline.
    if (c == '\n') {
      std::size_t j = i + 1;
      std::size_t end = offset + cps[i].size();
      while (j < cps.size() && utf8::is_space(utf8::decode(cps[j])) &&
             utf8::decode(cps[j]) != '\n') {
        end += cps[j].size();
        ++j;
      }
      if (j < cps.size() && utf8::decode(cps[j]) == '\n') {
        emit(offset);
        sentence_start = end + cps[j].size();
        offset = sentence_start;
        i = j + 1;
        continue;
      }
    }

    if (!is_terminal(c)) {
      offset += cps[i].size();
      ++i;
      continue;
    }

    // Consume the terminal run and any closing quotes/brackets.
    const std::size_t run_start = offset;
    std::size_t j = i;
    std::size_t end = offset;
    bool only_period = true;
    while (j < cps.size() && is_terminal(utf8::decode(cps[j]))) {
      only_period = only_period && utf8::decode(cps[j]) == '.' && j == i;
      end += cps[j].size();
      ++j;
    }
    while (j < cps.size() && is_closer(utf8::decode(cps[j]))) {
      end += cps[j].size();
      ++j;
    }
    const bool at_boundary = j == cps.size() || utf8::is_space(utf8::decode(cps[j]));
    bool split_here = at_boundary;

    if (split_here && only_period && !abbreviations_.empty()) {
      std::size_t token_start = text.rfind(' ', run_start);
      const std::size_t nl = text.rfind('\n', run_start);
      if (token_start == std::string_view::npos ||
          (nl != std::string_view::npos && nl > token_start)) {
        token_start = nl;
      }
      token_start = token_start == std::string_view::npos ? 0 : token_start + 1;
      token_start = std::max(token_start, sentence_start);
      const std::string token(text.substr(token_start, run_start + 1 - token_start));
      if (abbreviations_.contains(token) ||
          (token.size() > 2 && abbreviations_.contains(utf8::casefold(token)))) {
        split_here = false;
      }
    }
    if (split_here && j < cps.size() && only_period) {
      // "1. mail", "nt. kui": a following lowercase word continues the sentence.
      if (starts_lowercase(text.substr(end))) split_here = false;
    }
    if (split_here) emit(end);
    offset = end;
    i = j;
  }
  emit(text.size());
  return out;
}

std::vector<SentenceLine> normalize(const Document& raw, const SentenceSplitter& splitter) {
  if (const auto bad = utf8::first_invalid(raw.text)) {
    throw IngestionError(raw.doc_id, *bad);
  }
  std::vector<SentenceLine> lines;
  if (raw.text.empty()) return lines;
  const std::string text = utf8::nfc(raw.text);
  for (const std::string& piece : splitter.split(text)) {
    std::string sentence = utf8::collapse_whitespace(piece);
    if (sentence.empty()) continue;
    lines.push_back(make_line(raw.language, std::move(sentence)));
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Deduplication

bool Deduplicator::admit(const SentenceLine& line) {
  auto& counts = counts_[line.language];
  ++counts.input_lines;
  Bucket& bucket = seen_[line.language][line.content_hash];
  if (std::find(bucket.begin(), bucket.end(), line.text) != bucket.end()) {
    ++counts.removed_lines;
    return false;
  }
  bucket.push_back(line.text);
  ++unique_;
  return true;
}

std::vector<SentenceLine> Deduplicator::run(std::span<const SentenceLine> lines) {
  std::vector<SentenceLine> kept;
  for (const SentenceLine& line : lines) {
    if (admit(line)) kept.push_back(line);
  }
  return kept;
}

std::vector<SentenceLine> deduplicate(std::span<const SentenceLine> lines) {
  Deduplicator dedup;
  return dedup.run(lines);
}

std::vector<SentenceLine> deduplicate_sharded(const std::vector<std::vector<SentenceLine>>& shards,
                                              unsigned threads,
                                              std::map<std::string, DedupCounts>* counts) {
  std::vector<std::vector<SentenceLine>> local(shards.size());
  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(shards.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < shards.size(); s += workers) {
          local[s] = deduplicate(shards[s]);
        }
      });
    }
  }

  Deduplicator merger;
  std::vector<SentenceLine> out;
  for (const auto& shard : local) {
    for (const SentenceLine& line : shard) {
      if (merger.admit(line)) out.push_back(line);
    }
  }

  if (counts != nullptr) {
    counts->clear();
    for (const auto& shard : shards) {
      for (const SentenceLine& line : shard) ++(*counts)[line.language].input_lines;
    }
    std::map<std::string, std::uint64_t> survivors;
    for (const SentenceLine& line : out) ++survivors[line.language];
    for (auto& [language, c] : *counts) c.removed_lines = c.input_lines - survivors[language];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

void StatsAccumulator::add(const SentenceLine& line) {
  CorpusStats& s = per_language_[line.language];
  s.language = line.language;
  s.token_count += utf8::split_words(line.text).size();
  ++s.sentence_count;
}

std::vector<CorpusStats> StatsAccumulator::finish(
    const std::map<std::string, DedupCounts>& dedup) const {
  std::map<std::string, CorpusStats> merged = per_language_;
  for (const auto& [language, counts] : dedup) {
    CorpusStats& s = merged[language];
    s.language = language;
    s.duplicate_ratio = counts.input_lines == 0
                            ? 0.0
                            : static_cast<double>(counts.removed_lines) /
                                  static_cast<double>(counts.input_lines);
  }
  std::vector<CorpusStats> rows;
  rows.reserve(merged.size());
  for (auto& [language, s] : merged) rows.push_back(s);
  return rows;
}

std::vector<CorpusStats> stats(std::span<const SentenceLine> lines,
                               const std::map<std::string, DedupCounts>& dedup) {
  StatsAccumulator acc;
  for (const SentenceLine& line : lines) acc.add(line);
  return acc.finish(dedup);
}

void write_stats_csv(std::ostream& out, std::span<const CorpusStats> rows) {
  out << "language,token_count,sentence_count,duplicate_ratio\n";
  for (const CorpusStats& s : rows) {
    out << s.language << ',' << s.token_count << ',' << s.sentence_count << ','
        << format_double(s.duplicate_ratio) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Manifest

CorpusManifest load_manifest(const std::filesystem::path& path) {
  const auto doc = nlohmann::json::parse(read_file(path));
  CorpusManifest manifest;
  manifest.name = doc.value("name", std::string{});
  if (doc.contains("languages")) {
    manifest.languages = doc.at("languages").get<std::vector<std::string>>();
  }
  const auto base = path.parent_path();
  for (const auto& entry : doc.at("documents")) {
    ManifestEntry e;
    e.path = entry.at("path").get<std::string>();
    if (e.path.is_relative()) e.path = base / e.path;
    e.language = entry.at("language").get<std::string>();
    e.source = entry.value("source", std::string{});
    if (!manifest.languages.empty() &&
        std::find(manifest.languages.begin(), manifest.languages.end(), e.language) ==
            manifest.languages.end()) {
      throw std::runtime_error("manifest document " + e.path.string() + " has language '" +
                               e.language + "' not among the configured languages");
    }
    manifest.documents.push_back(std::move(e));
  }
  if (doc.contains("reported_tokens")) {
    for (const auto& [language, count] : doc.at("reported_tokens").items()) {
      manifest.reported_tokens[language] = count.get<double>();
    }
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Vocabulary sampling

ShortfallError::ShortfallError(std::string language, std::size_t needed, std::size_t available)
    : std::runtime_error("not enough lines for language '" + language + "': need " +
                         std::to_string(needed) + ", have " + std::to_string(available)),
      language_(std::move(language)) {}

Reservoir::Reservoir(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  kept_.reserve(capacity);
}

void Reservoir::offer(std::uint64_t position) {
  if (seen_ < capacity_) {
    kept_.push_back(position);
  } else if (capacity_ > 0) {
    const std::uint64_t j = rng_.below(seen_ + 1);
    if (j < capacity_) kept_[j] = position;
  }
  ++seen_;
}

std::vector<std::uint64_t> Reservoir::positions() const {
  std::vector<std::uint64_t> out = kept_;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> equal_part_quotas(std::size_t total_lines, std::size_t languages) {
  std::vector<std::size_t> quotas(languages, languages == 0 ? 0 : total_lines / languages);
  for (std::size_t i = 0; i < languages && i < total_lines % languages; ++i) ++quotas[i];
  return quotas;
}

std::vector<SentenceLine> sample_for_vocab(std::span<const LanguageLines> corpora,
                                           std::size_t total_lines, SamplePolicy policy,
                                           std::uint64_t seed) {
  std::vector<SentenceLine> sample;
  if (corpora.empty()) {
    if (total_lines > 0) throw ShortfallError("*", total_lines, 0);
    return sample;
  }
  if (policy == SamplePolicy::kEqualParts) {
    const auto quotas = equal_part_quotas(total_lines, corpora.size());
    for (std::size_t i = 0; i < corpora.size(); ++i) {
      const auto& lines = corpora[i].lines;
      if (quotas[i] > lines.size()) {
        throw ShortfallError(corpora[i].language, quotas[i], lines.size());
      }
      Reservoir reservoir(quotas[i], mix_seed(seed, i));
      for (std::size_t k = 0; k < lines.size(); ++k) reservoir.offer(k);
      for (const std::uint64_t k : reservoir.positions()) sample.push_back(lines[k]);
    }
    return sample;
  }

  std::size_t available = 0;
  for (const auto& c : corpora) available += c.lines.size();
  if (total_lines > available) throw ShortfallError("*", total_lines, available);
  Reservoir reservoir(total_lines, mix_seed(seed, corpora.size()));
  for (std::size_t k = 0; k < available; ++k) reservoir.offer(k);
  std::size_t corpus = 0;
  std::size_t base = 0;
  for (const std::uint64_t k : reservoir.positions()) {
    while (k >= base + corpora[corpus].lines.size()) base += corpora[corpus++].lines.size();
    sample.push_back(corpora[corpus].lines[k - base]);
  }
  return sample;
}

namespace {

bool is_content_line(const std::string& line) {
  return !line.empty() && !is_provenance_line(line);
}

std::size_t count_lines(const std::filesystem::path& path) {
  LineReader reader(path);
  std::string line;
  std::size_t n = 0;
  while (reader.next(line)) n += is_content_line(line);
  return n;
}

// Appends the lines of `file` whose content-line index, offset by `base`,
// is listed in `wanted` (ascending) starting at `*cursor`.
void collect(const LanguageFile& file, std::uint64_t base, const std::vector<std::uint64_t>& wanted,
             std::size_t* cursor, std::vector<SentenceLine>& out) {
  LineReader reader(file.path);
  std::string line;
  std::uint64_t k = base;
  while (*cursor < wanted.size() && reader.next(line)) {
    if (!is_content_line(line)) continue;
    if (k == wanted[*cursor]) {
      out.push_back(make_line(file.language, line));
      ++*cursor;
    }
    ++k;
  }
}

}  // namespace

std::vector<SentenceLine> sample_files_for_vocab(std::span<const LanguageFile> files,
                                                 std::size_t total_lines, SamplePolicy policy,
                                                 std::uint64_t seed) {
  std::vector<SentenceLine> sample;
  if (files.empty()) {
    if (total_lines > 0) throw ShortfallError("*", total_lines, 0);
    return sample;
  }
  std::vector<std::size_t> counts;
  for (const LanguageFile& f : files) counts.push_back(count_lines(f.path));

  if (policy == SamplePolicy::kEqualParts) {
    const auto quotas = equal_part_quotas(total_lines, files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (quotas[i] > counts[i]) throw ShortfallError(files[i].language, quotas[i], counts[i]);
      Reservoir reservoir(quotas[i], mix_seed(seed, i));
      for (std::size_t k = 0; k < counts[i]; ++k) reservoir.offer(k);
      const auto wanted = reservoir.positions();
      std::size_t cursor = 0;
      collect(files[i], 0, wanted, &cursor, sample);
    }
    return sample;
  }

  const std::size_t available = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total_lines > available) throw ShortfallError("*", total_lines, available);
  Reservoir reservoir(total_lines, mix_seed(seed, files.size()));
  for (std::size_t k = 0; k < available; ++k) reservoir.offer(k);
  const auto wanted = reservoir.positions();
  std::size_t cursor = 0;
  std::uint64_t base = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    collect(files[i], base, wanted, &cursor, sample);
    base += counts[i];
  }
  return sample;
}

}  // namespace morphbert::corpus
