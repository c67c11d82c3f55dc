#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "morphbert/common/rng.hpp"
#include "morphbert/corpus.hpp"
#include "support.hpp"

using namespace morphbert;
using namespace morphbert::corpus;

namespace {

std::vector<std::string> texts(const std::vector<SentenceLine>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) out.push_back(l.text);
  return out;
}

std::vector<std::string> split_doc(const std::string& text, std::string_view lang = "en") {
  return texts(normalize({"d", std::string(lang), text}, RuleBasedSplitter::for_language(lang)));
}

std::vector<SentenceLine> lines_of(std::initializer_list<const char*> items,
                                   const std::string& lang = "et") {
  std::vector<SentenceLine> out;
  for (const char* t : items) out.push_back(make_line(lang, t));
  return out;
}

using Texts = std::vector<std::string>;

}  // namespace

TEST(Normalize, SplitsOnTerminalPunctuation) {
  EXPECT_EQ(split_doc("A. B? C!"), (Texts{"A.", "B?", "C!"}));
  EXPECT_EQ(split_doc(""), Texts{});
  EXPECT_EQ(split_doc("One  sentence"), Texts{"One sentence"});
  EXPECT_EQ(split_doc("  \n\t "), Texts{});
}

TEST(Normalize, SplitterRules) {
  EXPECT_EQ(split_doc("He said \"Stop!\" Then left."), (Texts{"He said \"Stop!\"", "Then left."}));
  EXPECT_EQ(split_doc("Wait... What?!"), (Texts{"Wait...", "What?!"}));
  EXPECT_EQ(split_doc("Dr. Smith arrived. He sat."), (Texts{"Dr. Smith arrived.", "He sat."}));
  EXPECT_EQ(split_doc("It was 3.5 m. long"), Texts{"It was 3.5 m. long"});
  EXPECT_EQ(split_doc("Version 2.0 shipped"), Texts{"Version 2.0 shipped"});
  EXPECT_EQ(split_doc("first line\n\nsecond line"), (Texts{"first line", "second line"}));
  EXPECT_EQ(split_doc("one\nsentence"), Texts{"one sentence"});
  EXPECT_EQ(split_doc("Pvz. Jonas atėjo. Jis sėdo.", "lt"),
            (Texts{"Pvz. Jonas atėjo.", "Jis sėdo."}));
  EXPECT_EQ(split_doc("Dr. Smith arrived.", "xx"), (Texts{"Dr.", "Smith arrived."}));
}

TEST(Normalize, CustomAbbreviationFile) {
  testkit::TempDir dir("abbr");
  testkit::write_text(dir / "abbr.txt", "# comment\n\nHr.\n");
  const auto splitter = RuleBasedSplitter::from_file(dir / "abbr.txt");
  EXPECT_EQ(texts(normalize({"d", "et", "Hr. Tamm tuli. Ta istus."}, splitter)),
            (Texts{"Hr. Tamm tuli.", "Ta istus."}));
}

TEST(Normalize, NfcAndHashing) {
  const auto lines = normalize({"d", "lv", "Cafe\xcc\x81 ir\xc2\xa0 te."}, RuleBasedSplitter{});
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_EQ(lines[0].text, "Caf\xc3\xa9 ir te.");
  EXPECT_EQ(lines[0].language, "lv");
  EXPECT_EQ(lines[0].content_hash, content_hash(lines[0].text));
  EXPECT_EQ(make_line("lv", "Caf\xc3\xa9 ir te."), lines[0]);
  EXPECT_NE(content_hash("a"), content_hash("b"));
  for (const auto& l : split_doc("A. B? C!\n\nD e f. G")) {
    EXPECT_EQ(l.find('\n'), std::string::npos);
    EXPECT_FALSE(l.empty());
  }
}

TEST(Normalize, InvalidUtf8NamesOffset) {
  const std::string text = std::string("ok t\xc3\xa9xt ") + "\xff" + " tail";
  try {
    normalize({"doc-7", "et", text}, RuleBasedSplitter{});
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.byte_offset(), 9u);
    EXPECT_EQ(e.doc_id(), "doc-7");
    EXPECT_NE(std::string(e.what()).find('9'), std::string::npos);
  }
  EXPECT_THROW(normalize({"d", "et", "\xc0\xaf"}, RuleBasedSplitter{}), IngestionError);
  EXPECT_THROW(normalize({"d", "et", "\xed\xa0\x80"}, RuleBasedSplitter{}), IngestionError);
}

TEST(Dedup, Examples) {
  EXPECT_EQ(texts(deduplicate(lines_of({"a", "b", "a"}))), (Texts{"a", "b"}));
  const auto unique = lines_of({"c", "a", "b"});
  EXPECT_EQ(deduplicate(unique), unique);

  Deduplicator d;
  const auto kept = d.run(lines_of({"x", "x", "x"}));
  EXPECT_EQ(texts(kept), Texts{"x"});
  const auto& c = d.counts().at("et");
  EXPECT_EQ(c.input_lines, 3u);
  EXPECT_EQ(c.removed_lines, 2u);
  const auto s = stats(kept, d.counts());
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].duplicate_ratio, 2.0 / 3.0);
}

TEST(Dedup, LanguagesAreSeparateAndCollisionsConfirmed) {
  std::vector<SentenceLine> in = {make_line("et", "a"), make_line("lv", "a")};
  EXPECT_EQ(deduplicate(in).size(), 2u);

  // Same forced digest, different text: both survive.
  SentenceLine p = make_line("et", "p");
  SentenceLine q = make_line("et", "q");
  q.content_hash = p.content_hash;
  std::vector<SentenceLine> forced = {p, q, p};
  EXPECT_EQ(texts(deduplicate(forced)), (Texts{"p", "q"}));
}

TEST(Dedup, IdempotentAndShardIndependent) {
  Rng rng(17);
  std::vector<SentenceLine> all;
  for (int i = 0; i < 3000; ++i) {
    const char* lang = rng.below(2) ? "lt" : "lv";
    all.push_back(make_line(lang, "s" + std::to_string(rng.below(700))));
  }
  std::map<std::string, DedupCounts> counts_single;
  Deduplicator single;
  const auto once = single.run(all);
  EXPECT_EQ(deduplicate(once), once);

  for (const std::size_t shards : {1u, 2u, 7u, 50u}) {
    std::vector<std::vector<SentenceLine>> parts(shards);
    std::size_t at = 0;
    for (std::size_t s = 0; s < shards; ++s) {
      const std::size_t take = s + 1 == shards ? all.size() - at : rng.below(all.size() - at + 1);
      parts[s].assign(all.begin() + at, all.begin() + at + take);
      at += take;
    }
    for (const unsigned threads : {1u, 4u}) {
      std::map<std::string, DedupCounts> counts;
      EXPECT_EQ(deduplicate_sharded(parts, threads, &counts), once);
      for (const auto& [lang, c] : single.counts()) {
        EXPECT_EQ(counts[lang].input_lines, c.input_lines);
        EXPECT_EQ(counts[lang].removed_lines, c.removed_lines);
      }
    }
  }
}

TEST(Stats, Counts) {
  const auto s = stats(lines_of({"a b", "c"}, "lt"));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], (CorpusStats{"lt", 3, 2, 0.0}));
  EXPECT_TRUE(stats(std::vector<SentenceLine>{}).empty());

  std::ostringstream csv;
  const std::vector<CorpusStats> rows = {{"lt", 3, 2, 0.25}, {"lv", 0, 0, 0}};
  write_stats_csv(csv, rows);
  EXPECT_EQ(csv.str(), "language,token_count,sentence_count,duplicate_ratio\nlt,3,2,0.25\nlv,0,0,0\n");
}

TEST(Stats, PermutationStable) {
  Rng rng(4);
  std::vector<Document> docs;
  for (int i = 0; i < 40; ++i) {
    std::string text;
    for (int s = 0; s < 5; ++s) {
      text += "Word" + std::to_string(rng.below(30)) + " x" + std::to_string(rng.below(3)) + ". ";
    }
    docs.push_back({"d" + std::to_string(i), i % 3 ? "et" : "lv", text});
  }
  auto run = [](const std::vector<Document>& ds) {
    std::vector<SentenceLine> lines;
    for (const auto& d : ds) {
      for (auto& l : normalize(d, RuleBasedSplitter{})) lines.push_back(std::move(l));
    }
    Deduplicator dd;
    const auto kept = dd.run(lines);
    return stats(kept, dd.counts());
  };
  const auto base = run(docs);
  for (int round = 0; round < 5; ++round) {
    for (std::size_t i = docs.size(); i > 1; --i) std::swap(docs[i - 1], docs[rng.below(i)]);
    const auto again = run(docs);
    ASSERT_EQ(again.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(again[i].token_count, base[i].token_count);
      EXPECT_EQ(again[i].sentence_count, base[i].sentence_count);
    }
  }
}

TEST(Manifest, LoadsAndPassesReportedCountsThrough) {
  testkit::TempDir dir("manifest");
  testkit::write_text(dir / "m.json", R"({
    "name": "est",
    "languages": ["et"],
    "documents": [{"path": "a.txt", "language": "et", "source": "Ekspress"},
                  {"path": "/abs/b.txt", "language": "et"}],
    "reported_tokens": {"et": 2.51e9}
  })");
  const CorpusManifest m = load_manifest(dir / "m.json");
  EXPECT_EQ(m.name, "est");
  ASSERT_EQ(m.documents.size(), 2u);
  EXPECT_EQ(m.documents[0].path, dir / "a.txt");
  EXPECT_EQ(m.documents[0].source, "Ekspress");
  EXPECT_EQ(m.documents[1].path, std::filesystem::path("/abs/b.txt"));
  EXPECT_EQ(m.reported_tokens.at("et"), 2.51e9);

  testkit::write_text(dir / "bad.json",
                      R"({"languages": ["et"], "documents": [{"path": "a", "language": "fi"}]})");
  EXPECT_THROW(load_manifest(dir / "bad.json"), std::runtime_error);
}

TEST(Sample, EqualPartQuotas) {
  EXPECT_EQ(equal_part_quotas(9, 3), (std::vector<std::size_t>{3, 3, 3}));
  EXPECT_EQ(equal_part_quotas(10, 3), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(equal_part_quotas(11, 3), (std::vector<std::size_t>{4, 4, 3}));
  EXPECT_EQ(equal_part_quotas(2, 3), (std::vector<std::size_t>{1, 1, 0}));
  for (std::size_t total = 0; total < 60; ++total) {
    for (std::size_t l = 1; l < 7; ++l) {
      const auto q = equal_part_quotas(total, l);
      const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
      EXPECT_LE(*hi - *lo, 1u);
      std::size_t sum = 0;
      for (auto x : q) sum += x;
      EXPECT_EQ(sum, total);
    }
  }
}

namespace {

std::vector<LanguageLines> three_corpora() {
  std::vector<LanguageLines> c;
  for (const auto& [lang, n] : std::vector<std::pair<std::string, int>>{{"lt", 40}, {"lv", 25}, {"en", 60}}) {
    LanguageLines l{lang, {}};
    for (int i = 0; i < n; ++i) l.lines.push_back(make_line(lang, lang + " line " + std::to_string(i)));
    c.push_back(std::move(l));
  }
  return c;
}

}  // namespace

TEST(Sample, EqualPartsCountsAndOrder) {
  const auto corpora = three_corpora();
  const auto s = sample_for_vocab(corpora, 10, SamplePolicy::kEqualParts, 1);
  std::map<std::string, int> per;
  for (const auto& l : s) ++per[l.language];
  EXPECT_EQ(per["lt"], 4);
  EXPECT_EQ(per["lv"], 3);
  EXPECT_EQ(per["en"], 3);
  EXPECT_EQ(s.front().language, "lt");
  EXPECT_EQ(s.back().language, "en");

  try {
    sample_for_vocab(corpora, 90, SamplePolicy::kEqualParts, 1);
    FAIL() << "expected a shortfall";
  } catch (const ShortfallError& e) {
    EXPECT_EQ(e.language(), "lv");
  }
  EXPECT_THROW(sample_for_vocab(corpora, 126, SamplePolicy::kRandom, 1), ShortfallError);
  EXPECT_EQ(sample_for_vocab(corpora, 125, SamplePolicy::kRandom, 1).size(), 125u);
}

TEST(Sample, RandomIsSeededAndWithoutReplacement) {
  const auto corpora = three_corpora();
  const auto a = sample_for_vocab(corpora, 30, SamplePolicy::kRandom, 42);
  const auto b = sample_for_vocab(corpora, 30, SamplePolicy::kRandom, 42);
  const auto c = sample_for_vocab(corpora, 30, SamplePolicy::kRandom, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::set<std::string> distinct;
  for (const auto& l : a) distinct.insert(l.text);
  EXPECT_EQ(distinct.size(), 30u);
}

TEST(Sample, FilesMatchInMemory) {
  testkit::TempDir dir("sample");
  const auto corpora = three_corpora();
  std::vector<LanguageFile> files;
  for (const auto& c : corpora) {
    std::ofstream out(dir / (c.language + ".txt"));
    out << "# provenance: test\n";
    for (const auto& l : c.lines) out << l.text << "\n\n";
    files.push_back({c.language, dir / (c.language + ".txt")});
  }
  for (const auto policy : {SamplePolicy::kRandom, SamplePolicy::kEqualParts}) {
    for (const std::uint64_t seed : {0u, 5u, 99u}) {
      for (const std::size_t total : {0u, 1u, 10u, 60u, 75u}) {
        EXPECT_EQ(sample_files_for_vocab(files, total, policy, seed),
                  sample_for_vocab(corpora, total, policy, seed));
      }
    }
  }
}

TEST(Reservoir, UniformInclusion) {
  const int trials = 20000;
  std::vector<int> hits(10);
  for (int t = 0; t < trials; ++t) {
    Reservoir r(3, mix_seed(7, t));
    for (std::uint64_t k = 0; k < 10; ++k) r.offer(k);
    const auto kept = r.positions();
    ASSERT_EQ(kept.size(), 3u);
    ASSERT_TRUE(std::is_sorted(kept.begin(), kept.end()));
    for (auto k : kept) ++hits[k];
  }
  for (int h : hits) EXPECT_NEAR(h / double(trials), 0.3, 0.015);

  Reservoir small(5, 1);
  small.offer(0);
  small.offer(1);
  EXPECT_EQ(small.positions(), (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(small.seen(), 2u);
}
