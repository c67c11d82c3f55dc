#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "morphbert/analogy.hpp"
#include "morphbert/common/utf8.hpp"
#include "oracles/scorers.hpp"
#include "support.hpp"

using namespace morphbert;
using namespace morphbert::analogy;

namespace {

const std::string kMarker = "\xe2\x96\x81";

// Both forms of every character in `texts`, then `merges` in order.
subword::Vocabulary manual_vocab(const std::vector<std::string>& texts,
                                 const std::vector<std::string>& merges) {
  std::set<std::string> chars;
  for (const auto& t : texts) {
    for (const auto cp : utf8::code_points(t)) {
      if (cp != " ") chars.insert(std::string(cp));
    }
  }
  std::vector<std::string> learned;
  for (const auto& c : chars) {
    learned.push_back(kMarker + c);
    learned.push_back(c);
  }
  std::sort(learned.begin(), learned.end());
  learned.insert(learned.end(), merges.begin(), merges.end());
  return subword::Vocabulary(learned, learned.size());
}

std::vector<PieceId> framed(const subword::Vocabulary& vocab, const subword::Encoder& enc,
                            const std::string& text) {
  std::vector<PieceId> ids = enc.encode(text).ids;
  ids.insert(ids.begin(), vocab.specials().bos);
  ids.push_back(vocab.specials().eos);
  return ids;
}

const std::vector<AnalogyEntry> kEntries = {
    {"capitals", "estonia", "tallinn", "latvia", "riga"},
    {"capitals", "latvia", "riga", "lithuania", "vilnius"},
    {"capitals", "lithuania", "vilnius", "estonia", "tallinn"},
    {"cities", "riga", "tartu", "vilnius", "kaunas"},
    {"cities", "tallinn", "kaunas", "riga", "tartu"},
};

std::vector<std::string> alphabet_texts() {
  return {std::string(kEnglishTemplate), "estonia tallinn latvia riga lithuania vilnius tartu kaunas"};
}

}  // namespace

TEST(Dataset, ParsesCategoriesAndEntries) {
  std::istringstream in(
      "# provenance: tool=x\n"
      ": capitals\n"
      "estonia tallinn latvia riga\n"
      "\n"
      "# comment\n"
      ":  plural nouns\n"
      "kass kassid koer koerad\n");
  const auto entries = read_dataset(in);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0], (AnalogyEntry{"capitals", "estonia", "tallinn", "latvia", "riga"}));
  EXPECT_EQ(entries[1].category, "plural nouns");
  EXPECT_EQ(entries[1].w4, "koerad");
}

TEST(Dataset, RejectsMalformedInput) {
  std::istringstream before("a b c d\n");
  EXPECT_THROW(read_dataset(before), DatasetError);
  std::istringstream three(": c\na b c\n");
  EXPECT_THROW(read_dataset(three), DatasetError);
  std::istringstream empty_cat(":\na b c d\n");
  EXPECT_THROW(read_dataset(empty_cat), DatasetError);
}

TEST(Templates, BuiltinAndValidation) {
  TemplateSet set = TemplateSet::builtin();
  EXPECT_EQ(set.get("en"), kEnglishTemplate);
  EXPECT_FALSE(set.contains("lt"));
  EXPECT_THROW(set.get("lt"), TemplateError);
  EXPECT_THROW(set.add("lt", "{w1} {w2} {w3}"), TemplateError);
  EXPECT_THROW(set.add("lt", "{w1} {w2} {w3} {w4} {w1}"), TemplateError);
  EXPECT_THROW(set.add("lt", "{w1} x{w2} {w3} {w4}"), TemplateError);
  set.add("lt", "Jei žodis {w1} atitinka žodį {w2}, tai žodis {w3} atitinka žodį {w4}.");
  EXPECT_TRUE(set.contains("lt"));
}

TEST(Templates, LoadFromFile) {
  testkit::TempDir dir("tmpl");
  testkit::write_text(dir / "t.tsv",
                      "# templates\n"
                      "et\tKui sõna {w1} vastab sõnale {w2}, siis sõna {w3} vastab sõnale {w4}.\n");
  const TemplateSet set = TemplateSet::load(dir / "t.tsv");
  EXPECT_TRUE(set.contains("et"));
  EXPECT_TRUE(set.contains("en"));
  testkit::write_text(dir / "bad.tsv", "et no tab here {w1} {w2} {w3} {w4}\n");
  EXPECT_THROW(TemplateSet::load(dir / "bad.tsv"), TemplateError);
}

TEST(Probe, SinglePieceWordGetsOneMask) {
  const auto vocab = manual_vocab(alphabet_texts(), {kMarker + "r" + "i", "ga", kMarker + "riga"});
  const subword::Encoder enc(vocab);
  ASSERT_EQ(enc.encode_word("riga").size(), 1u);
  const Probe p = build_probe(kEntries[1], enc, kEnglishTemplate);
  EXPECT_EQ(p.masked_word, "riga");
  EXPECT_EQ(p.mask_piece_count(), 1u);
  EXPECT_EQ(p.text,
            "If the word latvia corresponds to the word riga, then the word lithuania corresponds "
            "to the word vilnius.");
  EXPECT_EQ(p.ids[p.mask_positions[0]], vocab.specials().mask);
}

TEST(Probe, ThreePieceWordGetsThreeMasks) {
  const auto vocab = manual_vocab(alphabet_texts(), {kMarker + "ta", "tu"});
  const subword::Encoder enc(vocab);
  ASSERT_EQ(enc.encode_word("tartu").size(), 3u);
  const Probe p = build_probe(kEntries[3], enc, kEnglishTemplate);
  ASSERT_EQ(p.mask_piece_count(), 3u);
  EXPECT_EQ(p.mask_positions[1], p.mask_positions[0] + 1);
  EXPECT_EQ(p.mask_positions[2], p.mask_positions[0] + 2);
  for (const auto pos : p.mask_positions) EXPECT_EQ(p.ids[pos], vocab.specials().mask);
}

TEST(Probe, GoldPiecesReconstructSentence) {
  const std::vector<std::string> corpus = {std::string(kEnglishTemplate),
                                           "estonia tallinn latvia riga lithuania vilnius",
                                           "tartu kaunas riga tallinn"};
  const auto vocab = subword::train_vocab(corpus, 120);
  const subword::Encoder enc(vocab);
  for (const MaskSlot slot : {MaskSlot::kW2, MaskSlot::kW4}) {
    for (const auto& e : kEntries) {
      const Probe p = build_probe(e, enc, kEnglishTemplate, slot);
      EXPECT_EQ(p.masked_word, slot == MaskSlot::kW2 ? e.w2 : e.w4);
      EXPECT_EQ(p.gold_pieces, enc.encode_word(p.masked_word));
      std::vector<PieceId> ids = p.ids;
      for (std::size_t i = 0; i < p.mask_positions.size(); ++i) {
        ids[p.mask_positions[i]] = p.gold_pieces[i];
      }
      EXPECT_EQ(ids, framed(vocab, enc, p.text));
    }
  }
}

TEST(Predict, CountScorerRanksFrequentFollowerFirst) {
  std::vector<std::string> train;
  for (int i = 0; i < 5; ++i) train.push_back("the word tallinn is the word");
  train.push_back("the word riga");
  train.push_back(std::string(kEnglishTemplate));
  train.push_back("estonia latvia lithuania vilnius tartu kaunas");
  const auto vocab = subword::train_vocab(train, 400);
  const subword::Encoder enc(vocab);
  scorer::CountScorer model(vocab, train);
  const Probe p = build_probe(kEntries[0], enc, kEnglishTemplate);
  const auto preds = predict_word(p, model, enc);
  ASSERT_FALSE(preds.empty());
  EXPECT_EQ(preds[0].word, "tallinn");
}

TEST(Predict, SingleMaskIsRawTopFive) {
  const auto vocab = brute::toy_vocab_50();
  const subword::Encoder enc(vocab);
  brute::TableScorer model(vocab.size(), 8);
  const auto& sp = vocab.specials();
  Probe p;
  p.ids = {sp.bos, vocab.find(kMarker + "a"), sp.mask, vocab.find(kMarker + "b"), sp.eos};
  p.mask_positions = {2};
  const auto preds = predict_word(p, model, enc, {5, 10});
  const auto raw = model.score({1, p.ids, {2}, vocab.size()});
  std::vector<std::string> expected;
  for (const auto& c : raw.candidates[0]) {
    if (vocab.is_special(c.piece) || !vocab.piece(c.piece).word_begin) continue;
    const std::string w = enc.decode(std::vector<PieceId>{c.piece});
    if (w.empty()) continue;
    expected.push_back(w);
    if (expected.size() == 5) break;
  }
  std::vector<std::string> got;
  for (const auto& pr : preds) got.push_back(pr.word);
  EXPECT_EQ(got, expected);
}

TEST(Predict, FullWidthBeamEqualsExhaustive) {
  const auto vocab = brute::toy_vocab_50();
  ASSERT_EQ(vocab.size(), 50u);
  const subword::Encoder enc(vocab);
  const auto& sp = vocab.specials();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    brute::TableScorer model(vocab.size(), seed);
    Probe p;
    p.ids = {sp.bos, vocab.find(kMarker + "c"), sp.mask, sp.mask, vocab.find(kMarker + "d"), sp.eos};
    p.mask_positions = {2, 3};
    for (const std::size_t k : {1u, 5u, 20u}) {
      const auto beam = predict_word(p, model, enc, {k, vocab.size()});
      const auto exact = brute::exhaustive_two_masks(p, model, enc, k);
      ASSERT_EQ(beam.size(), exact.size());
      for (std::size_t i = 0; i < beam.size(); ++i) {
        EXPECT_EQ(beam[i].word, exact[i].word);
        EXPECT_EQ(beam[i].pieces, exact[i].pieces);
        EXPECT_NEAR(beam[i].score, exact[i].score, 1e-12);
      }
    }
  }
}

TEST(Predict, InvariantUnderPerMaskShift) {
  const auto vocab = brute::toy_vocab_50();
  const subword::Encoder enc(vocab);
  const auto& sp = vocab.specials();
  brute::TableScorer model(vocab.size(), 21);
  Probe p;
  p.ids = {sp.bos, vocab.find(kMarker + "e"), sp.mask, sp.mask, sp.mask, sp.eos};
  p.mask_positions = {2, 3, 4};
  const auto base = predict_word(p, model, enc, {5, 8});
  for (const std::size_t pos : p.mask_positions) {
    brute::ShiftScorer shifted(model, pos, -2.75);
    const auto moved = predict_word(p, shifted, enc, {5, 8});
    ASSERT_EQ(moved.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(moved[i].pieces, base[i].pieces);
      EXPECT_NEAR(moved[i].score, base[i].score - 2.75, 1e-12);
    }
  }
}

class Evaluate : public ::testing::Test {
 protected:
  Evaluate()
      : vocab_(subword::train_vocab(
            std::vector<std::string>{std::string(kEnglishTemplate),
                                     "estonia tallinn latvia riga lithuania vilnius",
                                     "tartu kaunas riga tallinn ta ta ta"},
            60)),
        enc_(vocab_) {}

  std::vector<Probe> probes() const {
    std::vector<Probe> out;
    for (const auto& e : kEntries) out.push_back(build_probe(e, enc_, kEnglishTemplate));
    return out;
  }

  subword::Vocabulary vocab_;
  subword::Encoder enc_;
  TemplateSet templates_ = TemplateSet::builtin();
};

TEST_F(Evaluate, OracleScoresOne) {
  bool multi = false;
  for (const auto& p : probes()) multi |= p.mask_piece_count() > 1;
  ASSERT_TRUE(multi);
  brute::ProbeScorer model(vocab_, probes(), std::vector<bool>(kEntries.size(), true));
  const EvalReport r = evaluate(kEntries, model, enc_, templates_, "en");
  EXPECT_FALSE(r.partial);
  EXPECT_EQ(r.evaluated, kEntries.size());
  EXPECT_DOUBLE_EQ(r.score.macro, 1.0);
}

TEST_F(Evaluate, AdversarialScoresZero) {
  brute::ProbeScorer model(vocab_, probes(), std::vector<bool>(kEntries.size(), false));
  const EvalReport r = evaluate(kEntries, model, enc_, templates_, "en");
  EXPECT_DOUBLE_EQ(r.score.macro, 0.0);
}

TEST_F(Evaluate, MixedFixtureMacro) {
  // capitals: 3 of 3; cities: 1 of 2.
  brute::ProbeScorer model(vocab_, probes(), {true, true, true, true, false});
  const EvalReport r = evaluate(kEntries, model, enc_, templates_, "en");
  ASSERT_EQ(r.score.categories.size(), 2u);
  EXPECT_DOUBLE_EQ(r.score.categories[0].p_at_k, 1.0);
  EXPECT_DOUBLE_EQ(r.score.categories[1].p_at_k, 0.5);
  EXPECT_DOUBLE_EQ(r.score.macro, 0.75);
  std::ostringstream csv;
  write_report_csv(csv, r.score);
  EXPECT_EQ(csv.str(),
            "category,n,hits,p_at_5\n"
            "capitals,3,3,1\n"
            "cities,2,1,0.5\n"
            "macro,5,4,0.75\n");
}

TEST_F(Evaluate, ScorerFailureGivesPartialReport) {
  brute::ProbeScorer inner(vocab_, probes(), std::vector<bool>(kEntries.size(), true));
  brute::DyingScorer model(inner, 1);
  const EvalReport r = evaluate(kEntries, model, enc_, templates_, "en");
  EXPECT_TRUE(r.partial);
  EXPECT_LT(r.evaluated, r.total);
  EXPECT_FALSE(r.error.empty());
}

TEST_F(Evaluate, ThreadCountDoesNotMatter) {
  scorer::CountScorer model(vocab_, std::vector<std::string>{"tallinn riga vilnius tartu kaunas",
                                                             std::string(kEnglishTemplate)});
  EvalOptions one;
  EvalOptions many;
  many.threads = 4;
  const EvalReport a = evaluate(kEntries, model, enc_, templates_, "en", one);
  const EvalReport b = evaluate(kEntries, model, enc_, templates_, "en", many);
  ASSERT_EQ(a.score.categories.size(), b.score.categories.size());
  for (std::size_t i = 0; i < a.score.categories.size(); ++i) {
    EXPECT_EQ(a.score.categories[i].hits, b.score.categories[i].hits);
  }
  EXPECT_EQ(a.score.macro, b.score.macro);
}

TEST_F(Evaluate, VocabularyMismatchIsRejected) {
  brute::TableScorer model(7, 1);
  EXPECT_THROW(evaluate(kEntries, model, enc_, templates_, "en"), scorer::ProtocolError);
  brute::ProbeScorer ok(vocab_, probes(), std::vector<bool>(kEntries.size(), true));
  EXPECT_THROW(evaluate(kEntries, ok, enc_, templates_, "xx"), TemplateError);
}
