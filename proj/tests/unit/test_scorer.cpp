#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "morphbert/common/rng.hpp"
#include "morphbert/scorer.hpp"
#include "morphbert/subword.hpp"
#include "support.hpp"

using namespace morphbert;
using namespace morphbert::scorer;

namespace {

ScoreRequest random_request(Rng& rng) {
  ScoreRequest r;
  r.id = static_cast<std::int64_t>(rng.next() >> 2) - (std::int64_t{1} << 60);
  const std::size_t n = 1 + rng.below(40);
  for (std::size_t i = 0; i < n; ++i) r.ids.push_back(static_cast<PieceId>(rng.below(90000)));
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.below(4) == 0) r.mask_positions.push_back(i);
  }
  r.k = 1 + rng.below(100);
  return r;
}

ScoreResponse random_response(Rng& rng) {
  ScoreResponse r;
  r.id = static_cast<std::int64_t>(rng.below(1000000));
  const std::size_t masks = rng.below(5);
  for (std::size_t m = 0; m < masks; ++m) {
    std::vector<Candidate> list;
    double logp = -rng.uniform() * 1e-3;
    for (std::size_t i = rng.below(8); i > 0; --i) {
      list.push_back({static_cast<PieceId>(rng.below(50000)), logp});
      logp -= rng.uniform() * 7.3;
    }
    r.candidates.push_back(std::move(list));
  }
  return r;
}

std::vector<std::string> echo(std::initializer_list<std::string> extra = {}) {
  std::vector<std::string> argv = {MB_ECHO_SCORER};
  argv.insert(argv.end(), extra);
  return argv;
}

ScoreRequest masked(std::int64_t id, std::size_t k, PieceId mask = 4) {
  return {id, {2, 7, mask, 3}, {2}, k};
}

const ClientOptions kShort{std::chrono::milliseconds(400)};

}  // namespace

TEST(Protocol, RandomMessagesRoundTrip) {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const ScoreRequest req = random_request(rng);
    ASSERT_EQ(parse_request(to_json_line(req)), req);
    const ScoreResponse resp = random_response(rng);
    ASSERT_EQ(parse_response(to_json_line(resp)), resp);
  }
  EXPECT_EQ(parse_handshake(to_json_line(Handshake{84006})).vocab_size, 84006u);
}

TEST(Protocol, WireShape) {
  EXPECT_EQ(to_json_line(ScoreRequest{7, {2, 4, 3}, {1}, 5}),
            R"({"id":7,"ids":[2,4,3],"mask_positions":[1],"k":5})");
  EXPECT_EQ(to_json_line(Handshake{12}), R"({"ready":true,"vocab_size":12})");
  const std::int64_t id = 3;
  EXPECT_EQ(error_line(&id, "bad"), R"({"id":3,"error":"bad"})");
  EXPECT_EQ(error_line(nullptr, "bad"), R"({"id":null,"error":"bad"})");
}

TEST(Protocol, RejectsInvalidMessages) {
  EXPECT_THROW(parse_request("not json"), ProtocolError);
  EXPECT_THROW(parse_request(R"({"id":1,"ids":[4],"mask_positions":[0],"k":0})"), ProtocolError);
  EXPECT_THROW(parse_request(R"({"id":1,"ids":[4,4],"mask_positions":[1,0],"k":1})"),
               ProtocolError);
  EXPECT_THROW(parse_request(R"({"id":1,"ids":[4],"mask_positions":[1],"k":1})"), ProtocolError);
  EXPECT_THROW(parse_request(R"({"id":1,"ids":[4],"k":1})"), ProtocolError);
  EXPECT_THROW(parse_response(R"({"id":1,"candidates":[[[3,0.5]]]})"), ProtocolError);
  EXPECT_THROW(parse_response(R"({"id":1,"candidates":[[[3,-2.0],[4,-1.0]]]})"), ProtocolError);
  EXPECT_THROW(parse_response(R"({"id":1,"candidates":"nope"})"), ProtocolError);
  EXPECT_THROW(parse_response(R"({"id":1,"error":"scorer failed"})"), ProtocolError);
  EXPECT_THROW(parse_handshake(R"({"ready":false,"vocab_size":3})"), ProtocolError);
}

TEST(Protocol, CheckResponseAgainstRequest) {
  const ScoreRequest req{1, {2, 4, 4, 3}, {1, 2}, 2};
  ScoreResponse ok{1, {{{5, -0.1}, {6, -0.2}}, {{5, -0.3}}}};
  EXPECT_NO_THROW(check_response(req, ok, 10));
  EXPECT_THROW(check_response(req, ok, 6), ProtocolError);
  ScoreResponse too_long = ok;
  too_long.candidates[1] = {{1, -0.1}, {2, -0.2}, {3, -0.3}};
  EXPECT_THROW(check_response(req, too_long, 10), ProtocolError);
  ScoreResponse missing = ok;
  missing.candidates.pop_back();
  EXPECT_THROW(check_response(req, missing, 10), ProtocolError);
}

TEST(CountScorer, BigramPicksFollower) {
  const std::vector<std::string> train = {"a b a b"};
  const subword::Vocabulary vocab = subword::train_vocab(train, 4);
  CountScorer scorer(vocab, train);
  const PieceId a = vocab.find("\xe2\x96\x81" "a");
  const PieceId b = vocab.find("\xe2\x96\x81" "b");
  const auto& sp = vocab.specials();
  const ScoreResponse r = scorer.score({1, {sp.bos, a, sp.mask, sp.eos}, {2}, 1});
  ASSERT_EQ(r.candidates.size(), 1u);
  ASSERT_EQ(r.candidates[0].size(), 1u);
  EXPECT_EQ(r.candidates[0][0].piece, b);
  // c(a, b) = 2, c(a) = 2.
  EXPECT_NEAR(r.candidates[0][0].logp, std::log(3.0 / (2.0 + static_cast<double>(vocab.size()))),
              1e-12);
}

TEST(CountScorer, EmptyTrainingIsUniform) {
  const std::size_t v = 37;
  CountScorer scorer(v, 4, std::span<const std::vector<PieceId>>{});
  const ScoreResponse r = scorer.score({1, {2, 4, 3}, {1}, 1000});
  ASSERT_EQ(r.candidates[0].size(), v);
  for (std::size_t i = 0; i < v; ++i) {
    EXPECT_EQ(r.candidates[0][i].piece, static_cast<PieceId>(i));
    EXPECT_NEAR(r.candidates[0][i].logp, -std::log(37.0), 1e-12);
  }
}

TEST(CountScorer, FullVocabularySumsToOne) {
  Rng rng(3);
  std::vector<std::vector<PieceId>> seqs(50);
  for (auto& s : seqs) {
    for (std::size_t i = rng.below(20); i > 0; --i) s.push_back(static_cast<PieceId>(5 + rng.below(25)));
  }
  CountScorer scorer(30, 4, seqs);
  for (PieceId left : {2, 4, 7, 12, 29}) {
    const ScoreResponse r = scorer.score({1, {left, 4, 3}, {1}, 30});
    double sum = 0;
    for (const auto& c : r.candidates[0]) sum += std::exp(c.logp);
    EXPECT_NEAR(sum, 1.0, 1e-9) << "left " << left;
    for (std::size_t i = 1; i < r.candidates[0].size(); ++i) {
      ASSERT_GE(r.candidates[0][i - 1].logp, r.candidates[0][i].logp);
    }
  }
}

TEST(CountScorer, RejectsBadRequests) {
  CountScorer scorer(10, 4, std::span<const std::vector<PieceId>>{});
  EXPECT_THROW(scorer.score({1, {2, 5, 3}, {1}, 1}), ProtocolError);
  EXPECT_THROW(scorer.score({1, {2, 40, 4}, {2}, 1}), ProtocolError);
  EXPECT_THROW(scorer.score({1, {2, 4}, {1}, 0}), ProtocolError);
  EXPECT_EQ(scorer.score({1, {4}, {0}, 99}).candidates[0].size(), 10u);
}

TEST(Serve, AnswersAndReportsErrors) {
  CountScorer scorer(10, 4, std::span<const std::vector<PieceId>>{});
  std::istringstream in(to_json_line(ScoreRequest{5, {2, 4}, {1}, 2}) + "\n" + "garbage\n" +
                        R"({"id":9,"ids":[2,5],"mask_positions":[1],"k":1})" + "\n");
  std::ostringstream out;
  EXPECT_EQ(serve(scorer, in, out), 1u);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(parse_handshake(line).vocab_size, 10u);
  std::getline(lines, line);
  EXPECT_EQ(parse_response(line).id, 5);
  std::getline(lines, line);
  EXPECT_EQ(line.rfind(R"({"id":null,"error":)", 0), 0u) << line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind(R"({"id":9,"error":)", 0), 0u) << line;
}

TEST(Client, EchoGivesKCandidates) {
  ScorerClient client(echo({"--vocab-size", "10"}));
  EXPECT_EQ(client.vocab_size(), 10u);
  const ScoreResponse r = client.roundtrip(masked(42, 3));
  EXPECT_EQ(r.id, 42);
  ASSERT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.candidates[0].size(), 3u);
  EXPECT_EQ(client.roundtrip(masked(1, 50)).candidates[0].size(), 10u);
}

TEST(Client, OutOfOrderResponses) {
  ScorerClient client(echo({"--reverse", "2"}));
  auto f1 = client.submit(masked(1, 1));
  auto f2 = client.submit(masked(2, 2));
  const ScoreResponse r2 = f2.get();
  const ScoreResponse r1 = f1.get();
  EXPECT_EQ(r1.id, 1);
  EXPECT_EQ(r1.candidates[0].size(), 1u);
  EXPECT_EQ(r2.id, 2);
  EXPECT_EQ(r2.candidates[0].size(), 2u);
}

TEST(Client, ManyConcurrentInFlight) {
  ScorerClient client(echo({"--reverse", "16", "--vocab-size", "64"}));
  constexpr int kThreads = 8;
  constexpr int kPerThread = 32;
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      std::vector<std::pair<int, std::future<ScoreResponse>>> futures;
      for (int i = 0; i < kPerThread; ++i) {
        const int id = t * 1000 + i;
        futures.emplace_back(id, client.submit(masked(id, 1 + static_cast<std::size_t>(id % 7))));
      }
      for (auto& [id, f] : futures) {
        const ScoreResponse r = f.get();
        if (r.id == id && r.candidates[0].size() == 1 + static_cast<std::size_t>(id % 7)) ++ok;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(ok.load(), kThreads * kPerThread);
}

TEST(Client, MalformedResponseIsProtocolError) {
  ScorerClient client(echo({"--malformed"}), kShort);
  EXPECT_THROW(client.roundtrip(masked(1, 2)), ProtocolError);
}

TEST(Client, TooManyListsIsProtocolError) {
  ScorerClient client(echo({"--too-many"}), kShort);
  EXPECT_THROW(client.roundtrip(masked(1, 2)), ProtocolError);
}

TEST(Client, UnknownIdFailsEverything) {
  ScorerClient client(echo({"--bad-id"}), kShort);
  EXPECT_THROW(client.roundtrip(masked(1, 2)), ProtocolError);
  EXPECT_THROW(client.roundtrip(masked(2, 2)), ProtocolError);
}

TEST(Client, TimeoutIsScorerDead) {
  ScorerClient client(echo({"--hang"}), kShort);
  EXPECT_THROW(client.roundtrip(masked(1, 2)), ScorerDeadError);
  EXPECT_THROW(client.roundtrip(masked(2, 2)), ScorerDeadError);
}

TEST(Client, NoHandshake) {
  EXPECT_THROW(ScorerClient(echo({"--no-handshake"}), kShort), ScorerDeadError);
}

TEST(Client, MissingExecutable) {
  EXPECT_THROW(ScorerClient({"/nonexistent/scorer"}, kShort), ScorerDeadError);
}

TEST(Client, ExitedScorerIsDead) {
  ScorerClient client(echo({"--exit-after", "1"}), kShort);
  EXPECT_NO_THROW(client.roundtrip(masked(1, 2)));
  EXPECT_THROW(client.roundtrip(masked(2, 2)), ScorerDeadError);
}

TEST(CountScorerProcess, ByteReproducible) {
  testkit::TempDir dir("scorer");
  const std::vector<std::string> train = {"the cat sat on the mat", "the dog sat on the log",
                                          "a cat and a dog"};
  const subword::Vocabulary vocab = subword::train_vocab(train, 40);
  vocab.save(dir / "vocab.tsv");
  std::string text;
  for (const auto& l : train) text += l + "\n";
  testkit::write_text(dir / "train.txt", text);
  const subword::Encoder enc(vocab);
  std::string requests;
  for (std::int64_t i = 0; i < 20; ++i) {
    std::vector<PieceId> ids = enc.encode(train[static_cast<std::size_t>(i) % 3]).ids;
    ids.insert(ids.begin(), vocab.specials().bos);
    ids.push_back(vocab.specials().eos);
    const std::size_t pos = 1 + static_cast<std::size_t>(i) % (ids.size() - 2);
    ids[pos] = vocab.specials().mask;
    requests += to_json_line(ScoreRequest{i, ids, {pos}, 5}) + "\n";
  }
  testkit::write_text(dir / "req.jsonl", requests);
  const std::string cmd = std::string(MB_COUNT_SCORER) + " " + testkit::quote(dir / "vocab.tsv") +
                          " --train " + testkit::quote(dir / "train.txt") + " < " +
                          testkit::quote(dir / "req.jsonl");
  const auto a = testkit::run(cmd);
  const auto b = testkit::run(cmd);
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.output, b.output);
  EXPECT_EQ(std::count(a.output.begin(), a.output.end(), '\n'), 21);

  // Same answers through the client.
  ProcessScorer proc({MB_COUNT_SCORER, (dir / "vocab.tsv").string(), "--train",
                      (dir / "train.txt").string()});
  CountScorer direct(vocab, train);
  std::istringstream lines(requests);
  std::string line;
  while (std::getline(lines, line)) {
    const ScoreRequest req = parse_request(line);
    EXPECT_EQ(proc.score(req), direct.score(req));
  }
}
