#pragma once

// Masked-LM scorer boundary: the newline-delimited JSON wire protocol, a
// count-based reference scorer, a stdio server loop and a subprocess client.

#include <chrono>
#include <cstdint>
#include <future>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "morphbert/subword.hpp"

namespace morphbert::scorer {

using subword::PieceId;

class ScorerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent message.
class ProtocolError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

// Scorer exited, closed its output or did not answer in time.
class ScorerDeadError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

struct ScoreRequest {
  std::int64_t id = 0;
  std::vector<PieceId> ids;
  std::vector<std::size_t> mask_positions;  // ascending
  std::size_t k = 1;

  friend bool operator==(const ScoreRequest&, const ScoreRequest&) = default;
};

struct Candidate {
  PieceId piece = 0;
  double logp = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ScoreResponse {
  std::int64_t id = 0;
  std::vector<std::vector<Candidate>> candidates;  // one list per mask position

  friend bool operator==(const ScoreResponse&, const ScoreResponse&) = default;
};

struct Handshake {
  std::size_t vocab_size = 0;
};

// Single-line JSON encodings (no trailing newline).
std::string to_json_line(const ScoreRequest& request);
std::string to_json_line(const ScoreResponse& response);
std::string to_json_line(const Handshake& handshake);
// `{"id":..,"error":".."}`; id is null when the request id was unreadable.
std::string error_line(const std::int64_t* id, std::string_view message);

// Parsers validate shape and the documented invariants and throw
// ProtocolError. A request must have k >= 1 and strictly ascending
// positions inside `ids`. A response must have finite log-probabilities
// <= 0, sorted descending within each list.
ScoreRequest parse_request(std::string_view line);
ScoreResponse parse_response(std::string_view line);
Handshake parse_handshake(std::string_view line);

// Checks a response against the request it answers: one list per mask,
// at most k candidates each, piece ids below vocab_size.
void check_response(const ScoreRequest& request, const ScoreResponse& response,
                    std::size_t vocab_size);

// Anything that answers masked-token queries. score() may be called from
// several threads at once.
class MaskedLmScorer {
 public:
  virtual ~MaskedLmScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual ScoreResponse score(const ScoreRequest& request) = 0;
};

// Piece-bigram model over the left neighbour with add-one smoothing:
//   log P(w | l) = log((c(l, w) + 1) / (c(l) + V))
// When the left neighbour is MASK, absent, or never seen as a left context
// the unigram estimate log((c(w) + 1) / (N + V)) is used instead. V counts
// every id, specials included. Candidates are ranked by probability, ties
// by ascending id. Training sequences are framed with BOS/EOS.
class CountScorer final : public MaskedLmScorer {
 public:
  CountScorer(const subword::Vocabulary& vocab, std::span<const std::string> train_lines);
  CountScorer(std::size_t vocab_size, PieceId mask_id,
              std::span<const std::vector<PieceId>> sequences);

  std::size_t vocab_size() const override { return vocab_size_; }
  // Throws ProtocolError for ids outside the vocabulary, positions that do
  // not hold MASK, or k == 0. k larger than V is truncated to V.
  ScoreResponse score(const ScoreRequest& request) override;

  double log_prob(PieceId left, PieceId piece) const;

 private:
  struct Row {
    std::uint64_t total = 0;
    std::vector<std::pair<PieceId, std::uint64_t>> ranked;  // count desc, id asc
  };
  void build(std::span<const std::vector<PieceId>> sequences);
  const Row& row_for(PieceId left) const;

  std::size_t vocab_size_;
  PieceId mask_id_;
  Row unigram_;
  std::vector<Row> bigram_;  // indexed by left id
};

// Serves the protocol over a stream pair: writes the handshake, then one
// response (or error line) per request line until EOF. Returns the number
// of requests answered successfully.
std::size_t serve(MaskedLmScorer& scorer, std::istream& in, std::ostream& out);

struct ClientOptions {
  std::chrono::milliseconds timeout{30000};
};

// Runs a scorer as a child process speaking the protocol on its standard
// streams (stderr is inherited). Submission is thread-safe; responses may
// arrive in any order and are matched by id. Request ids are assigned by
// the client; the caller's id is restored on the returned response.
class ScorerClient {
 public:
  // argv[0] is looked up on PATH. Waits for the handshake; throws
  // ScorerDeadError if the child cannot be started or stays silent past the
  // timeout and ProtocolError if its first line is not a handshake.
  explicit ScorerClient(std::vector<std::string> argv, ClientOptions options = {});
  ~ScorerClient();
  ScorerClient(const ScorerClient&) = delete;
  ScorerClient& operator=(const ScorerClient&) = delete;

  std::size_t vocab_size() const;

  std::future<ScoreResponse> submit(ScoreRequest request);
  // submit() plus a bounded wait. A timeout kills the child and throws
  // ScorerDeadError; every later call fails the same way.
  ScoreResponse roundtrip(ScoreRequest request);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Adapts a ScorerClient to the MaskedLmScorer interface.
class ProcessScorer final : public MaskedLmScorer {
 public:
  explicit ProcessScorer(std::vector<std::string> argv, ClientOptions options = {})
      : client_(std::move(argv), options) {}
  std::size_t vocab_size() const override { return client_.vocab_size(); }
  ScoreResponse score(const ScoreRequest& request) override;

 private:
  ScorerClient client_;
};

}  // namespace morphbert::scorer
