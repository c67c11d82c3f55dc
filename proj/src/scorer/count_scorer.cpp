#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "morphbert/scorer.hpp"

namespace morphbert::scorer {

namespace {

void rank(std::vector<std::pair<PieceId, std::uint64_t>>& row) {
  std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
}

}  // namespace

CountScorer::CountScorer(const subword::Vocabulary& vocab, std::span<const std::string> train_lines)
    : vocab_size_(vocab.size()), mask_id_(vocab.specials().mask) {
  const subword::Encoder encoder(vocab);
  std::vector<std::vector<PieceId>> sequences;
  sequences.reserve(train_lines.size());
  for (const std::string& line : train_lines) sequences.push_back(encoder.encode(line).ids);
  // Framing ids come from the vocabulary's specials.
  for (auto& s : sequences) {
    s.insert(s.begin(), vocab.specials().bos);
    s.push_back(vocab.specials().eos);
  }
  build(sequences);
}

CountScorer::CountScorer(std::size_t vocab_size, PieceId mask_id,
                         std::span<const std::vector<PieceId>> sequences)
    : vocab_size_(vocab_size), mask_id_(mask_id) {
  if (vocab_size == 0) throw std::invalid_argument("vocabulary must not be empty");
  build(sequences);
}

void CountScorer::build(std::span<const std::vector<PieceId>> sequences) {
  std::vector<std::uint64_t> uni(vocab_size_, 0);
  std::vector<std::vector<std::pair<PieceId, std::uint64_t>>> bi(vocab_size_);
  for (const auto& seq : sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const PieceId w = seq[i];
      if (w < 0 || static_cast<std::size_t>(w) >= vocab_size_) {
        throw std::invalid_argument("training id outside the vocabulary");
      }
      ++uni[static_cast<std::size_t>(w)];
      if (i > 0) bi[static_cast<std::size_t>(seq[i - 1])].push_back({w, 1});
    }
  }
  for (std::size_t w = 0; w < vocab_size_; ++w) {
    unigram_.total += uni[w];
    if (uni[w] > 0) unigram_.ranked.push_back({static_cast<PieceId>(w), uni[w]});
  }
  rank(unigram_.ranked);

  bigram_.resize(vocab_size_);
  for (std::size_t l = 0; l < vocab_size_; ++l) {
    auto& raw = bi[l];
    if (raw.empty()) continue;
    std::sort(raw.begin(), raw.end());
    Row& row = bigram_[l];
    for (const auto& [w, one] : raw) {
      if (!row.ranked.empty() && row.ranked.back().first == w) {
        row.ranked.back().second += one;
      } else {
        row.ranked.push_back({w, one});
      }
      row.total += one;
    }
    rank(row.ranked);
    raw = {};
  }
}

const CountScorer::Row& CountScorer::row_for(PieceId left) const {
  if (left < 0 || left == mask_id_) return unigram_;
  const Row& row = bigram_[static_cast<std::size_t>(left)];
  return row.total == 0 ? unigram_ : row;
}

double CountScorer::log_prob(PieceId left, PieceId piece) const {
  const Row& row = row_for(left);
  std::uint64_t c = 0;
  for (const auto& [w, n] : row.ranked) {
    if (w == piece) {
      c = n;
      break;
    }
  }
  return std::log(static_cast<double>(c + 1)) -
         std::log(static_cast<double>(row.total + vocab_size_));
}

ScoreResponse CountScorer::score(const ScoreRequest& request) {
  if (request.k == 0) throw ProtocolError("k must be at least 1");
  for (const PieceId id : request.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
      throw ProtocolError("piece id " + std::to_string(id) + " outside the vocabulary");
    }
  }
  ScoreResponse response;
  response.id = request.id;
  const std::size_t k = std::min(request.k, vocab_size_);
  for (std::size_t m = 0; m < request.mask_positions.size(); ++m) {
    const std::size_t pos = request.mask_positions[m];
    if (pos >= request.ids.size() || request.ids[pos] != mask_id_) {
      throw ProtocolError("mask position " + std::to_string(pos) + " does not hold MASK");
    }
    if (m > 0 && pos <= request.mask_positions[m - 1]) {
      throw ProtocolError("mask positions must be strictly ascending");
    }
    const Row& row = row_for(pos > 0 ? request.ids[pos - 1] : -1);
    const double denom = std::log(static_cast<double>(row.total + vocab_size_));
    std::vector<Candidate> list;
    list.reserve(k);
    for (const auto& [w, n] : row.ranked) {
      if (list.size() == k) break;
      list.push_back({w, std::log(static_cast<double>(n + 1)) - denom});
    }
    if (list.size() < k) {
      // Unseen pieces share the smoothed floor; fill them by ascending id.
      std::vector<bool> seen(vocab_size_, false);
      for (const auto& entry : row.ranked) seen[static_cast<std::size_t>(entry.first)] = true;
      const double floor = -denom;
      for (std::size_t w = 0; w < vocab_size_ && list.size() < k; ++w) {
        if (!seen[w]) list.push_back({static_cast<PieceId>(w), floor});
      }
    }
    response.candidates.push_back(std::move(list));
  }
  return response;
}

std::size_t serve(MaskedLmScorer& scorer, std::istream& in, std::ostream& out) {
  out << to_json_line(Handshake{scorer.vocab_size()}) << '\n' << std::flush;
  std::size_t answered = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::int64_t id = 0;
    bool have_id = false;
    try {
      const ScoreRequest request = parse_request(line);
      id = request.id;
      have_id = true;
      out << to_json_line(scorer.score(request)) << '\n';
      ++answered;
    } catch (const ScorerError& e) {
      out << error_line(have_id ? &id : nullptr, e.what()) << '\n';
    }
    out.flush();
  }
  return answered;
}

}  // namespace morphbert::scorer
