#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "morphbert/scorer.hpp"

namespace morphbert::scorer {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not a JSON object");
  return j;
}

const json& member(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  return *it;
}

std::int64_t as_int(const json& v, const char* what) {
  if (!v.is_number_integer()) throw ProtocolError(std::string(what) + " must be an integer");
  if (v.is_number_unsigned() &&
      v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw ProtocolError(std::string(what) + " out of range");
  }
  return v.get<std::int64_t>();
}

PieceId as_piece(const json& v, const char* what) {
  const std::int64_t x = as_int(v, what);
  if (x < 0 || x > std::numeric_limits<PieceId>::max()) {
    throw ProtocolError(std::string(what) + " out of range");
  }
  return static_cast<PieceId>(x);
}

}  // namespace

std::string to_json_line(const ScoreRequest& request) {
  ordered j;
  j["id"] = request.id;
  j["ids"] = request.ids;
  j["mask_positions"] = request.mask_positions;
  j["k"] = request.k;
  return j.dump();
}

std::string to_json_line(const ScoreResponse& response) {
  ordered lists = ordered::array();
  for (const auto& list : response.candidates) {
    ordered l = ordered::array();
    for (const Candidate& c : list) l.push_back(ordered::array({c.piece, c.logp}));
    lists.push_back(std::move(l));
  }
  ordered j;
  j["id"] = response.id;
  j["candidates"] = std::move(lists);
  return j.dump();
}

std::string to_json_line(const Handshake& handshake) {
  ordered j;
  j["ready"] = true;
  j["vocab_size"] = handshake.vocab_size;
  return j.dump();
}

std::string error_line(const std::int64_t* id, std::string_view message) {
  ordered j;
  j["id"] = id ? ordered(*id) : ordered(nullptr);
  j["error"] = message;
  return j.dump();
}

ScoreRequest parse_request(std::string_view line) {
  const json j = parse_object(line);
  ScoreRequest r;
  r.id = as_int(member(j, "id"), "id");
  const json& ids = member(j, "ids");
  if (!ids.is_array()) throw ProtocolError("'ids' must be an array");
  for (const json& v : ids) r.ids.push_back(as_piece(v, "piece id"));
  const json& pos = member(j, "mask_positions");
  if (!pos.is_array()) throw ProtocolError("'mask_positions' must be an array");
  for (const json& v : pos) {
    const std::int64_t p = as_int(v, "mask position");
    if (p < 0 || static_cast<std::size_t>(p) >= r.ids.size()) {
      throw ProtocolError("mask position " + std::to_string(p) + " outside the sequence");
    }
    if (!r.mask_positions.empty() && static_cast<std::size_t>(p) <= r.mask_positions.back()) {
      throw ProtocolError("mask positions must be strictly ascending");
    }
    r.mask_positions.push_back(static_cast<std::size_t>(p));
  }
  const std::int64_t k = as_int(member(j, "k"), "k");
  if (k < 1) throw ProtocolError("k must be at least 1");
  r.k = static_cast<std::size_t>(k);
  return r;
}

ScoreResponse parse_response(std::string_view line) {
  const json j = parse_object(line);
  if (const auto e = j.find("error"); e != j.end()) {
    throw ProtocolError("scorer reported: " + (e->is_string() ? e->get<std::string>() : e->dump()));
  }
  ScoreResponse r;
  r.id = as_int(member(j, "id"), "id");
  const json& lists = member(j, "candidates");
  if (!lists.is_array()) throw ProtocolError("'candidates' must be an array");
  for (const json& list : lists) {
    if (!list.is_array()) throw ProtocolError("candidate list must be an array");
    std::vector<Candidate> out;
    for (const json& pair : list) {
      if (!pair.is_array() || pair.size() != 2 || !pair[1].is_number()) {
        throw ProtocolError("candidate must be [piece_id, logp]");
      }
      Candidate c{as_piece(pair[0], "piece id"), pair[1].get<double>()};
      if (!std::isfinite(c.logp) || c.logp > 0.0) {
        throw ProtocolError("log-probability must be finite and <= 0");
      }
      if (!out.empty() && c.logp > out.back().logp) {
        throw ProtocolError("candidates must be sorted by descending log-probability");
      }
      out.push_back(c);
    }
    r.candidates.push_back(std::move(out));
  }
  return r;
}

Handshake parse_handshake(std::string_view line) {
  const json j = parse_object(line);
  const json& ready = member(j, "ready");
  if (!ready.is_boolean() || !ready.get<bool>()) throw ProtocolError("handshake without ready:true");
  const std::int64_t v = as_int(member(j, "vocab_size"), "vocab_size");
  if (v < 1) throw ProtocolError("vocab_size must be positive");
  return {static_cast<std::size_t>(v)};
}

void check_response(const ScoreRequest& request, const ScoreResponse& response,
                    std::size_t vocab_size) {
  if (response.candidates.size() != request.mask_positions.size()) {
    throw ProtocolError("response has " + std::to_string(response.candidates.size()) +
                        " candidate lists for " + std::to_string(request.mask_positions.size()) +
                        " masks");
  }
  for (const auto& list : response.candidates) {
    if (list.size() > request.k) throw ProtocolError("more than k candidates");
    for (const Candidate& c : list) {
      if (static_cast<std::size_t>(c.piece) >= vocab_size) {
        throw ProtocolError("piece id " + std::to_string(c.piece) + " outside the vocabulary");
      }
    }
  }
}

}  // namespace morphbert::scorer
