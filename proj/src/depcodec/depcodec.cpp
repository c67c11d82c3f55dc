#include "morphbert/depcodec.hpp"

#include <algorithm>
#include <optional>

namespace morphbert::depcodec {

bool is_valid_tree(const DepTree& tree) {
  const int n = static_cast<int>(tree.size());
  if (tree.rel.size() != tree.head.size()) return false;
  for (const int h : tree.head) {
    if (h < 0 || h > n) return false;
  }
  // Follow head pointers; a walk longer than n steps means a cycle.
  for (int w = 1; w <= n; ++w) {
    int cur = w;
    int steps = 0;
    while (cur != 0) {
      if (++steps > n) return false;
      cur = tree.head_of(cur);
    }
  }
  return true;
}

bool is_projective(const DepTree& tree) {
  const int n = static_cast<int>(tree.size());
  for (int d1 = 1; d1 <= n; ++d1) {
    const int a = std::min(d1, tree.head_of(d1));
    const int b = std::max(d1, tree.head_of(d1));
    for (int d2 = d1 + 1; d2 <= n; ++d2) {
      const int c = std::min(d2, tree.head_of(d2));
      const int d = std::max(d2, tree.head_of(d2));
      if ((a < c && c < b && b < d) || (c < a && a < d && d < b)) return false;
    }
  }
  return true;
}

std::vector<Transition> oracle(const DepTree& tree) {
  if (!is_valid_tree(tree)) throw std::invalid_argument("input is not a dependency tree");
  if (!is_projective(tree)) throw NonProjectiveError();
  const int n = static_cast<int>(tree.size());

  std::vector<int> pending(static_cast<std::size_t>(n) + 1, 0);  // unattached dependents
  for (int w = 1; w <= n; ++w) ++pending[static_cast<std::size_t>(tree.head_of(w))];

  std::vector<Transition> out;
  out.reserve(2 * static_cast<std::size_t>(n));
  std::vector<int> stack{0};
  int next = 1;
  while (next <= n || stack.size() > 1) {
    if (stack.size() >= 2) {
      const int s0 = stack.back();
      const int s1 = stack[stack.size() - 2];
      if (s1 != 0 && tree.head_of(s1) == s0 && pending[static_cast<std::size_t>(s1)] == 0) {
        out.push_back({Action::kLeftArc, tree.rel_of(s1)});
        --pending[static_cast<std::size_t>(s0)];
        stack.erase(stack.end() - 2);
        continue;
      }
      if (tree.head_of(s0) == s1 && pending[static_cast<std::size_t>(s0)] == 0) {
        out.push_back({Action::kRightArc, tree.rel_of(s0)});
        --pending[static_cast<std::size_t>(s1)];
        stack.pop_back();
        continue;
      }
    }
    if (next > n) throw NonProjectiveError();
    out.push_back({Action::kShift, {}});
    stack.push_back(next++);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels

std::string format_label(const TransitionChunk& chunk) {
  std::string out = "SH";
  for (const Transition& t : chunk.arcs) {
    out += t.action == Action::kLeftArc ? "+LA@" : "+RA@";
    out += t.rel;
  }
  return out;
}

namespace {

std::optional<Transition> parse_arc(std::string_view part) {
  if (part.size() < 4 || part[2] != '@') return std::nullopt;
  const std::string_view kind = part.substr(0, 2);
  Transition t;
  if (kind == "LA") {
    t.action = Action::kLeftArc;
  } else if (kind == "RA") {
    t.action = Action::kRightArc;
  } else {
    return std::nullopt;
  }
  t.rel = std::string(part.substr(3));
  return t;
}

std::vector<std::string_view> split_plus(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t plus = text.find('+', start);
    parts.push_back(text.substr(start, plus == std::string_view::npos ? plus : plus - start));
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return parts;
}

}  // namespace

TransitionChunk parse_label(std::string_view text) {
  const auto parts = split_plus(text);
  if (parts.front() != "SH") {
    throw LabelSyntaxError("label must start with SH: '" + std::string(text) + "'");
  }
  TransitionChunk chunk;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    auto arc = parse_arc(parts[i]);
    if (!arc) throw LabelSyntaxError("bad arc component '" + std::string(parts[i]) + "'");
    chunk.arcs.push_back(std::move(*arc));
  }
  return chunk;
}

TransitionChunk parse_label_lenient(std::string_view text, std::size_t* dropped) {
  const auto parts = split_plus(text);
  TransitionChunk chunk;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i == 0 && parts[i] == "SH") continue;
    if (auto arc = parse_arc(parts[i])) {
      chunk.arcs.push_back(std::move(*arc));
    } else {
      ++bad;
    }
  }
  if (dropped != nullptr) *dropped += bad;
  return chunk;
}

LabelSequence encode_labels(const DepTree& tree) {
  LabelSequence labels;
  labels.reserve(tree.size());
  for (Transition& t : oracle(tree)) {
    if (t.action == Action::kShift) {
      labels.emplace_back();
    } else {
      labels.back().arcs.push_back(std::move(t));
    }
  }
  return labels;
}

DepTree decode_labels(const LabelSequence& labels) {
  const std::size_t n = labels.size();
  DepTree tree;
  tree.head.assign(n, -1);
  tree.rel.assign(n, std::string{});
  std::vector<int> stack{0};
  for (std::size_t i = 0; i < n; ++i) {
    stack.push_back(static_cast<int>(i) + 1);
    for (const Transition& t : labels[i].arcs) {
      if (stack.size() < 2) continue;
      const int s0 = stack.back();
      const int s1 = stack[stack.size() - 2];
      if (t.action == Action::kLeftArc) {
        if (s1 == 0 || tree.head[static_cast<std::size_t>(s1 - 1)] >= 0) continue;
        tree.head[static_cast<std::size_t>(s1 - 1)] = s0;
        tree.rel[static_cast<std::size_t>(s1 - 1)] = t.rel;
        stack.erase(stack.end() - 2);
      } else if (t.action == Action::kRightArc) {
        if (tree.head[static_cast<std::size_t>(s0 - 1)] >= 0) continue;
        tree.head[static_cast<std::size_t>(s0 - 1)] = s1;
        tree.rel[static_cast<std::size_t>(s0 - 1)] = t.rel;
        stack.pop_back();
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (tree.head[i] < 0) {
      tree.head[i] = 0;
      tree.rel[i] = "root";
    }
  }
  return tree;
}

DepTree decode_labels(const LabelSequence& labels, std::size_t n) {
  if (labels.size() != n) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                " does not match sentence length " + std::to_string(n));
  }
  return decode_labels(labels);
}

// ---------------------------------------------------------------------------
// Projectivization

namespace {

bool dominates(const DepTree& tree, int ancestor, int word) {
  for (int cur = word; cur != 0; cur = tree.head_of(cur)) {
    if (cur == ancestor) return true;
  }
  return ancestor == 0;
}

bool arc_is_projective(const DepTree& tree, int dep) {
  const int h = tree.head_of(dep);
  const int lo = std::min(h, dep);
  const int hi = std::max(h, dep);
  for (int k = lo + 1; k < hi; ++k) {
    if (!dominates(tree, h, k)) return false;
  }
  return true;
}

}  // namespace

DepTree projectivize(const DepTree& tree) {
  if (!is_valid_tree(tree)) throw std::invalid_argument("input is not a dependency tree");
  DepTree out = tree;
  const int n = static_cast<int>(out.size());
  while (true) {
    int pick = 0;
    int pick_len = 0;
    for (int d = 1; d <= n; ++d) {
      if (arc_is_projective(out, d)) continue;
      const int len = std::abs(out.head_of(d) - d);
      if (pick == 0 || len < pick_len) {
        pick = d;
        pick_len = len;
      }
    }
    if (pick == 0) break;
    const int h = out.head_of(pick);
    out.head[static_cast<std::size_t>(pick - 1)] = out.head_of(h);
  }
  return out;
}

}  // namespace morphbert::depcodec
