#pragma once

// Brute-force tree facts, written without reference to the library code.

#include <functional>
#include <string>
#include <vector>

#include "morphbert/depcodec.hpp"

namespace morphbert::brute {

// heads[i] is the head of word i + 1. A tree iff every word reaches 0
// without revisiting a word.
inline bool is_tree(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  for (int w = 1; w <= n; ++w) {
    std::vector<bool> visited(static_cast<std::size_t>(n) + 1, false);
    int cur = w;
    while (cur != 0) {
      if (cur < 0 || cur > n || visited[static_cast<std::size_t>(cur)]) return false;
      visited[static_cast<std::size_t>(cur)] = true;
      cur = heads[static_cast<std::size_t>(cur - 1)];
    }
  }
  return true;
}

inline bool descends(const std::vector<int>& heads, int ancestor, int word) {
  if (ancestor == 0) return true;
  for (int cur = word; cur != 0; cur = heads[static_cast<std::size_t>(cur - 1)]) {
    if (cur == ancestor) return true;
  }
  return false;
}

// Projective iff every word strictly between a head and its dependent
// descends from that head.
inline bool is_projective(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  for (int d = 1; d <= n; ++d) {
    const int h = heads[static_cast<std::size_t>(d - 1)];
    for (int k = std::min(h, d) + 1; k < std::max(h, d); ++k) {
      if (!descends(heads, h, k)) return false;
    }
  }
  return true;
}

// Pairs of arcs drawn above the sentence that cross, root arcs included.
inline int crossing_pairs(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  int count = 0;
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      int a = std::min(i, heads[static_cast<std::size_t>(i - 1)]);
      int b = std::max(i, heads[static_cast<std::size_t>(i - 1)]);
      int c = std::min(j, heads[static_cast<std::size_t>(j - 1)]);
      int d = std::max(j, heads[static_cast<std::size_t>(j - 1)]);
      if (a > c) {
        std::swap(a, c);
        std::swap(b, d);
      }
      if (a < c && c < b && b < d) ++count;
    }
  }
  return count;
}

// Calls f on every head array of length n with values in 0..n.
inline void for_each_head_array(int n, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> heads(static_cast<std::size_t>(n), 0);
  while (true) {
    f(heads);
    int i = 0;
    while (i < n && heads[static_cast<std::size_t>(i)] == n) heads[static_cast<std::size_t>(i++)] = 0;
    if (i == n) return;
    ++heads[static_cast<std::size_t>(i)];
  }
}

// Relation names that differ across arcs so label mix-ups are visible.
inline depcodec::DepTree labelled(const std::vector<int>& heads) {
  static const char* kRels[] = {"nsubj", "obj", "amod", "case", "punct", "root", "acl:relcl"};
  depcodec::DepTree t;
  t.head = heads;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    t.rel.emplace_back(heads[i] == 0 ? "root" : kRels[(static_cast<std::size_t>(heads[i]) * 3 + i) % 7]);
  }
  return t;
}

}  // namespace morphbert::brute
