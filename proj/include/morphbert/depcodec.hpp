#pragma once

// Dependency parsing as sequence labeling: arc-standard transitions are
// grouped into one label per word and decoded back into trees.

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace morphbert::depcodec {

// Words are numbered 1..n; head 0 is the artificial root.
struct DepTree {
  std::vector<int> head;         // head[i] is the head of word i + 1
  std::vector<std::string> rel;  // rel[i] is the relation of word i + 1

  std::size_t size() const { return head.size(); }
  int head_of(int word) const { return head[static_cast<std::size_t>(word - 1)]; }
  const std::string& rel_of(int word) const { return rel[static_cast<std::size_t>(word - 1)]; }

  friend bool operator==(const DepTree&, const DepTree&) = default;
};

// Every word has one head in 0..n, no cycles, everything reaches the root.
bool is_valid_tree(const DepTree& tree);

// No two arcs cross when drawn above the words, root arcs from position 0
// included.
bool is_projective(const DepTree& tree);

class NonProjectiveError : public std::runtime_error {
 public:
  NonProjectiveError() : std::runtime_error("tree is not projective") {}
};

enum class Action { kShift, kLeftArc, kRightArc };

struct Transition {
  Action action = Action::kShift;
  std::string rel;  // empty for SHIFT

  friend bool operator==(const Transition&, const Transition&) = default;
};

// Static arc-standard oracle; the result has exactly 2n transitions.
// Throws NonProjectiveError for non-projective trees and
// std::invalid_argument for inputs that are not trees.
std::vector<Transition> oracle(const DepTree& tree);

// One label per word: an implicit SHIFT of that word followed by the arc
// transitions that precede the next SHIFT.
struct TransitionChunk {
  std::vector<Transition> arcs;  // LEFT-ARC / RIGHT-ARC only

  friend bool operator==(const TransitionChunk&, const TransitionChunk&) = default;
};

using LabelSequence = std::vector<TransitionChunk>;

// Label text: SH(+((LA|RA)@rel))*, e.g. "SH+LA@nsubj+RA@root".
std::string format_label(const TransitionChunk& chunk);

class LabelSyntaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strict parser; throws LabelSyntaxError.
TransitionChunk parse_label(std::string_view text);
// Keeps every well-formed arc component and drops the rest; never throws.
// A label with no leading "SH" is read as a bare shift plus whatever arcs
// parse.
TransitionChunk parse_label_lenient(std::string_view text, std::size_t* dropped = nullptr);

LabelSequence encode_labels(const DepTree& tree);

// Replays the transitions. Arc transitions whose preconditions fail are
// skipped; words left without a head are attached to the root as "root".
// Always returns a valid tree with labels.size() words.
DepTree decode_labels(const LabelSequence& labels);
// Same, checking that the sequence has exactly n labels.
DepTree decode_labels(const LabelSequence& labels, std::size_t n);

// Lifts non-projective arcs (shortest first, then leftmost dependent) to the
// grandparent until no arc crosses. Relations are kept.
DepTree projectivize(const DepTree& tree);

}  // namespace morphbert::depcodec
