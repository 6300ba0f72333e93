#pragma once

#include <map>
#include <vector>

#include "mathesis/hypergraph.hpp"

namespace mathesis {

/// A template hypergraph to search for. Variable nodes whose label starts
/// with '?' are pattern variables and match any node; everything else
/// matches exact-structurally (no associativity/commutativity folding).
struct GoalPattern {
  MathState graph;   // the pattern fragment, itself well-typed
  EdgeId root = 0;   // the edge whose match must enter the fact set
};

/// One match: pattern entity -> state entity, covering the pattern's
/// reachable entities from the root.
struct PatternMatch {
  EdgeId root = 0;                       // matched state edge for pattern.root
  std::map<NodeId, EntityRef> node_map;  // pattern node -> state entity
  std::map<EdgeId, EdgeId> edge_map;     // pattern edge -> state edge
};

/// All exact structural matches of the pattern in the state, ordered by
/// ascending matched root edge id. Pattern variables bind consistently
/// (the same '?' node maps to one state node across the match).
std::vector<PatternMatch> match_goal(const MathState& state, const GoalPattern& pattern);

/// True when some match of the pattern has its root edge in the fact set.
bool goal_reached(const MathState& state, const GoalPattern& pattern);

/// Builds a pattern from a subtree of an existing state (the goal edge and
/// everything it references), relabeling nothing.
GoalPattern pattern_from_edge(const MathState& state, EdgeId root);

}  // namespace mathesis
