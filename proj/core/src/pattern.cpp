#include "mathesis/pattern.hpp"

#include <algorithm>

namespace mathesis {
namespace {

bool is_pattern_var(const Node& n) {
  return n.type == NodeType::Variable && !n.label.empty() && n.label[0] == '?';
}

/// Structure-directed matcher. Matching is deterministic per candidate root:
/// every pattern position has exactly one state counterpart, so there are no
/// choice points and at most one match per root edge.
struct Matcher {
  const MathState& state;
  const MathState& pattern;
  std::map<NodeId, EntityRef> node_map;
  std::map<EdgeId, EdgeId> edge_map;

  bool match_node(NodeId p, NodeId s) {
    auto it = node_map.find(p);
    if (it != node_map.end()) return it->second == node_ref(s);
    const Node& pn = pattern.node(p);
    const Node& sn = state.node(s);
    if (is_pattern_var(pn)) {
      node_map[p] = node_ref(s);
      return true;
    }
    if (pn.type != sn.type) return false;
    if (pn.type == NodeType::CompoundTerm) {
      if (!sn.definition) return false;
      if (!match_edge(*pn.definition, *sn.definition)) return false;
    } else {
      if (pn.label != sn.label || pn.domain != sn.domain) return false;
    }
    node_map[p] = node_ref(s);
    return true;
  }

  bool match_edge(EdgeId p, EdgeId s) {
    auto it = edge_map.find(p);
    if (it != edge_map.end()) return it->second == s;
    const Hyperedge& pe = pattern.edge(p);
    const Hyperedge& se = state.edge(s);
    if (pe.type != se.type || pe.op != se.op) return false;
    if (pe.args.size() != se.args.size() || pe.bound_vars.size() != se.bound_vars.size())
      return false;
    edge_map[p] = s;  // pre-register so cyclic references cannot recurse
    for (std::size_t i = 0; i < pe.args.size(); ++i) {
      EntityRef pa = pe.args[i], sa = se.args[i];
      if (pa.kind != sa.kind) return false;
      bool ok = pa.is_node() ? match_node(pa.id, sa.id) : match_edge(pa.id, sa.id);
      if (!ok) return false;
    }
    for (std::size_t i = 0; i < pe.bound_vars.size(); ++i) {
      if (!match_node(pe.bound_vars[i], se.bound_vars[i])) return false;
    }
    return true;
  }
};

}  // namespace

std::vector<PatternMatch> match_goal(const MathState& state, const GoalPattern& pattern) {
  pattern.graph.validate();
  std::vector<PatternMatch> out;
  for (const Hyperedge& candidate : state.edges()) {
    Matcher m{state, pattern.graph, {}, {}};
    if (m.match_edge(pattern.root, candidate.id)) {
      out.push_back(PatternMatch{candidate.id, std::move(m.node_map), std::move(m.edge_map)});
    }
  }
  return out;  // edges() iterates ascending id, so matches are ordered
}

bool goal_reached(const MathState& state, const GoalPattern& pattern) {
  for (const PatternMatch& m : match_goal(state, pattern)) {
    if (state.is_fact(m.root)) return true;
  }
  return false;
}

namespace {

NodeId copy_node(const MathState& src, NodeId id, MathState& dst,
                 std::map<NodeId, NodeId>& nmap, std::map<EdgeId, EdgeId>& emap);

EdgeId copy_edge(const MathState& src, EdgeId id, MathState& dst,
                 std::map<NodeId, NodeId>& nmap, std::map<EdgeId, EdgeId>& emap) {
  auto it = emap.find(id);
  if (it != emap.end()) return it->second;
  const Hyperedge& e = src.edge(id);
  std::vector<EntityRef> args;
  args.reserve(e.args.size());
  for (EntityRef a : e.args) {
    if (a.is_node())
      args.push_back(node_ref(copy_node(src, a.id, dst, nmap, emap)));
    else
      args.push_back(edge_ref(copy_edge(src, a.id, dst, nmap, emap)));
  }
  std::vector<NodeId> bound;
  bound.reserve(e.bound_vars.size());
  for (NodeId v : e.bound_vars) bound.push_back(copy_node(src, v, dst, nmap, emap));
  EdgeId ne = dst.add_edge(e.type, e.op, std::move(args), std::move(bound));
  emap[id] = ne;
  if (e.output) nmap[*e.output] = *dst.edge(ne).output;
  return ne;
}

NodeId copy_node(const MathState& src, NodeId id, MathState& dst,
                 std::map<NodeId, NodeId>& nmap, std::map<EdgeId, EdgeId>& emap) {
  auto it = nmap.find(id);
  if (it != nmap.end()) return it->second;
  const Node& n = src.node(id);
  if (n.type == NodeType::CompoundTerm) {
    copy_edge(src, *n.definition, dst, nmap, emap);
    return nmap.at(id);
  }
  NodeId nn = dst.add_node(n.type, n.label, n.domain);
  nmap[id] = nn;
  return nn;
}

}  // namespace

GoalPattern pattern_from_edge(const MathState& state, EdgeId root) {
  GoalPattern p;
  std::map<NodeId, NodeId> nmap;
  std::map<EdgeId, EdgeId> emap;
  p.root = copy_edge(state, root, p.graph, nmap, emap);
  return p;
}

}  // namespace mathesis
