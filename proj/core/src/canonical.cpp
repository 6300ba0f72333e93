#include "mathesis/canonical.hpp"

#include <algorithm>
#include <vector>

#include "mathesis/rng.hpp"

namespace mathesis {
namespace {

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64-style combiner; good avalanche keeps the desk-scale
  // collision-freedom property honest.
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  std::uint64_t z = h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kNodeTag = 0x4e4f44455f544147ull;
constexpr std::uint64_t kEdgeTag = 0x454447455f544147ull;

}  // namespace

std::uint64_t StateHasher::hash(EntityRef ref) {
  auto it = memo_.find(ref);
  if (it != memo_.end()) return it->second;

  std::uint64_t h = 0;
  if (ref.is_node()) {
    const Node& n = state_.node(ref.id);
    if (n.type == NodeType::CompoundTerm) {
      h = mix(kNodeTag, hash(edge_ref(*n.definition)));
    } else {
      h = mix(kNodeTag, static_cast<std::uint64_t>(n.type));
      h = mix(h, static_cast<std::uint64_t>(n.domain));
      h = mix(h, fnv1a(n.label));
    }
  } else {
    const Hyperedge& e = state_.edge(ref.id);
    const OperatorInfo& info = OperatorTable::instance().require(e.op);
    h = mix(kEdgeTag, static_cast<std::uint64_t>(e.type));
    h = mix(h, fnv1a(e.op));
    std::vector<std::uint64_t> child;
    child.reserve(e.args.size());
    for (EntityRef a : e.args) child.push_back(hash(a));
    if (info.commutative) std::sort(child.begin(), child.end());
    for (std::uint64_t c : child) h = mix(h, c);
    if (!e.bound_vars.empty()) {
      std::vector<std::uint64_t> binders;
      binders.reserve(e.bound_vars.size());
      for (NodeId v : e.bound_vars) binders.push_back(hash(node_ref(v)));
      std::sort(binders.begin(), binders.end());
      for (std::uint64_t b : binders) h = mix(h, b);
    }
  }
  memo_[ref] = h;
  return h;
}

std::map<EntityRef, std::uint64_t> StateHasher::hash_all() {
  for (const Node& n : state_.nodes()) hash(node_ref(n.id));
  for (const Hyperedge& e : state_.edges()) hash(edge_ref(e.id));
  return memo_;
}

std::uint64_t canonical_hash(const MathState& state, EntityRef ref) {
  if (!state.resolves(ref)) throw Error("canonical_hash: entity does not resolve");
  StateHasher hasher(state);
  return hasher.hash(ref);
}

std::uint64_t state_fingerprint(const MathState& state) {
  StateHasher hasher(state);
  std::vector<std::uint64_t> entity_hashes;
  entity_hashes.reserve(state.entity_count());
  for (const Node& n : state.nodes()) entity_hashes.push_back(hasher.hash(node_ref(n.id)));
  for (const Hyperedge& e : state.edges()) entity_hashes.push_back(hasher.hash(edge_ref(e.id)));
  std::sort(entity_hashes.begin(), entity_hashes.end());

  std::vector<std::uint64_t> fact_hashes;
  fact_hashes.reserve(state.facts().size());
  for (EdgeId f : state.facts()) fact_hashes.push_back(hasher.hash(edge_ref(f)));
  std::sort(fact_hashes.begin(), fact_hashes.end());

  std::uint64_t h = 0x53544154ull;
  for (std::uint64_t v : entity_hashes) h = mix(h, v);
  h = mix(h, 0xfac7ull);
  for (std::uint64_t v : fact_hashes) h = mix(h, v);
  return h;
}

}  // namespace mathesis
