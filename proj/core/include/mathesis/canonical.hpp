#pragma once

#include <cstdint>
#include <map>

#include "mathesis/hypergraph.hpp"

namespace mathesis {

/// Structural hash of an entity: depends only on labels, operators and
/// shape, never on ids, so identical subtrees built in different states
/// hash equally. Child hashes of operators declared commutative are
/// combined order-insensitively; all others order-sensitively.
std::uint64_t canonical_hash(const MathState& state, EntityRef ref);

/// Computes hashes for every entity in one pass (memoized); keyed by ref.
class StateHasher {
 public:
  explicit StateHasher(const MathState& state) : state_(state) {}
  std::uint64_t hash(EntityRef ref);
  std::map<EntityRef, std::uint64_t> hash_all();

 private:
  const MathState& state_;
  std::map<EntityRef, std::uint64_t> memo_;
};

/// Order-independent fingerprint of a whole state (entity hash multiset plus
/// fact hash multiset). Two isomorphic states fingerprint equally.
std::uint64_t state_fingerprint(const MathState& state);

}  // namespace mathesis
