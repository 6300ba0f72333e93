#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mathesis/hypergraph.hpp"

namespace mathesis {

/// One operator application: a rule symbol plus ordered operands drawn from
/// the current graph.
struct Action {
  std::uint16_t rule = 0;  // index into RuleLibrary::rules()
  std::vector<EntityRef> operands;

  bool operator==(const Action&) const = default;
  auto operator<=>(const Action&) const = default;
};

/// Static per-slot typing class. Slot classes are prefix-independent so the
/// policy can mask invalid entities per slot before any operand is chosen;
/// cross-operand compatibility is checked by full validation.
enum class SlotClass : std::uint8_t {
  FactImplies,      // Implies edge in the fact set
  FactAnd,          // And edge in the fact set
  FactEquals,       // Equals edge in the fact set
  FactForAll,       // ForAll edge in the fact set
  FactAssertable,   // any edge in the fact set
  RewriteHostEdge,  // node-bearing edge (Predicate or Constructor)
  VariableNode,     // Variable node (binders included)
  ScalarTermNode,   // scalar-domain node, binder variables excluded
  AlgebraicTermNode,// scalar- or matrix-domain node, binders excluded
  MatrixTermNode,   // matrix-domain node
  PointTermNode,    // point-domain node
};

struct RuleSpec {
  std::string name;
  std::vector<SlotClass> slots;
  bool is_constructor = false;  // gated by the term budget
};

/// The shipped derivation rules plus domain constructors. The deduction
/// rules the underlying calculus names but does not pin down are stood in
/// for by this minimal set; each apply() extends the graph and/or fact set
/// monotonically and never mutates its input.
class RuleLibrary {
 public:
  explicit RuleLibrary(int term_budget = 256);

  const std::vector<RuleSpec>& rules() const { return rules_; }
  int term_budget() const { return term_budget_; }
  int find(std::string_view name) const;  // -1 when unknown
  const RuleSpec& rule(std::size_t idx) const;

  /// Type-level mask: can this entity occupy the slot at all?
  bool slot_accepts(const MathState& state, SlotClass slot, EntityRef ref) const;

  /// Full precondition check; nullopt means the action is applicable.
  std::optional<std::string> validate(const MathState& state, const Action& a) const;

  /// Applies a validated action, returning a new state. Throws RuleError if
  /// preconditions do not hold; the input state is never modified.
  MathState apply(const MathState& state, const Action& a) const;

  /// Exactly the actions apply() accepts, in deterministic order (rule
  /// index, then ascending operand tuples). Constructor actions are absent
  /// once the node count exceeds the term budget.
  std::vector<Action> legal_actions(const MathState& state) const;

  std::string action_text(const Action& a) const;
  Action parse_action_text(const std::string& text) const;

 private:
  std::vector<RuleSpec> rules_;
  int term_budget_;
};

/// Edges reachable from `root` through edge args and compound-term
/// definitions, root included, ascending id.
std::vector<EdgeId> subtree_edges(const MathState& state, EdgeId root);

/// Dedupe-or-create: returns an existing structurally identical edge or adds
/// a new one.
EdgeId build_edge_shared(MathState& state, EdgeType type, const std::string& op,
                         std::vector<EntityRef> args, std::vector<NodeId> bound_vars = {});

}  // namespace mathesis
