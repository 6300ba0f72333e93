#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mathesis/errors.hpp"

namespace mathesis {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

enum class NodeType : std::uint8_t { Variable, Constant, CompoundTerm };
enum class EdgeType : std::uint8_t { Constructor, Predicate, Connective, Quantifier };
enum class EntityKind : std::uint8_t { Node, Edge };

/// Value domain a term evaluates into. Plain logical variables default to
/// Scalar; they participate in the polynomial ring like any other scalar.
enum class Domain : std::uint8_t { Scalar, Matrix, Point, Line };

struct EntityRef {
  EntityKind kind;
  std::uint32_t id;

  bool operator==(const EntityRef&) const = default;
  auto operator<=>(const EntityRef&) const = default;
  bool is_node() const { return kind == EntityKind::Node; }
  bool is_edge() const { return kind == EntityKind::Edge; }
};

inline EntityRef node_ref(NodeId id) { return {EntityKind::Node, id}; }
inline EntityRef edge_ref(EdgeId id) { return {EntityKind::Edge, id}; }

struct Node {
  NodeId id = 0;
  NodeType type = NodeType::Variable;
  std::string label;
  Domain domain = Domain::Scalar;
  /// Constructor edge whose output this node is (CompoundTerm only).
  std::optional<EdgeId> definition;
};

struct Hyperedge {
  EdgeId id = 0;
  EdgeType type = EdgeType::Predicate;
  std::string op;
  std::vector<EntityRef> args;       // ordered; order is semantic
  std::optional<NodeId> output;      // Constructor only
  std::vector<NodeId> bound_vars;    // Quantifier only, sorted ascending
};

/// Static signature of an operator symbol: edge type, accepted arities and
/// argument domains, result domain for constructors, commutativity for
/// canonical hashing.
struct OperatorInfo {
  std::string name;
  EdgeType type;
  /// Accepted (arity, arg domain) alternatives. For Predicate/Constructor
  /// ops args are nodes of the given domain; Connectives take edges and
  /// the domain entry is ignored.
  struct Signature {
    int arity;
    Domain arg_domain;
  };
  std::vector<Signature> signatures;
  Domain output_domain = Domain::Scalar;  // constructors
  bool commutative = false;
  /// Scalar instances of this constructor lift to polynomials.
  bool scalar_liftable = false;
};

/// The fixed operator vocabulary. Lookup by name; unknown names are rejected
/// at edge creation time.
class OperatorTable {
 public:
  static const OperatorTable& instance();
  const OperatorInfo* find(std::string_view name) const;
  const OperatorInfo& require(std::string_view name) const;
  const std::vector<OperatorInfo>& all() const { return ops_; }

 private:
  OperatorTable();
  std::vector<OperatorInfo> ops_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// A mathematical state: a typed directed higher-order hypergraph plus the
/// set of hyperedges currently asserted true. Value semantics; rule
/// application copies the state and extends the copy, so states already
/// handed out are never mutated.
class MathState {
 public:
  MathState() = default;

  /// Adds a node. Variable/Constant labels are unique per state.
  NodeId add_node(NodeType type, std::string_view label, Domain domain = Domain::Scalar);

  /// Adds an edge after full typing validation. Constructors also create and
  /// link their output CompoundTerm node. The new edge is NOT a fact.
  EdgeId add_edge(EdgeType type, std::string_view op, std::vector<EntityRef> args,
                  std::vector<NodeId> bound_vars = {});

  /// Marks an assertable (non-Constructor) edge as a fact. Idempotent.
  void assert_fact(EdgeId edge);

  bool has_node(NodeId id) const { return id < nodes_.size(); }
  bool has_edge(EdgeId id) const { return id < edges_.size(); }
  bool resolves(EntityRef ref) const {
    return ref.is_node() ? has_node(ref.id) : has_edge(ref.id);
  }

  const Node& node(NodeId id) const;
  const Hyperedge& edge(EdgeId id) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t entity_count() const { return nodes_.size() + edges_.size(); }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }

  bool is_fact(EdgeId id) const { return facts_.count(id) > 0; }
  const std::set<EdgeId>& facts() const { return facts_; }

  /// Looks up a node by (type, label); Variable/Constant names are unique.
  std::optional<NodeId> find_named(NodeType type, std::string_view label) const;

  /// Structurally identical existing edge (same type, op, args, bound vars),
  /// if any. Used to share derived conclusions instead of duplicating them.
  std::optional<EdgeId> find_identical_edge(EdgeType type, std::string_view op,
                                            const std::vector<EntityRef>& args,
                                            const std::vector<NodeId>& bound_vars = {}) const;

  /// True when the node is listed in some quantifier's bound variables.
  bool is_binder_var(NodeId id) const { return binder_vars_.count(id) > 0; }

  /// Edges that list the entity among their attention inputs (args, bound
  /// vars, or constructor output), ascending edge id.
  std::vector<EdgeId> parents_of(EntityRef ref) const;

  /// Ordered attention inputs of an edge: args, then constructor output,
  /// then bound vars. This is the neighborhood both message passing and
  /// parents_of agree on.
  std::vector<EntityRef> encode_inputs(EdgeId id) const;

  /// Domain of the value a node denotes.
  Domain node_domain(NodeId id) const { return node(id).domain; }

  /// All node ids in the term DAG rooted at the given node (inclusive),
  /// following constructor definitions. Ascending order.
  std::vector<NodeId> term_leaves(NodeId root) const;

  /// True if the term rooted at `root` contains `target` (node occurrence).
  bool term_contains(NodeId root, NodeId target) const;

  /// Checks every structural invariant; throws TypingError on violation.
  /// Used by tests and after unification.
  void validate() const;

 private:
  void check_edge_typing(EdgeType type, const OperatorInfo& info,
                         const std::vector<EntityRef>& args,
                         const std::vector<NodeId>& bound_vars) const;

  std::vector<Node> nodes_;
  std::vector<Hyperedge> edges_;
  std::set<EdgeId> facts_;
  std::set<NodeId> binder_vars_;
  std::map<std::string, NodeId> named_nodes_;  // "V:x" / "C:0" -> id

  friend MathState unify(const MathState&, const MathState&, struct UnifyStats*);
};

/// True for edge types that may enter the fact set.
inline bool is_assertable(EdgeType t) { return t != EdgeType::Constructor; }

/// Text name of a domain, for diagnostics.
std::string_view domain_name(Domain d);
std::string_view node_type_name(NodeType t);
std::string_view edge_type_name(EdgeType t);

}  // namespace mathesis
