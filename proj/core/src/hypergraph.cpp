#include "mathesis/hypergraph.hpp"

#include <algorithm>

namespace mathesis {

std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::Scalar: return "scalar";
    case Domain::Matrix: return "matrix";
    case Domain::Point: return "point";
    case Domain::Line: return "line";
  }
  return "?";
}

std::string_view node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Variable: return "Variable";
    case NodeType::Constant: return "Constant";
    case NodeType::CompoundTerm: return "CompoundTerm";
  }
  return "?";
}

std::string_view edge_type_name(EdgeType t) {
  switch (t) {
    case EdgeType::Constructor: return "Constructor";
    case EdgeType::Predicate: return "Predicate";
    case EdgeType::Connective: return "Connective";
    case EdgeType::Quantifier: return "Quantifier";
  }
  return "?";
}

OperatorTable::OperatorTable() {
  auto add = [this](OperatorInfo info) {
    index_[info.name] = ops_.size();
    ops_.push_back(std::move(info));
  };
  using Sig = OperatorInfo::Signature;

  // Constructors. Sum/Product/Sub act on scalars or matrices; the result
  // domain follows the operands and is resolved at edge creation.
  add({"Sum", EdgeType::Constructor, {Sig{2, Domain::Scalar}, Sig{2, Domain::Matrix}},
       Domain::Scalar, /*commutative=*/true, /*scalar_liftable=*/true});
  add({"Product", EdgeType::Constructor, {Sig{2, Domain::Scalar}, Sig{2, Domain::Matrix}},
       Domain::Scalar, true, true});
  add({"Sub", EdgeType::Constructor, {Sig{2, Domain::Scalar}, Sig{2, Domain::Matrix}},
       Domain::Scalar, false, true});
  add({"Inverse", EdgeType::Constructor, {Sig{1, Domain::Matrix}}, Domain::Matrix, false, false});
  add({"Transpose", EdgeType::Constructor, {Sig{1, Domain::Matrix}}, Domain::Matrix, false, false});
  add({"Midpoint", EdgeType::Constructor, {Sig{2, Domain::Point}}, Domain::Point, false, false});
  add({"Line", EdgeType::Constructor, {Sig{2, Domain::Point}}, Domain::Line, false, false});

  // Predicates.
  add({"Equals", EdgeType::Predicate, {Sig{2, Domain::Scalar}, Sig{2, Domain::Matrix}},
       Domain::Scalar, false, false});
  add({"Symmetric", EdgeType::Predicate, {Sig{1, Domain::Matrix}}, Domain::Scalar, false, false});
  add({"Orthogonal", EdgeType::Predicate, {Sig{1, Domain::Matrix}}, Domain::Scalar, false, false});
  add({"MatMul", EdgeType::Predicate, {Sig{3, Domain::Matrix}}, Domain::Scalar, false, false});
  add({"InversePair", EdgeType::Predicate, {Sig{2, Domain::Matrix}}, Domain::Scalar, false, false});
  add({"Collinear", EdgeType::Predicate, {Sig{3, Domain::Point}}, Domain::Scalar, false, false});
  add({"Parallel", EdgeType::Predicate, {Sig{4, Domain::Point}, Sig{2, Domain::Line}},
       Domain::Scalar, false, false});
  add({"Perpendicular", EdgeType::Predicate, {Sig{4, Domain::Point}, Sig{2, Domain::Line}},
       Domain::Scalar, false, false});
  add({"Congruent", EdgeType::Predicate, {Sig{4, Domain::Point}}, Domain::Scalar, false, false});
  add({"RatioEquals", EdgeType::Predicate, {Sig{8, Domain::Point}}, Domain::Scalar, false, false});

  // Connectives (args are assertable edges).
  add({"Implies", EdgeType::Connective, {Sig{2, Domain::Scalar}}, Domain::Scalar, false, false});
  add({"And", EdgeType::Connective, {Sig{2, Domain::Scalar}}, Domain::Scalar, true, false});

  // Quantifier (one body edge + bound variables).
  add({"ForAll", EdgeType::Quantifier, {Sig{1, Domain::Scalar}}, Domain::Scalar, false, false});
}

const OperatorTable& OperatorTable::instance() {
  static OperatorTable table;
  return table;
}

const OperatorInfo* OperatorTable::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &ops_[it->second];
}

const OperatorInfo& OperatorTable::require(std::string_view name) const {
  const OperatorInfo* info = find(name);
  if (!info) throw TypingError("unknown operator '" + std::string(name) + "'");
  return *info;
}

namespace {
std::string name_key(NodeType type, std::string_view label) {
  return std::string(type == NodeType::Variable ? "V:" : "C:") + std::string(label);
}
}  // namespace

NodeId MathState::add_node(NodeType type, std::string_view label, Domain domain) {
  if (label.empty()) throw TypingError("add_node: empty label");
  if (type != NodeType::CompoundTerm) {
    auto key = name_key(type, label);
    if (named_nodes_.count(key))
      throw TypingError("add_node: duplicate " + std::string(node_type_name(type)) + " '" +
                        std::string(label) + "'");
    named_nodes_[key] = static_cast<NodeId>(nodes_.size());
  }
  Node n;
  n.id = static_cast<NodeId>(nodes_.size());
  n.type = type;
  n.label = std::string(label);
  n.domain = domain;
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

std::optional<NodeId> MathState::find_named(NodeType type, std::string_view label) const {
  auto it = named_nodes_.find(name_key(type, label));
  if (it == named_nodes_.end()) return std::nullopt;
  return it->second;
}

void MathState::check_edge_typing(EdgeType type, const OperatorInfo& info,
                                  const std::vector<EntityRef>& args,
                                  const std::vector<NodeId>& bound_vars) const {
  if (info.type != type)
    throw TypingError("operator '" + info.name + "' is a " +
                      std::string(edge_type_name(info.type)) + " edge, not " +
                      std::string(edge_type_name(type)));
  for (EntityRef ref : args) {
    if (!resolves(ref)) throw TypingError("edge arg does not resolve");
  }

  // Arity and per-signature domain check.
  const OperatorInfo::Signature* matched = nullptr;
  std::string domain_err;
  for (const auto& sig : info.signatures) {
    if (static_cast<int>(args.size()) != sig.arity) continue;
    bool ok = true;
    switch (type) {
      case EdgeType::Constructor:
      case EdgeType::Predicate:
        for (EntityRef ref : args) {
          if (!ref.is_node()) {
            ok = false;
            domain_err = "edge ref passed where a node is required";
            break;
          }
          if (node(ref.id).domain != sig.arg_domain) {
            ok = false;
            domain_err = "operand domain " + std::string(domain_name(node(ref.id).domain)) +
                         " does not fit '" + info.name + "'";
            break;
          }
        }
        break;
      case EdgeType::Connective:
      case EdgeType::Quantifier:
        for (EntityRef ref : args) {
          if (!ref.is_edge()) {
            ok = false;
            domain_err = "node ref passed where an edge is required";
            break;
          }
          if (!is_assertable(edge(ref.id).type)) {
            ok = false;
            domain_err = "constructor edge cannot be a logical operand";
            break;
          }
        }
        break;
    }
    if (ok) {
      matched = &sig;
      break;
    }
  }
  if (!matched) {
    if (!domain_err.empty()) throw TypingError("operator '" + info.name + "': " + domain_err);
    throw TypingError("operator '" + info.name + "': arity mismatch (got " +
                      std::to_string(args.size()) + ")");
  }

  if (type == EdgeType::Quantifier) {
    if (bound_vars.empty()) throw TypingError("quantifier needs a nonempty bound variable set");
    for (NodeId v : bound_vars) {
      if (!has_node(v) || node(v).type != NodeType::Variable)
        throw TypingError("quantifier bound entries must be Variable nodes");
    }
  } else if (!bound_vars.empty()) {
    throw TypingError("bound variables are only valid on quantifier edges");
  }
}

EdgeId MathState::add_edge(EdgeType type, std::string_view op, std::vector<EntityRef> args,
                           std::vector<NodeId> bound_vars) {
  const OperatorInfo& info = OperatorTable::instance().require(op);
  std::sort(bound_vars.begin(), bound_vars.end());
  bound_vars.erase(std::unique(bound_vars.begin(), bound_vars.end()), bound_vars.end());
  check_edge_typing(type, info, args, bound_vars);

  Hyperedge e;
  e.id = static_cast<EdgeId>(edges_.size());
  e.type = type;
  e.op = std::string(op);
  e.args = std::move(args);
  e.bound_vars = std::move(bound_vars);

  if (type == EdgeType::Constructor) {
    // Result domain follows the operands for the domain-generic constructors.
    Domain out = info.output_domain;
    if (info.name == "Sum" || info.name == "Product" || info.name == "Sub")
      out = node(e.args.front().id).domain;
    NodeId out_node = add_node(NodeType::CompoundTerm, info.name, out);
    nodes_[out_node].definition = e.id;
    e.output = out_node;
  }
  for (NodeId v : e.bound_vars) binder_vars_.insert(v);
  edges_.push_back(std::move(e));
  return edges_.back().id;
}

void MathState::assert_fact(EdgeId id) {
  const Hyperedge& e = edge(id);
  if (!is_assertable(e.type))
    throw TypingError("constructor edges are definitions, not assertions");
  facts_.insert(id);
}

const Node& MathState::node(NodeId id) const {
  if (!has_node(id)) throw Error("node id out of range");
  return nodes_[id];
}

const Hyperedge& MathState::edge(EdgeId id) const {
  if (!has_edge(id)) throw Error("edge id out of range");
  return edges_[id];
}

std::optional<EdgeId> MathState::find_identical_edge(EdgeType type, std::string_view op,
                                                     const std::vector<EntityRef>& args,
                                                     const std::vector<NodeId>& bound_vars) const {
  for (const Hyperedge& e : edges_) {
    if (e.type == type && e.op == op && e.args == args && e.bound_vars == bound_vars)
      return e.id;
  }
  return std::nullopt;
}

std::vector<EntityRef> MathState::encode_inputs(EdgeId id) const {
  const Hyperedge& e = edge(id);
  std::vector<EntityRef> in = e.args;
  if (e.output) in.push_back(node_ref(*e.output));
  for (NodeId v : e.bound_vars) in.push_back(node_ref(v));
  return in;
}

std::vector<EdgeId> MathState::parents_of(EntityRef ref) const {
  std::vector<EdgeId> out;
  for (const Hyperedge& e : edges_) {
    bool hit = std::find(e.args.begin(), e.args.end(), ref) != e.args.end();
    if (!hit && ref.is_node()) {
      hit = (e.output && *e.output == ref.id) ||
            std::find(e.bound_vars.begin(), e.bound_vars.end(), ref.id) != e.bound_vars.end();
    }
    if (hit) out.push_back(e.id);
  }
  return out;
}

std::vector<NodeId> MathState::term_leaves(NodeId root) const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{root};
  std::set<NodeId> seen;
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    out.push_back(n);
    const Node& nd = node(n);
    if (nd.definition) {
      for (EntityRef ref : edge(*nd.definition).args) stack.push_back(ref.id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool MathState::term_contains(NodeId root, NodeId target) const {
  auto all = term_leaves(root);
  return std::binary_search(all.begin(), all.end(), target);
}

void MathState::validate() const {
  for (const Node& n : nodes_) {
    if (n.type == NodeType::CompoundTerm) {
      if (!n.definition) throw TypingError("compound node without defining constructor");
      const Hyperedge& def = edge(*n.definition);
      if (def.type != EdgeType::Constructor || !def.output || *def.output != n.id)
        throw TypingError("compound node definition link broken");
    } else if (n.definition) {
      throw TypingError("non-compound node has a definition");
    }
  }
  int idx = 0;
  for (const Hyperedge& e : edges_) {
    if (e.id != static_cast<EdgeId>(idx++)) throw TypingError("edge id sequence broken");
    const OperatorInfo& info = OperatorTable::instance().require(e.op);
    check_edge_typing(e.type, info, e.args, e.bound_vars);
    // Acyclicity: every reference points strictly below the edge's own id in
    // creation order for edge refs (states only grow, refs resolve at
    // creation), which the construction API guarantees. Verify anyway.
    for (EntityRef ref : e.args) {
      if (ref.is_edge() && ref.id >= e.id) throw TypingError("forward edge reference");
    }
  }
  for (EdgeId f : facts_) {
    if (!has_edge(f) || !is_assertable(edge(f).type))
      throw TypingError("fact set contains a non-assertable edge");
  }
}

}  // namespace mathesis
