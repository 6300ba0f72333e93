#include "mathesis/rules.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

namespace mathesis {

namespace {

constexpr std::uint16_t kModusPonens = 0;
constexpr std::uint16_t kAndIntro = 1;
constexpr std::uint16_t kAndElim = 2;
constexpr std::uint16_t kSubstitution = 3;
constexpr std::uint16_t kInstantiation = 4;
constexpr std::uint16_t kEqSym = 5;
constexpr std::uint16_t kEqTrans = 6;
constexpr std::uint16_t kFirstConstructor = 7;

const char* kConstructorOps[] = {"Sum", "Product", "Sub", "Inverse", "Transpose",
                                 "Midpoint", "Line"};

bool fact_with_op(const MathState& s, EntityRef ref, const char* op) {
  return ref.is_edge() && s.has_edge(ref.id) && s.is_fact(ref.id) && s.edge(ref.id).op == op;
}

/// Result of rewriting a subtree: the rewritten entity id, plus whether
/// anything actually changed (unchanged subtrees are shared, not copied).
struct Rewritten {
  std::uint32_t id = 0;
  bool changed = false;
  bool exists = true;  // probe mode: false once a fresh entity is required
};

/// Rewrites the term/formula DAG under `ref`, substituting whole nodes per
/// `subst`. In probe mode (state const) nothing is created; `exists` reports
/// whether the rewritten structure is already present in the state.
class Rewriter {
 public:
  Rewriter(const MathState& base, MathState* out, const std::map<NodeId, NodeId>& subst)
      : base_(base), out_(out), subst_(subst) {}

  Rewritten node(NodeId id) {
    auto it = nmemo_.find(id);
    if (it != nmemo_.end()) return it->second;
    Rewritten r{id, false, true};
    auto sub = subst_.find(id);
    if (sub != subst_.end()) {
      r = {sub->second, sub->second != id, true};
    } else {
      const Node& n = base_.node(id);
      if (n.type == NodeType::CompoundTerm) {
        Rewritten def = edge(*n.definition);
        if (def.changed) {
          if (!def.exists) {
            r = {0, true, false};
          } else {
            const MathState& where = out_ ? *out_ : base_;
            r = {*where.edge(def.id).output, true, true};
          }
        }
      }
    }
    nmemo_[id] = r;
    return r;
  }

  Rewritten edge(EdgeId id) {
    auto it = ememo_.find(id);
    if (it != ememo_.end()) return it->second;
    const Hyperedge& e = base_.edge(id);
    bool changed = false;
    bool exists = true;
    std::vector<EntityRef> args;
    args.reserve(e.args.size());
    for (EntityRef a : e.args) {
      Rewritten ra = a.is_node() ? node(a.id) : edge(a.id);
      changed |= ra.changed;
      exists &= ra.exists;
      args.push_back({a.kind, ra.id});
    }
    std::vector<NodeId> bound;
    bound.reserve(e.bound_vars.size());
    for (NodeId v : e.bound_vars) {
      Rewritten rv = node(v);
      changed |= rv.changed;
      exists &= rv.exists;
      bound.push_back(rv.id);
    }
    Rewritten r;
    if (!changed) {
      r = {id, false, true};
    } else if (!exists) {
      r = {0, true, false};
    } else {
      r = materialize(e.type, e.op, std::move(args), std::move(bound));
    }
    ememo_[id] = r;
    return r;
  }

 private:
  Rewritten materialize(EdgeType type, const std::string& op, std::vector<EntityRef> args,
                        std::vector<NodeId> bound) {
    std::sort(bound.begin(), bound.end());
    if (out_) {
      return {build_edge_shared(*out_, type, op, std::move(args), std::move(bound)), true, true};
    }
    auto found = base_.find_identical_edge(type, op, args, bound);
    if (found) return {*found, true, true};
    return {0, true, false};
  }

  const MathState& base_;
  MathState* out_;
  const std::map<NodeId, NodeId>& subst_;
  std::map<NodeId, Rewritten> nmemo_;
  std::map<EdgeId, Rewritten> ememo_;
};

}  // namespace

EdgeId build_edge_shared(MathState& state, EdgeType type, const std::string& op,
                         std::vector<EntityRef> args, std::vector<NodeId> bound_vars) {
  if (auto found = state.find_identical_edge(type, op, args, bound_vars)) return *found;
  return state.add_edge(type, op, std::move(args), std::move(bound_vars));
}

std::vector<EdgeId> subtree_edges(const MathState& state, EdgeId root) {
  std::vector<EdgeId> out;
  std::set<EdgeId> seen;
  std::function<void(EdgeId)> walk = [&](EdgeId id) {
    if (!seen.insert(id).second) return;
    out.push_back(id);
    for (EntityRef a : state.edge(id).args) {
      if (a.is_edge()) {
        walk(a.id);
      } else if (state.node(a.id).definition) {
        walk(*state.node(a.id).definition);
      }
    }
  };
  walk(root);
  std::sort(out.begin(), out.end());
  return out;
}

RuleLibrary::RuleLibrary(int term_budget) : term_budget_(term_budget) {
  rules_ = {
      {"ModusPonens", {SlotClass::FactImplies}, false},
      {"AndIntro", {SlotClass::FactAssertable, SlotClass::FactAssertable}, false},
      {"AndElim", {SlotClass::FactAnd}, false},
      {"Substitution",
       {SlotClass::FactEquals, SlotClass::FactAssertable, SlotClass::RewriteHostEdge},
       false},
      {"Instantiate",
       {SlotClass::FactForAll, SlotClass::VariableNode, SlotClass::ScalarTermNode},
       false},
      {"EqualitySymmetry", {SlotClass::FactEquals}, false},
      {"EqualityTransitivity", {SlotClass::FactEquals, SlotClass::FactEquals}, false},
  };
  for (const char* op : kConstructorOps) {
    const OperatorInfo& info = OperatorTable::instance().require(op);
    std::vector<SlotClass> slots;
    int arity = info.signatures.front().arity;
    SlotClass cls;
    if (op == std::string("Midpoint") || op == std::string("Line"))
      cls = SlotClass::PointTermNode;
    else if (op == std::string("Inverse") || op == std::string("Transpose"))
      cls = SlotClass::MatrixTermNode;
    else
      cls = SlotClass::AlgebraicTermNode;
    for (int i = 0; i < arity; ++i) slots.push_back(cls);
    rules_.push_back({op, std::move(slots), true});
  }
}

int RuleLibrary::find(std::string_view name) const {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (rules_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const RuleSpec& RuleLibrary::rule(std::size_t idx) const {
  if (idx >= rules_.size()) throw RuleError("rule index out of range");
  return rules_[idx];
}

bool RuleLibrary::slot_accepts(const MathState& s, SlotClass slot, EntityRef ref) const {
  if (!s.resolves(ref)) return false;
  switch (slot) {
    case SlotClass::FactImplies: return fact_with_op(s, ref, "Implies");
    case SlotClass::FactAnd: return fact_with_op(s, ref, "And");
    case SlotClass::FactEquals: return fact_with_op(s, ref, "Equals");
    case SlotClass::FactForAll: return fact_with_op(s, ref, "ForAll");
    case SlotClass::FactAssertable: return ref.is_edge() && s.is_fact(ref.id);
    case SlotClass::RewriteHostEdge:
      return ref.is_edge() && (s.edge(ref.id).type == EdgeType::Predicate ||
                               s.edge(ref.id).type == EdgeType::Constructor);
    case SlotClass::VariableNode:
      return ref.is_node() && s.node(ref.id).type == NodeType::Variable;
    case SlotClass::ScalarTermNode:
      return ref.is_node() && s.node(ref.id).domain == Domain::Scalar &&
             !s.is_binder_var(ref.id);
    case SlotClass::AlgebraicTermNode:
      return ref.is_node() &&
             (s.node(ref.id).domain == Domain::Scalar ||
              s.node(ref.id).domain == Domain::Matrix) &&
             !s.is_binder_var(ref.id);
    case SlotClass::MatrixTermNode:
      return ref.is_node() && s.node(ref.id).domain == Domain::Matrix &&
             !s.is_binder_var(ref.id);
    case SlotClass::PointTermNode:
      return ref.is_node() && s.node(ref.id).domain == Domain::Point &&
             !s.is_binder_var(ref.id);
  }
  return false;
}

std::optional<std::string> RuleLibrary::validate(const MathState& s, const Action& a) const {
  if (a.rule >= rules_.size()) return "unknown rule index";
  const RuleSpec& spec = rules_[a.rule];
  if (a.operands.size() != spec.slots.size())
    return spec.name + ": expected " + std::to_string(spec.slots.size()) + " operands";
  for (std::size_t i = 0; i < spec.slots.size(); ++i) {
    if (!slot_accepts(s, spec.slots[i], a.operands[i]))
      return spec.name + ": operand " + std::to_string(i + 1) + " has wrong type";
  }

  switch (a.rule) {
    case kModusPonens: {
      const Hyperedge& imp = s.edge(a.operands[0].id);
      EdgeId premise = imp.args[0].id;
      EdgeId conclusion = imp.args[1].id;
      if (!s.is_fact(premise)) return "ModusPonens: antecedent is not a fact";
      if (s.is_fact(conclusion)) return "ModusPonens: consequent already derived";
      return std::nullopt;
    }
    case kAndIntro: {
      auto existing = s.find_identical_edge(EdgeType::Connective, "And",
                                            {a.operands[0], a.operands[1]});
      if (existing && s.is_fact(*existing)) return "AndIntro: conjunction already derived";
      return std::nullopt;
    }
    case kAndElim: {
      const Hyperedge& e = s.edge(a.operands[0].id);
      if (s.is_fact(e.args[0].id) && s.is_fact(e.args[1].id))
        return "AndElim: both conjuncts already derived";
      return std::nullopt;
    }
    case kSubstitution: {
      const Hyperedge& eq = s.edge(a.operands[0].id);
      NodeId u = eq.args[0].id;
      if (u == eq.args[1].id) return "Substitution: trivial equality";
      EdgeId host = a.operands[1].id;
      EdgeId occ = a.operands[2].id;
      auto scope = subtree_edges(s, host);
      if (!std::binary_search(scope.begin(), scope.end(), occ))
        return "Substitution: occurrence edge is not inside the host fact";
      const Hyperedge& p = s.edge(occ);
      if (std::find(p.args.begin(), p.args.end(), node_ref(u)) == p.args.end())
        return "Substitution: left-hand side does not occur in the chosen edge";
      return std::nullopt;
    }
    case kInstantiation: {
      const Hyperedge& q = s.edge(a.operands[0].id);
      NodeId var = a.operands[1].id;
      NodeId term = a.operands[2].id;
      if (std::find(q.bound_vars.begin(), q.bound_vars.end(), var) == q.bound_vars.end())
        return "Instantiate: variable is not bound by this quantifier";
      for (NodeId leaf : s.term_leaves(term)) {
        if (s.is_binder_var(leaf)) return "Instantiate: term would capture a bound variable";
      }
      // Freshness: probe the instantiated conclusion without creating it.
      std::map<NodeId, NodeId> subst{{var, term}};
      Rewriter probe(s, nullptr, subst);
      Rewritten body = probe.edge(q.args[0].id);
      if (!body.exists) return std::nullopt;
      std::vector<NodeId> rest;
      for (NodeId v : q.bound_vars)
        if (v != var) rest.push_back(v);
      if (rest.empty()) {
        if (s.is_fact(body.id)) return "Instantiate: instance already derived";
      } else {
        auto found = s.find_identical_edge(EdgeType::Quantifier, "ForAll",
                                           {edge_ref(body.id)}, rest);
        if (found && s.is_fact(*found)) return "Instantiate: instance already derived";
      }
      return std::nullopt;
    }
    case kEqSym: {
      const Hyperedge& eq = s.edge(a.operands[0].id);
      auto flipped = s.find_identical_edge(EdgeType::Predicate, "Equals",
                                           {eq.args[1], eq.args[0]});
      if (flipped && s.is_fact(*flipped)) return "EqualitySymmetry: already derived";
      return std::nullopt;
    }
    case kEqTrans: {
      const Hyperedge& e1 = s.edge(a.operands[0].id);
      const Hyperedge& e2 = s.edge(a.operands[1].id);
      if (e1.args[1] != e2.args[0]) return "EqualityTransitivity: middle terms differ";
      auto existing = s.find_identical_edge(EdgeType::Predicate, "Equals",
                                            {e1.args[0], e2.args[1]});
      if (existing && s.is_fact(*existing)) return "EqualityTransitivity: already derived";
      return std::nullopt;
    }
    default: {
      // Constructor rules.
      const RuleSpec& ctor = spec;
      if (static_cast<int>(s.node_count()) > term_budget_)
        return ctor.name + ": term budget exhausted";
      Domain d0 = s.node_domain(a.operands[0].id);
      for (EntityRef ref : a.operands) {
        if (s.node_domain(ref.id) != d0)
          return ctor.name + ": mixed operand domains";
      }
      std::vector<EntityRef> args(a.operands.begin(), a.operands.end());
      if (s.find_identical_edge(EdgeType::Constructor, ctor.name, args))
        return ctor.name + ": term already constructed";
      return std::nullopt;
    }
  }
}

MathState RuleLibrary::apply(const MathState& s, const Action& a) const {
  if (auto err = validate(s, a)) throw RuleError(*err);
  MathState out = s;
  switch (a.rule) {
    case kModusPonens: {
      out.assert_fact(out.edge(a.operands[0].id).args[1].id);
      break;
    }
    case kAndIntro: {
      EdgeId e = build_edge_shared(out, EdgeType::Connective, "And",
                                   {a.operands[0], a.operands[1]});
      out.assert_fact(e);
      break;
    }
    case kAndElim: {
      const Hyperedge e = out.edge(a.operands[0].id);
      out.assert_fact(e.args[0].id);
      out.assert_fact(e.args[1].id);
      break;
    }
    case kSubstitution: {
      const Hyperedge& eq = s.edge(a.operands[0].id);
      NodeId u = eq.args[0].id;
      NodeId v = eq.args[1].id;
      EdgeId host = a.operands[1].id;
      EdgeId occ = a.operands[2].id;
      // Rebuild the occurrence edge with its first u-argument replaced, then
      // rebuild every ancestor inside the host that reaches it.
      const Hyperedge& p = s.edge(occ);
      std::vector<EntityRef> pargs = p.args;
      for (EntityRef& ref : pargs) {
        if (ref == node_ref(u)) {
          ref = node_ref(v);
          break;
        }
      }
      EdgeId new_occ = build_edge_shared(out, p.type, p.op, std::move(pargs), p.bound_vars);

      // Propagate the changed edge upward through the host subtree.
      std::map<EdgeId, EdgeId> rebuilt{{occ, new_occ}};
      std::function<EdgeId(EdgeId)> rebuild = [&](EdgeId id) -> EdgeId {
        auto it = rebuilt.find(id);
        if (it != rebuilt.end()) return it->second;
        const Hyperedge& e = s.edge(id);
        bool changed = false;
        std::vector<EntityRef> args;
        args.reserve(e.args.size());
        for (EntityRef ref : e.args) {
          EntityRef mapped = ref;
          if (ref.is_edge()) {
            EdgeId r = rebuild(ref.id);
            mapped = edge_ref(r);
            changed |= (r != ref.id);
          } else if (s.node(ref.id).definition) {
            EdgeId r = rebuild(*s.node(ref.id).definition);
            if (r != *s.node(ref.id).definition) {
              mapped = node_ref(*out.edge(r).output);
              changed = true;
            }
          }
          args.push_back(mapped);
        }
        EdgeId result = id;
        if (changed)
          result = build_edge_shared(out, e.type, e.op, std::move(args), e.bound_vars);
        rebuilt[id] = result;
        return result;
      };
      out.assert_fact(rebuild(host));
      break;
    }
    case kInstantiation: {
      const Hyperedge& q = s.edge(a.operands[0].id);
      NodeId var = a.operands[1].id;
      NodeId term = a.operands[2].id;
      std::map<NodeId, NodeId> subst{{var, term}};
      Rewriter rw(s, &out, subst);
      Rewritten body = rw.edge(q.args[0].id);
      std::vector<NodeId> rest;
      for (NodeId v : q.bound_vars)
        if (v != var) rest.push_back(v);
      if (rest.empty()) {
        out.assert_fact(body.id);
      } else {
        out.assert_fact(build_edge_shared(out, EdgeType::Quantifier, "ForAll",
                                          {edge_ref(body.id)}, std::move(rest)));
      }
      break;
    }
    case kEqSym: {
      const Hyperedge& eq = s.edge(a.operands[0].id);
      EdgeId e = build_edge_shared(out, EdgeType::Predicate, "Equals",
                                   {eq.args[1], eq.args[0]});
      out.assert_fact(e);
      break;
    }
    case kEqTrans: {
      const Hyperedge& e1 = s.edge(a.operands[0].id);
      const Hyperedge& e2 = s.edge(a.operands[1].id);
      EdgeId e = build_edge_shared(out, EdgeType::Predicate, "Equals",
                                   {e1.args[0], e2.args[1]});
      out.assert_fact(e);
      break;
    }
    default: {
      std::vector<EntityRef> args(a.operands.begin(), a.operands.end());
      out.add_edge(EdgeType::Constructor, rules_[a.rule].name, std::move(args));
      break;
    }
  }
  return out;
}

std::vector<Action> RuleLibrary::legal_actions(const MathState& s) const {
  std::vector<Action> out;

  // Candidate pools per slot class, ascending entity order.
  auto pool = [&](SlotClass cls) {
    std::vector<EntityRef> v;
    for (const Node& n : s.nodes()) {
      EntityRef r = node_ref(n.id);
      if (slot_accepts(s, cls, r)) v.push_back(r);
    }
    for (const Hyperedge& e : s.edges()) {
      EntityRef r = edge_ref(e.id);
      if (slot_accepts(s, cls, r)) v.push_back(r);
    }
    return v;
  };

  auto try_push = [&](Action a) {
    if (!validate(s, a)) out.push_back(std::move(a));
  };

  for (std::uint16_t r = 0; r < rules_.size(); ++r) {
    const RuleSpec& spec = rules_[r];
    if (r == kSubstitution) {
      // Enumerate occurrences within each host instead of the full product.
      auto eqs = pool(SlotClass::FactEquals);
      for (EntityRef eq_ref : eqs) {
        const Hyperedge& eq = s.edge(eq_ref.id);
        NodeId u = eq.args[0].id;
        if (u == eq.args[1].id) continue;
        for (EdgeId host : s.facts()) {
          for (EdgeId occ : subtree_edges(s, host)) {
            const Hyperedge& p = s.edge(occ);
            if (p.type != EdgeType::Predicate && p.type != EdgeType::Constructor) continue;
            if (std::find(p.args.begin(), p.args.end(), node_ref(u)) == p.args.end()) continue;
            try_push(Action{r, {eq_ref, edge_ref(host), edge_ref(occ)}});
          }
        }
      }
      continue;
    }
    if (r == kInstantiation) {
      for (EntityRef q_ref : pool(SlotClass::FactForAll)) {
        const Hyperedge& q = s.edge(q_ref.id);
        for (NodeId var : q.bound_vars) {
          for (EntityRef term : pool(SlotClass::ScalarTermNode)) {
            try_push(Action{r, {q_ref, node_ref(var), term}});
          }
        }
      }
      continue;
    }
    // Generic Cartesian enumeration over slot pools.
    std::vector<std::vector<EntityRef>> pools;
    pools.reserve(spec.slots.size());
    bool empty = false;
    for (SlotClass cls : spec.slots) {
      pools.push_back(pool(cls));
      if (pools.back().empty()) {
        empty = true;
        break;
      }
    }
    if (empty) continue;
    std::vector<std::size_t> idx(spec.slots.size(), 0);
    bool done = false;
    while (!done) {
      Action a{r, {}};
      a.operands.reserve(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) a.operands.push_back(pools[i][idx[i]]);
      try_push(std::move(a));
      std::size_t i = idx.size();
      while (true) {
        if (i == 0) {
          done = true;
          break;
        }
        --i;
        if (++idx[i] < pools[i].size()) break;
        idx[i] = 0;
      }
    }
  }
  return out;
}

std::string RuleLibrary::action_text(const Action& a) const {
  std::ostringstream os;
  os << rule(a.rule).name << '(';
  for (std::size_t i = 0; i < a.operands.size(); ++i) {
    if (i) os << ',';
    os << (a.operands[i].is_node() ? 'N' : 'E') << a.operands[i].id;
  }
  os << ')';
  return os.str();
}

Action RuleLibrary::parse_action_text(const std::string& text) const {
  auto lp = text.find('(');
  if (lp == std::string::npos || text.back() != ')')
    throw Error("bad action text: " + text);
  int idx = find(text.substr(0, lp));
  if (idx < 0) throw Error("unknown rule in action text: " + text);
  Action a{static_cast<std::uint16_t>(idx), {}};
  std::string inner = text.substr(lp + 1, text.size() - lp - 2);
  std::istringstream is(inner);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) throw Error("bad operand in action text: " + text);
    EntityKind kind;
    if (tok[0] == 'N')
      kind = EntityKind::Node;
    else if (tok[0] == 'E')
      kind = EntityKind::Edge;
    else
      throw Error("bad operand in action text: " + text);
    a.operands.push_back({kind, static_cast<std::uint32_t>(std::stoul(tok.substr(1)))});
  }
  return a;
}

}  // namespace mathesis
