#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "mathesis/canonical.hpp"
#include "mathesis/hypergraph.hpp"
#include "mathesis/pattern.hpp"
#include "mathesis/rng.hpp"
#include "mathesis/rules.hpp"

using namespace mathesis;

namespace {

struct ForAllExample {
  MathState state;
  NodeId v_x;
  EdgeId e_eq;
  EdgeId e_root;
};

// forall x (x = x), built the way the worked example lays it out.
ForAllExample build_forall_example() {
  ForAllExample ex;
  ex.v_x = ex.state.add_node(NodeType::Variable, "x");
  ex.e_eq = ex.state.add_edge(EdgeType::Predicate, "Equals",
                              {node_ref(ex.v_x), node_ref(ex.v_x)});
  ex.e_root = ex.state.add_edge(EdgeType::Quantifier, "ForAll", {edge_ref(ex.e_eq)}, {ex.v_x});
  ex.state.assert_fact(ex.e_root);
  return ex;
}

}  // namespace

TEST_CASE("add_node basics") {
  MathState s;
  NodeId x = s.add_node(NodeType::Variable, "x");
  CHECK(s.node_count() == 1);
  CHECK(s.node(x).label == "x");
  CHECK_THROWS_AS(s.add_node(NodeType::Variable, "x"), TypingError);

  NodeId zero = s.add_node(NodeType::Constant, "0");
  EdgeId sum = s.add_edge(EdgeType::Constructor, "Sum", {node_ref(x), node_ref(zero)});
  CHECK(s.edge(sum).output.has_value());
  CHECK(s.node(*s.edge(sum).output).type == NodeType::CompoundTerm);
}

TEST_CASE("add_edge typing rules") {
  MathState s;
  NodeId x = s.add_node(NodeType::Variable, "x");
  NodeId y = s.add_node(NodeType::Variable, "y");

  SUBCASE("connectives reject node args") {
    CHECK_THROWS_AS(s.add_edge(EdgeType::Connective, "And", {node_ref(x), node_ref(y)}),
                    TypingError);
  }
  SUBCASE("arity is enforced") {
    CHECK_THROWS_AS(s.add_edge(EdgeType::Predicate, "Equals", {node_ref(x)}), TypingError);
  }
  SUBCASE("Sum constructs a compound output") {
    EdgeId e = s.add_edge(EdgeType::Constructor, "Sum", {node_ref(x), node_ref(y)});
    const Hyperedge& edge = s.edge(e);
    CHECK(edge.output.has_value());
    CHECK(s.node(*edge.output).definition == e);
  }
  SUBCASE("unknown operators are rejected") {
    CHECK_THROWS_AS(s.add_edge(EdgeType::Predicate, "Frobnicate", {node_ref(x), node_ref(y)}),
                    TypingError);
  }
  SUBCASE("quantifier needs bound vars") {
    EdgeId eq = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(x), node_ref(y)});
    CHECK_THROWS_AS(s.add_edge(EdgeType::Quantifier, "ForAll", {edge_ref(eq)}, {}), TypingError);
  }
}

TEST_CASE("forall example and fact scoping") {
  ForAllExample ex = build_forall_example();
  CHECK(ex.state.is_fact(ex.e_root));
  CHECK_FALSE(ex.state.is_fact(ex.e_eq));  // nested body is not independently true
  CHECK(ex.state.edge(ex.e_root).bound_vars == std::vector<NodeId>{ex.v_x});

  SUBCASE("assert is idempotent") {
    auto before = ex.state.facts();
    ex.state.assert_fact(ex.e_root);
    CHECK(ex.state.facts() == before);
  }
  SUBCASE("constructor edges cannot be facts") {
    NodeId a = ex.state.add_node(NodeType::Variable, "a");
    EdgeId sum = ex.state.add_edge(EdgeType::Constructor, "Sum", {node_ref(a), node_ref(a)});
    CHECK_THROWS_AS(ex.state.assert_fact(sum), TypingError);
  }
}

TEST_CASE("canonical_hash commutativity") {
  MathState s;
  NodeId x = s.add_node(NodeType::Variable, "x");
  NodeId y = s.add_node(NodeType::Variable, "y");
  EdgeId sum_xy = s.add_edge(EdgeType::Constructor, "Sum", {node_ref(x), node_ref(y)});
  EdgeId sum_yx = s.add_edge(EdgeType::Constructor, "Sum", {node_ref(y), node_ref(x)});
  EdgeId sub_xy = s.add_edge(EdgeType::Constructor, "Sub", {node_ref(x), node_ref(y)});
  EdgeId sub_yx = s.add_edge(EdgeType::Constructor, "Sub", {node_ref(y), node_ref(x)});

  CHECK(canonical_hash(s, edge_ref(sum_xy)) == canonical_hash(s, edge_ref(sum_yx)));
  CHECK(canonical_hash(s, edge_ref(sub_xy)) != canonical_hash(s, edge_ref(sub_yx)));

  // Order-sensitive combination differs for every distinct child order of a
  // non-commutative operator over a pool of leaves.
  std::vector<NodeId> leaves{x, y};
  leaves.push_back(s.add_node(NodeType::Variable, "z"));
  for (NodeId a : leaves) {
    for (NodeId b : leaves) {
      if (a == b) continue;
      EdgeId ab = build_edge_shared(s, EdgeType::Constructor, "Sub", {node_ref(a), node_ref(b)});
      EdgeId ba = build_edge_shared(s, EdgeType::Constructor, "Sub", {node_ref(b), node_ref(a)});
      CHECK(canonical_hash(s, edge_ref(ab)) != canonical_hash(s, edge_ref(ba)));
    }
  }
}

TEST_CASE("canonical_hash is id-independent") {
  MathState s1, s2;
  // Same term, different construction interleavings.
  NodeId x1 = s1.add_node(NodeType::Variable, "x");
  NodeId y1 = s1.add_node(NodeType::Variable, "y");
  EdgeId e1 = s1.add_edge(EdgeType::Constructor, "Sum", {node_ref(x1), node_ref(y1)});

  NodeId pad = s2.add_node(NodeType::Variable, "pad");
  (void)pad;
  NodeId y2 = s2.add_node(NodeType::Variable, "y");
  NodeId x2 = s2.add_node(NodeType::Variable, "x");
  EdgeId e2 = s2.add_edge(EdgeType::Constructor, "Sum", {node_ref(x2), node_ref(y2)});

  CHECK(canonical_hash(s1, edge_ref(e1)) == canonical_hash(s2, edge_ref(e2)));
}

namespace {

// Random term generator plus an independent canonical-form oracle (string
// rendering with commutative children sorted) for the collision property.
struct TermGen {
  MathState state;
  std::vector<NodeId> leaves;
  RngStream rng;

  explicit TermGen(std::uint64_t seed) : rng(seed) {
    for (const char* name : {"a", "b", "c", "d"})
      leaves.push_back(state.add_node(NodeType::Variable, name));
  }

  NodeId random_term(int depth) {
    if (depth == 0 || rng.next_double() < 0.25)
      return leaves[rng.next_below(leaves.size())];
    const char* ops[] = {"Sum", "Product", "Sub"};
    const char* op = ops[rng.next_below(3)];
    NodeId a = random_term(depth - 1);
    NodeId b = random_term(depth - 1);
    EdgeId e = build_edge_shared(state, EdgeType::Constructor, op,
                                 {node_ref(a), node_ref(b)});
    return *state.edge(e).output;
  }

  std::string canon_string(NodeId n) {
    const Node& node = state.node(n);
    if (!node.definition) return node.label;
    const Hyperedge& def = state.edge(*node.definition);
    std::vector<std::string> kids;
    for (EntityRef ref : def.args) kids.push_back(canon_string(ref.id));
    if (OperatorTable::instance().require(def.op).commutative)
      std::sort(kids.begin(), kids.end());
    std::string out = def.op + "(";
    for (std::size_t i = 0; i < kids.size(); ++i) {
      if (i) out += ",";
      out += kids[i];
    }
    return out + ")";
  }
};

}  // namespace

TEST_CASE("canonical_hash collision freedom at desk scale") {
  TermGen gen(20240601);
  std::map<std::uint64_t, std::string> seen;  // hash -> canonical string
  StateHasher hasher(gen.state);
  int distinct = 0;
  std::set<std::string> canon_seen;
  for (int i = 0; i < 10000; ++i) {
    NodeId t = gen.random_term(6);
    std::string canon = gen.canon_string(t);
    std::uint64_t h = StateHasher(gen.state).hash(node_ref(t));
    auto it = seen.find(h);
    if (it != seen.end()) {
      CHECK(it->second == canon);  // equal hash must mean equal modulo commutativity
    } else {
      seen[h] = canon;
    }
    if (canon_seen.insert(canon).second) ++distinct;
  }
  // Every distinct canonical form got a distinct hash.
  CHECK(static_cast<int>(seen.size()) == distinct);
  (void)hasher;
}

TEST_CASE("match_goal") {
  MathState s;
  NodeId x = s.add_node(NodeType::Variable, "x");
  NodeId y = s.add_node(NodeType::Variable, "y");
  NodeId z = s.add_node(NodeType::Variable, "z");
  EdgeId exx = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(x), node_ref(x)});
  EdgeId exy = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(x), node_ref(y)});
  EdgeId eyz = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(y), node_ref(z)});

  SUBCASE("reflexive pattern binds both slots to one node") {
    GoalPattern pat;
    NodeId a = pat.graph.add_node(NodeType::Variable, "?a");
    pat.root = pat.graph.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(a)});
    auto matches = match_goal(s, pat);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].root == exx);
    CHECK(matches[0].node_map.at(a) == node_ref(x));
  }

  SUBCASE("two-variable pattern matches all three, ordered") {
    GoalPattern pat;
    NodeId a = pat.graph.add_node(NodeType::Variable, "?a");
    NodeId b = pat.graph.add_node(NodeType::Variable, "?b");
    pat.root = pat.graph.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
    auto matches = match_goal(s, pat);

    // Brute-force oracle: try every state edge and check consistency by hand.
    std::vector<EdgeId> expected;
    for (const Hyperedge& e : s.edges()) {
      if (e.op == "Equals") expected.push_back(e.id);
    }
    REQUIRE(matches.size() == expected.size());
    for (std::size_t i = 0; i < matches.size(); ++i) CHECK(matches[i].root == expected[i]);
    CHECK(std::is_sorted(expected.begin(), expected.end()));
  }

  SUBCASE("empty graph yields no matches") {
    MathState empty;
    GoalPattern pat;
    NodeId a = pat.graph.add_node(NodeType::Variable, "?a");
    NodeId b = pat.graph.add_node(NodeType::Variable, "?b");
    pat.root = pat.graph.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
    CHECK(match_goal(empty, pat).empty());
  }
  (void)exy;
  (void)eyz;
}

namespace {

MathState modus_ponens_state(EdgeId* premise, EdgeId* implication, EdgeId* conclusion) {
  MathState s;
  NodeId a = s.add_node(NodeType::Variable, "a");
  NodeId b = s.add_node(NodeType::Variable, "b");
  NodeId c = s.add_node(NodeType::Variable, "c");
  NodeId d = s.add_node(NodeType::Variable, "d");
  EdgeId p = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
  EdgeId q = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(c), node_ref(d)});
  EdgeId imp = s.add_edge(EdgeType::Connective, "Implies", {edge_ref(p), edge_ref(q)});
  *premise = p;
  *implication = imp;
  *conclusion = q;
  return s;
}

}  // namespace

TEST_CASE("apply_action: modus ponens") {
  EdgeId p, imp, q;
  MathState s = modus_ponens_state(&p, &imp, &q);
  RuleLibrary lib;
  Action mp{static_cast<std::uint16_t>(lib.find("ModusPonens")), {edge_ref(imp)}};

  SUBCASE("fires when both facts hold") {
    s.assert_fact(p);
    s.assert_fact(imp);
    MathState next = lib.apply(s, mp);
    CHECK(next.is_fact(q));
    CHECK_FALSE(s.is_fact(q));  // input untouched
  }
  SUBCASE("rejected when the antecedent is not a fact") {
    s.assert_fact(imp);
    std::size_t edges_before = s.edge_count();
    CHECK_THROWS_AS(lib.apply(s, mp), RuleError);
    CHECK(s.edge_count() == edges_before);
    CHECK_FALSE(s.is_fact(q));
  }
}

TEST_CASE("apply_action: equality transitivity") {
  MathState s;
  NodeId a = s.add_node(NodeType::Variable, "a");
  NodeId b = s.add_node(NodeType::Variable, "b");
  NodeId c = s.add_node(NodeType::Variable, "c");
  EdgeId ab = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
  EdgeId bc = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(b), node_ref(c)});
  s.assert_fact(ab);
  s.assert_fact(bc);
  RuleLibrary lib;
  Action tr{static_cast<std::uint16_t>(lib.find("EqualityTransitivity")),
            {edge_ref(ab), edge_ref(bc)}};
  MathState next = lib.apply(s, tr);
  auto derived = next.find_identical_edge(EdgeType::Predicate, "Equals",
                                          {node_ref(a), node_ref(c)});
  REQUIRE(derived.has_value());
  CHECK(next.is_fact(*derived));
}

TEST_CASE("legal_actions") {
  RuleLibrary lib(16);

  SUBCASE("empty fact set lists only constructive actions") {
    MathState s;
    s.add_node(NodeType::Variable, "x");
    s.add_node(NodeType::Variable, "y");
    auto legal = lib.legal_actions(s);
    CHECK(!legal.empty());
    for (const Action& a : legal) CHECK(lib.rule(a.rule).is_constructor);
  }

  SUBCASE("modus ponens appears when its facts hold") {
    EdgeId p, imp, q;
    MathState s = modus_ponens_state(&p, &imp, &q);
    s.assert_fact(p);
    s.assert_fact(imp);
    int mp_rule = lib.find("ModusPonens");
    auto legal = lib.legal_actions(s);
    bool found = false;
    for (const Action& a : legal)
      found |= (a.rule == mp_rule && a.operands == std::vector<EntityRef>{edge_ref(imp)});
    CHECK(found);
  }

  SUBCASE("every listed action is applicable and monotone") {
    EdgeId p, imp, q;
    MathState s = modus_ponens_state(&p, &imp, &q);
    s.assert_fact(p);
    s.assert_fact(imp);
    for (const Action& a : lib.legal_actions(s)) {
      MathState next = lib.apply(s, a);  // throws on disagreement
      next.validate();
      CHECK(next.node_count() >= s.node_count());
      CHECK(next.edge_count() >= s.edge_count());
      CHECK(std::includes(next.facts().begin(), next.facts().end(), s.facts().begin(),
                          s.facts().end()));
    }
  }

  SUBCASE("term budget disables constructors") {
    RuleLibrary tiny(0);
    MathState s;
    s.add_node(NodeType::Variable, "x");
    for (const Action& a : tiny.legal_actions(s)) CHECK_FALSE(tiny.rule(a.rule).is_constructor);
    CHECK(tiny.legal_actions(s).empty());
  }
}

TEST_CASE("well-typedness closed under random action sequences") {
  RuleLibrary lib(24);
  RngStream rng(77001);
  for (int trial = 0; trial < 20; ++trial) {
    EdgeId p, imp, q;
    MathState s = modus_ponens_state(&p, &imp, &q);
    s.assert_fact(p);
    s.assert_fact(imp);
    for (int step = 0; step < 6; ++step) {
      auto legal = lib.legal_actions(s);
      if (legal.empty()) break;
      const Action& a = legal[rng.next_below(legal.size())];
      MathState next = lib.apply(s, a);
      next.validate();
      CHECK(next.facts().size() >= s.facts().size());
      s = std::move(next);
    }
  }
}

TEST_CASE("legal_actions and apply_action agree") {
  RuleLibrary lib(24);
  EdgeId p, imp, q;
  MathState s = modus_ponens_state(&p, &imp, &q);
  s.assert_fact(imp);  // antecedent NOT asserted: MP must be absent
  auto legal = lib.legal_actions(s);
  std::set<Action> legal_set(legal.begin(), legal.end());
  int mp_rule = lib.find("ModusPonens");
  Action mp{static_cast<std::uint16_t>(mp_rule), {edge_ref(imp)}};
  CHECK(legal_set.count(mp) == 0);
  CHECK_THROWS_AS(lib.apply(s, mp), RuleError);

  // And conversely everything listed is accepted (exhaustive).
  for (const Action& a : legal) CHECK_NOTHROW(lib.apply(s, a));
}

TEST_CASE("instantiation strips the quantifier and substitutes") {
  ForAllExample ex = build_forall_example();
  NodeId t = ex.state.add_node(NodeType::Variable, "t");
  RuleLibrary lib;
  Action inst{static_cast<std::uint16_t>(lib.find("Instantiate")),
              {edge_ref(ex.e_root), node_ref(ex.v_x), node_ref(t)}};
  MathState next = lib.apply(ex.state, inst);
  auto instance = next.find_identical_edge(EdgeType::Predicate, "Equals",
                                           {node_ref(t), node_ref(t)});
  REQUIRE(instance.has_value());
  CHECK(next.is_fact(*instance));
  // The quantified fact is untouched.
  CHECK(next.is_fact(ex.e_root));
}

TEST_CASE("substitution rewrites one occurrence") {
  MathState s;
  NodeId a = s.add_node(NodeType::Variable, "a");
  NodeId b = s.add_node(NodeType::Variable, "b");
  NodeId c = s.add_node(NodeType::Variable, "c");
  EdgeId sum = s.add_edge(EdgeType::Constructor, "Sum", {node_ref(a), node_ref(a)});
  NodeId sum_out = *s.edge(sum).output;
  EdgeId host = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(sum_out), node_ref(c)});
  EdgeId eq = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
  s.assert_fact(host);
  s.assert_fact(eq);

  RuleLibrary lib;
  Action sub{static_cast<std::uint16_t>(lib.find("Substitution")),
             {edge_ref(eq), edge_ref(host), edge_ref(sum)}};
  MathState next = lib.apply(s, sub);
  // One occurrence of a inside Sum(a, a) was replaced: Sum(b, a) = c.
  auto new_sum = next.find_identical_edge(EdgeType::Constructor, "Sum",
                                          {node_ref(b), node_ref(a)});
  REQUIRE(new_sum.has_value());
  auto new_fact = next.find_identical_edge(
      EdgeType::Predicate, "Equals", {node_ref(*next.edge(*new_sum).output), node_ref(c)});
  REQUIRE(new_fact.has_value());
  CHECK(next.is_fact(*new_fact));
  CHECK(next.is_fact(host));  // original fact retained
}
