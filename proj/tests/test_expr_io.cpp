#include <doctest.h>

#include "mathesis/expr_io.hpp"
#include "mathesis/rng.hpp"
#include "mathesis/version.hpp"

using namespace mathesis;

TEST_CASE("parse_problem minimal") {
  auto res = parse_problem("(problem (decl x var) (goal (Equals x x)))");
  REQUIRE(res.ok());
  CHECK(res.doc->decls.size() == 1);
  CHECK(res.doc->premises.empty());
  CHECK(res.doc->goal.has_value());
}

TEST_CASE("parse_problem diagnostics carry positions") {
  SUBCASE("unbalanced parenthesis") {
    auto res = parse_problem("(problem (decl x var) (goal (Equals x x))");
    REQUIRE_FALSE(res.ok());
    CHECK(res.error.pos.line >= 1);
    CHECK(res.error.message.find("unbalanced") != std::string::npos);
  }
  SUBCASE("undeclared symbol") {
    auto res = parse_problem("(problem (decl x var) (goal (Equals x q)))");
    REQUIRE_FALSE(res.ok());
    CHECK(res.error.message.find("undeclared") != std::string::npos);
  }
  SUBCASE("unknown operator") {
    auto res = parse_problem("(problem (decl x var) (goal (Wibble x x)))");
    REQUIRE_FALSE(res.ok());
    CHECK(res.error.message.find("unknown operator") != std::string::npos);
  }
  SUBCASE("arity mismatch") {
    auto res = parse_problem("(problem (decl x var) (goal (Equals x x x)))");
    REQUIRE_FALSE(res.ok());
    CHECK(res.error.message.find("arity") != std::string::npos);
  }
}

TEST_CASE("premise trees nest constructors under predicates") {
  auto res = parse_problem(
      "(problem (decl a var) (decl b var) (decl c var)"
      " (premise (Equals (Sum a b) c))"
      " (goal (Equals c (Sum a b))))");
  REQUIRE(res.ok());
  REQUIRE(res.doc->premises.size() == 1);
  const ExprNode& prem = res.doc->premises[0];
  CHECK(prem.head == "Equals");
  CHECK(prem.args[0].head == "Sum");
  CHECK(prem.args[0].args.size() == 2);
}

TEST_CASE("parser totality under fuzz") {
  RngStream rng(424242);
  const std::string pool = "()( ))aqx0. 139-\"epr oblemdcl\tvargoal";
  for (int i = 0; i < 500; ++i) {
    std::string text;
    std::size_t len = rng.next_below(120);
    for (std::size_t j = 0; j < len; ++j) text += pool[rng.next_below(pool.size())];
    auto res = parse_problem(text);  // must not crash
    if (!res.ok()) CHECK(res.error.pos.line >= 1);
  }
}

TEST_CASE("build_state reproduces the quantifier example structure") {
  Config config;
  auto res = parse_problem(
      "(problem (decl y var)"
      " (premise (forall (x) (Equals x x)))"
      " (goal (Equals y y)))");
  REQUIRE(res.ok());
  Problem p = build_state(*res.doc, config, "forall_example");

  // Premise structure: Variable x, Equals(x,x) NOT a fact, ForAll IS a fact.
  auto x = p.initial.find_named(NodeType::Variable, "x");
  REQUIRE(x.has_value());
  auto eq = p.initial.find_identical_edge(EdgeType::Predicate, "Equals",
                                          {node_ref(*x), node_ref(*x)});
  REQUIRE(eq.has_value());
  CHECK_FALSE(p.initial.is_fact(*eq));
  REQUIRE(p.premise_edges.size() == 1);
  EdgeId root = p.premise_edges[0];
  CHECK(p.initial.edge(root).op == "ForAll");
  CHECK(p.initial.is_fact(root));
  CHECK(p.initial.edge(root).bound_vars == std::vector<NodeId>{*x});

  // The goal is materialized but never asserted.
  REQUIRE(p.goal_edge.has_value());
  CHECK_FALSE(p.initial.is_fact(*p.goal_edge));
}

TEST_CASE("build_state determinism") {
  Config config;
  const std::string text =
      "(problem (decl a var) (decl b var)"
      " (premise (Equals a b)) (goal (Equals b a)))";
  auto r1 = parse_problem(text);
  auto r2 = parse_problem(text);
  REQUIRE(r1.ok());
  REQUIRE(r2.ok());
  Problem p1 = build_state(*r1.doc, config);
  Problem p2 = build_state(*r2.doc, config);
  CHECK(emit_state(p1.initial) == emit_state(p2.initial));
}

TEST_CASE("matrix seeds load into the binding") {
  Config config;
  config.energy_dim_d = 2;
  auto res = parse_problem(
      "(problem (decl A matrix) (decl B matrix)"
      " (premise (Equals A B)) (goal (Equals A B))"
      " (bind A 1 0 0 1) (bind B 1 0 0 1))");
  REQUIRE(res.ok());
  Problem p = build_state(*res.doc, config);
  CHECK(p.binding.matrices.size() == 2);
  CHECK(p.binding.matrices.begin()->second.rows() == 2);

  SUBCASE("seed length must match d*d") {
    auto bad = parse_problem(
        "(problem (decl A matrix) (goal (Equals A A)) (bind A 1 0 0))");
    REQUIRE(bad.ok());
    CHECK_THROWS_AS(build_state(*bad.doc, config), DimensionError);
  }
}

TEST_CASE("trace round trips") {
  ProofTrace t;
  t.problem = "demo";
  t.seed = 99;
  t.method = "mcts";
  t.version = kVersion;
  t.config_hash = "abc123";
  t.e0 = 2.0;

  SUBCASE("empty trace keeps header and initial energy") {
    std::string text = emit_trace(t);
    CHECK(text.find("\"e0\":2.0") != std::string::npos);
    ProofTrace back = parse_trace(text);
    CHECK(back == t);
  }

  SUBCASE("steps round trip exactly") {
    t.steps.push_back({0, "Instantiate(E1,N0,N3)", 1.5, 0.49});
    t.steps.push_back({1, "EqualitySymmetry(E4)", 0.0, 1.5 - 0.01 + 1.0});
    std::string text = emit_trace(t);
    ProofTrace back = parse_trace(text);
    CHECK(back == t);
    CHECK(emit_trace(back) == text);  // byte-identical re-emission
  }
}

TEST_CASE("state serialization round trips byte-identically") {
  Config config;
  auto res = parse_problem(
      "(problem (decl a var) (decl b var) (decl c var)"
      " (premise (Equals (Sum a b) c))"
      " (premise (forall (u) (Equals (Product u a) (Product u b))))"
      " (goal (Equals (Product c a) (Product c b))))");
  REQUIRE(res.ok());
  Problem p = build_state(*res.doc, config);
  std::string text = emit_state(p.initial);
  MathState back = parse_state(text);
  CHECK(emit_state(back) == text);
  back.validate();
}

TEST_CASE("bind override files parse") {
  auto res = parse_bind_forms("(bind A 1 0 0 1) (bind c 0.5 free)");
  REQUIRE(res.ok());
  CHECK(res.binds->size() == 2);
  CHECK((*res.binds)[1].free_slot);
}
