#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mathesis/brain.hpp"
#include "mathesis/rng.hpp"

using namespace mathesis;

namespace {

BrainConfig small_config() {
  BrainConfig cfg;
  cfg.d_model = 16;  // keeps finite differences fast
  cfg.layers = 2;
  cfg.max_arity = 8;
  return cfg;
}

BrainParams make_params(const MathState& state, std::uint64_t seed,
                        const RuleLibrary& lib) {
  std::vector<std::string> rule_names;
  for (const auto& r : lib.rules()) rule_names.push_back(r.name);
  BrainParams params(small_config(), rule_names, state_token_keys(state));
  RngStream rng(seed);
  params.randomize(rng);
  return params;
}

MathState chain_state() {
  MathState s;
  NodeId a = s.add_node(NodeType::Variable, "a");
  NodeId b = s.add_node(NodeType::Variable, "b");
  NodeId c = s.add_node(NodeType::Variable, "c");
  EdgeId ab = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
  EdgeId bc = s.add_edge(EdgeType::Predicate, "Equals", {node_ref(b), node_ref(c)});
  s.assert_fact(ab);
  s.assert_fact(bc);
  return s;
}

}  // namespace

TEST_CASE("encode: isolated node passes through normalized") {
  MathState s;
  s.add_node(NodeType::Variable, "x");
  RuleLibrary lib;
  BrainParams params = make_params(s, 1, lib);
  EncodeCache cache = encode(s, params);
  const Eigen::VectorXd& h = cache.final_embeddings()[0];
  // Residual-only path: the token row goes through one layer norm per layer
  // and nothing else.
  Eigen::VectorXd expect = params.token(params.token_row({TokenKind::VarNode, "x"}));
  for (int l = 0; l < params.layers(); ++l) {
    double mu = expect.mean();
    double istd = 1.0 / std::sqrt((expect.array() - mu).square().mean() + 1e-5);
    expect = ((expect.array() - mu) * istd).matrix();
  }
  CHECK((h - expect).norm() < 1e-9);
}

TEST_CASE("encode: argument order matters for non-commutative edges") {
  MathState s;
  NodeId x = s.add_node(NodeType::Variable, "x");
  NodeId y = s.add_node(NodeType::Variable, "y");
  EdgeId sub_xy = s.add_edge(EdgeType::Constructor, "Sub", {node_ref(x), node_ref(y)});
  EdgeId sub_yx = s.add_edge(EdgeType::Constructor, "Sub", {node_ref(y), node_ref(x)});
  RuleLibrary lib;
  BrainParams params = make_params(s, 2, lib);
  EncodeCache cache = encode(s, params);
  const auto& h = cache.final_embeddings();
  double dist = (h[cache.entity_index(edge_ref(sub_xy))] -
                 h[cache.entity_index(edge_ref(sub_yx))]
  ).norm();
  CHECK(dist > 1e-4);
}

TEST_CASE("encode: id relabeling leaves embeddings intact") {
  // Same structure, different construction interleavings.
  MathState s1;
  {
    NodeId a = s1.add_node(NodeType::Variable, "a");
    NodeId b = s1.add_node(NodeType::Variable, "b");
    EdgeId e = s1.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
    s1.assert_fact(e);
  }
  MathState s2;
  {
    NodeId b = s2.add_node(NodeType::Variable, "b");
    NodeId a = s2.add_node(NodeType::Variable, "a");
    EdgeId e = s2.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
    s2.assert_fact(e);
  }
  RuleLibrary lib;
  BrainParams params = make_params(s1, 3, lib);
  EncodeCache c1 = encode(s1, params);
  EncodeCache c2 = encode(s2, params);
  NodeId a1 = *s1.find_named(NodeType::Variable, "a");
  NodeId a2 = *s2.find_named(NodeType::Variable, "a");
  CHECK((c1.final_embeddings()[c1.entity_index(node_ref(a1))] -
         c2.final_embeddings()[c2.entity_index(node_ref(a2))])
            .norm() < 1e-9);
}

TEST_CASE("encode: shapes stay finite on a large random state") {
  MathState s;
  RngStream rng(77);
  std::vector<NodeId> nodes;
  for (int i = 0; i < 40; ++i)
    nodes.push_back(s.add_node(NodeType::Variable, "v" + std::to_string(i)));
  for (int i = 0; i < 40; ++i) {
    NodeId a = nodes[rng.next_below(nodes.size())];
    NodeId b = nodes[rng.next_below(nodes.size())];
    EdgeId e = build_edge_shared(s, EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)});
    if (rng.next_double() < 0.5) s.assert_fact(e);
  }
  RuleLibrary lib;
  BrainParams params = make_params(s, 4, lib);
  EncodeCache cache = encode(s, params);
  CHECK(cache.final_embeddings().size() == s.entity_count());
  for (const auto& h : cache.final_embeddings()) CHECK(h.allFinite());
}

TEST_CASE("policy: distribution invariants") {
  MathState s = chain_state();
  RuleLibrary lib(8);
  BrainParams params = make_params(s, 5, lib);
  auto legal = lib.legal_actions(s);
  REQUIRE(!legal.empty());
  ActionDistribution dist = policy(s, params, lib, legal);

  SUBCASE("action probabilities sum to one") {
    double sum = std::accumulate(dist.action_probs.begin(), dist.action_probs.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (double p : dist.action_probs) CHECK(p >= 0.0);
  }
  SUBCASE("operator probabilities cover present rules and sum to one") {
    double sum = 0.0;
    for (const auto& [name, p] : dist.op_probs) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
  SUBCASE("single legal action is certain") {
    std::vector<Action> one{legal.front()};
    ActionDistribution d1 = policy(s, params, lib, one);
    CHECK(d1.action_probs[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("policy: zeroed operator head is uniform over present rules") {
  MathState s = chain_state();
  RuleLibrary lib(8);
  BrainParams params = make_params(s, 6, lib);
  params.zero_operator_head();
  auto legal = lib.legal_actions(s);
  ActionDistribution dist = policy(s, params, lib, legal);
  REQUIRE(dist.op_probs.size() >= 2);
  double first = dist.op_probs.begin()->second;
  for (const auto& [name, p] : dist.op_probs) CHECK(p == doctest::Approx(first).epsilon(1e-9));
}

TEST_CASE("policy: type masking excludes invalid entities from slots") {
  MathState s = chain_state();
  RuleLibrary lib(8);
  // EqualitySymmetry slot: only Equals facts qualify. Nodes never do.
  for (const Node& n : s.nodes())
    CHECK_FALSE(lib.slot_accepts(s, SlotClass::FactEquals, node_ref(n.id)));
  // A non-fact Equals edge is masked too.
  MathState s2 = s;
  NodeId a2 = *s2.find_named(NodeType::Variable, "a");
  NodeId c2 = *s2.find_named(NodeType::Variable, "c");
  EdgeId nonfact = s2.add_edge(EdgeType::Predicate, "Equals", {node_ref(a2), node_ref(c2)});
  CHECK_FALSE(lib.slot_accepts(s2, SlotClass::FactEquals, edge_ref(nonfact)));
  // And no legal action points at it in its Equals slots.
  for (const Action& act : lib.legal_actions(s2)) {
    if (lib.rule(act.rule).name == "EqualitySymmetry")
      CHECK(act.operands[0] != edge_ref(nonfact));
  }
}

TEST_CASE("value head") {
  MathState s = chain_state();
  RuleLibrary lib;
  BrainParams params = make_params(s, 7, lib);
  double v1 = value(s, params);
  double v2 = value(s, params);
  CHECK(v1 >= 0.0);
  CHECK(v1 <= 1.0);
  CHECK(v1 == v2);
}

namespace {

// Central-difference check of an arbitrary scalar function of the flat
// parameter vector against an analytic gradient, over a deterministic
// coordinate subsample plus one random direction.
template <typename F>
void fd_check(BrainParams& params, const Eigen::VectorXd& grad, F scalar_fn, int n_coords,
              std::uint64_t seed, double tol) {
  RngStream rng(seed);
  const double h = 1e-5;
  std::vector<double>& flat = params.flat();
  for (int t = 0; t < n_coords; ++t) {
    std::size_t i = rng.next_below(flat.size());
    double keep = flat[i];
    flat[i] = keep + h;
    double up = scalar_fn();
    flat[i] = keep - h;
    double down = scalar_fn();
    flat[i] = keep;
    double fd = (up - down) / (2 * h);
    double an = grad(static_cast<Eigen::Index>(i));
    CHECK(std::abs(an - fd) <= tol * std::max(1.0, std::abs(fd)));
  }
  // Directional derivative over all coordinates at once.
  Eigen::VectorXd dir(static_cast<Eigen::Index>(flat.size()));
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.uniform(-1.0, 1.0);
  dir.normalize();
  std::vector<double> keep = flat;
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = keep[i] + h * dir(static_cast<Eigen::Index>(i));
  double up = scalar_fn();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = keep[i] - h * dir(static_cast<Eigen::Index>(i));
  double down = scalar_fn();
  flat = keep;
  double fd = (up - down) / (2 * h);
  double an = grad.dot(dir);
  CHECK(std::abs(an - fd) <= tol * std::max(1.0, std::abs(fd)));
}

}  // namespace

TEST_CASE("grad_log_policy matches finite differences") {
  MathState s = chain_state();
  RuleLibrary lib(8);
  BrainParams params = make_params(s, 8, lib);
  auto legal = lib.legal_actions(s);
  REQUIRE(legal.size() >= 3);
  std::size_t target = legal.size() / 2;

  double logp = 0.0;
  Eigen::VectorXd grad = grad_log_policy(s, params, lib, legal, target, &logp);
  CHECK(std::isfinite(logp));

  fd_check(
      params, grad,
      [&] {
        ActionDistribution d = policy(s, params, lib, legal);
        return std::log(d.action_probs[target]);
      },
      200, 2027, 1e-4);
}

TEST_CASE("grad_value_loss matches finite differences") {
  MathState s = chain_state();
  RuleLibrary lib;
  BrainParams params = make_params(s, 9, lib);
  double v = 0.0;
  Eigen::VectorXd grad = grad_value_loss(s, params, 0.25, &v);
  fd_check(
      params, grad,
      [&] {
        double vv = value(s, params);
        return (vv - 0.25) * (vv - 0.25);
      },
      200, 2028, 1e-4);
}

TEST_CASE("gradient of a certain action is null") {
  MathState s = chain_state();
  RuleLibrary lib(8);
  BrainParams params = make_params(s, 10, lib);
  auto legal = lib.legal_actions(s);
  std::vector<Action> one{legal.front()};
  double logp = 0.0;
  Eigen::VectorXd grad = grad_log_policy(s, params, lib, one, 0, &logp);
  CHECK(std::abs(logp) < 1e-12);
  CHECK(grad.norm() < 1e-9);  // probability pinned at one
}

TEST_CASE("checkpoint round trip is byte-exact") {
  MathState s = chain_state();
  RuleLibrary lib;
  BrainParams params = make_params(s, 11, lib);
  std::string path = "brain_ckpt_test.bin";
  params.save(path, 42, 777);
  LoadedBrain loaded = BrainParams::load(path);
  CHECK(loaded.episodes_done == 42);
  CHECK(loaded.master_seed == 777);
  CHECK(loaded.params.flat() == params.flat());
  CHECK(loaded.params.vocab() == params.vocab());
  std::string path2 = "brain_ckpt_test2.bin";
  loaded.params.save(path2, 42, 777);
  // Same bytes on disk.
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}
