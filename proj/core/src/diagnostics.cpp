#include "mathesis/diagnostics.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "mathesis/geometry_engine.hpp"
#include "mathesis/matrix_engine.hpp"

namespace mathesis {

namespace {

Mat random_matrix(RngStream& rng, int d) {
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

Mat random_orthogonal(RngStream& rng, int d) {
  Eigen::HouseholderQR<Mat> qr(random_matrix(rng, d));
  Mat q = qr.householderQ();
  return q;
}

Mat random_invertible(RngStream& rng, int d) {
  Mat m = random_matrix(rng, d) + 3.0 * Mat::Identity(d, d);
  return m;
}

Point2 random_point(RngStream& rng) {
  return {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
}

/// Matrix fixture: Equals, MatMul, Symmetric, Orthogonal, InversePair over
/// disjoint operands, all exactly satisfied.
EnergyFixture matrix_fixture(RngStream& rng, int dim) {
  EnergyFixture fx;
  fx.binding.dim = dim;
  MathState& s = fx.state;
  auto mknode = [&](const char* name) {
    return s.add_node(NodeType::Variable, name, Domain::Matrix);
  };
  NodeId a = mknode("A"), b = mknode("B"), p = mknode("P"), q = mknode("Q"), r = mknode("R");
  NodeId sym = mknode("S"), orth = mknode("O"), w = mknode("W"), winv = mknode("Winv");

  Mat ma = random_matrix(rng, dim);
  fx.binding.matrices[a] = ma;
  fx.binding.matrices[b] = ma;
  Mat mp = random_matrix(rng, dim), mq = random_matrix(rng, dim);
  fx.binding.matrices[p] = mp;
  fx.binding.matrices[q] = mq;
  fx.binding.matrices[r] = mp * mq;
  Mat msym = random_matrix(rng, dim);
  fx.binding.matrices[sym] = 0.5 * (msym + msym.transpose()).eval();
  fx.binding.matrices[orth] = random_orthogonal(rng, dim);
  Mat mw = random_invertible(rng, dim);
  fx.binding.matrices[w] = mw;
  fx.binding.matrices[winv] = mw.inverse();

  s.assert_fact(s.add_edge(EdgeType::Predicate, "Equals", {node_ref(a), node_ref(b)}));
  s.assert_fact(
      s.add_edge(EdgeType::Predicate, "MatMul", {node_ref(p), node_ref(q), node_ref(r)}));
  s.assert_fact(s.add_edge(EdgeType::Predicate, "Symmetric", {node_ref(sym)}));
  s.assert_fact(s.add_edge(EdgeType::Predicate, "Orthogonal", {node_ref(orth)}));
  s.assert_fact(s.add_edge(EdgeType::Predicate, "InversePair", {node_ref(w), node_ref(winv)}));
  return fx;
}

/// Geometry fixture: Collinear, Parallel, Perpendicular, Congruent,
/// RatioEquals over constructed exact configurations.
EnergyFixture geometry_fixture(RngStream& rng, int dim) {
  EnergyFixture fx;
  fx.binding.dim = dim;
  MathState& s = fx.state;
  auto pt = [&](const std::string& name, Point2 v) {
    NodeId n = s.add_node(NodeType::Variable, name, Domain::Point);
    fx.binding.points[n] = v;
    return n;
  };
  Point2 a = random_point(rng), b = random_point(rng);
  double ux = b.x - a.x, uy = b.y - a.y;
  double t = rng.uniform(0.3, 2.0);
  NodeId A = pt("A", a), B = pt("B", b);
  NodeId C = pt("C", {a.x + t * ux, a.y + t * uy});  // collinear with A,B
  Point2 c2 = random_point(rng);
  double sft = rng.uniform(0.5, 1.5);
  NodeId D = pt("D", c2), E = pt("E", {c2.x + sft * ux, c2.y + sft * uy});  // DE parallel AB
  Point2 f0 = random_point(rng);
  NodeId F = pt("F", f0), G = pt("G", {f0.x - uy, f0.y + ux});  // FG perp AB
  Point2 h0 = random_point(rng);
  double ang = rng.uniform(0.0, 6.28);
  double len = std::sqrt(ux * ux + uy * uy);
  NodeId H = pt("H", h0);
  NodeId I = pt("I", {h0.x + len * std::cos(ang), h0.y + len * std::sin(ang)});  // |HI| = |AB|
  // Ratio fixture on private points: D2 lengths (k, 2k, 2k, 4k) cross-multiply
  // to zero, and perturbing any single point breaks only this fact.
  double k = rng.uniform(0.5, 1.5);
  double side = std::sqrt(k);
  Point2 r0 = random_point(rng), r2 = random_point(rng), r4 = random_point(rng),
         r6 = random_point(rng);
  NodeId R0 = pt("R0", r0), R1 = pt("R1", {r0.x + side, r0.y});
  NodeId R2 = pt("R2", r2), R3 = pt("R3", {r2.x + side, r2.y + side});
  NodeId R4 = pt("R4", r4), R5 = pt("R5", {r4.x - side, r4.y + side});
  NodeId R6 = pt("R6", r6), R7 = pt("R7", {r6.x, r6.y - 2.0 * side});
  s.assert_fact(s.add_edge(EdgeType::Predicate, "Collinear", {node_ref(A), node_ref(B), node_ref(C)}));
  s.assert_fact(s.add_edge(EdgeType::Predicate, "Parallel",
                           {node_ref(A), node_ref(B), node_ref(D), node_ref(E)}));
  s.assert_fact(s.add_edge(EdgeType::Predicate, "Perpendicular",
                           {node_ref(A), node_ref(B), node_ref(F), node_ref(G)}));
  s.assert_fact(s.add_edge(EdgeType::Predicate, "Congruent",
                           {node_ref(A), node_ref(B), node_ref(H), node_ref(I)}));
  s.assert_fact(s.add_edge(EdgeType::Predicate, "RatioEquals",
                           {node_ref(R0), node_ref(R1), node_ref(R2), node_ref(R3), node_ref(R4),
                            node_ref(R5), node_ref(R6), node_ref(R7)}));
  return fx;
}

/// Ideal fixture: polynomial equalities satisfied at the bound values.
EnergyFixture ideal_fixture(RngStream& rng, int dim) {
  EnergyFixture fx;
  fx.binding.dim = dim;
  MathState& s = fx.state;
  auto sc = [&](const std::string& name, int ring, double v) {
    NodeId n = s.add_node(NodeType::Variable, name, Domain::Scalar);
    fx.binding.scalars[n] = ScalarSlot{ring, v};
    return n;
  };
  double vx = rng.uniform(-2.0, 2.0), vy = rng.uniform(-2.0, 2.0);
  NodeId x = sc("x", 0, vx), y = sc("y", 1, vy);
  NodeId z = sc("z", 2, vx * vy);
  NodeId u = sc("u", 3, vx + vy);
  EdgeId prod = s.add_edge(EdgeType::Constructor, "Product", {node_ref(x), node_ref(y)});
  EdgeId sum = s.add_edge(EdgeType::Constructor, "Sum", {node_ref(x), node_ref(y)});
  s.assert_fact(
      s.add_edge(EdgeType::Predicate, "Equals", {node_ref(*s.edge(prod).output), node_ref(z)}));
  s.assert_fact(
      s.add_edge(EdgeType::Predicate, "Equals", {node_ref(*s.edge(sum).output), node_ref(u)}));
  return fx;
}

/// Perturbs exactly one fact's private operand so that only that predicate
/// is falsified.
void violate_one(EnergyFixture& fx, RngStream& rng) {
  std::vector<EdgeId> energetic;
  for (EdgeId f : fx.state.facts()) {
    if (classify_edge(fx.state, f) != EnergyDomain::NonEnergetic) energetic.push_back(f);
  }
  EdgeId victim = energetic[rng.next_below(energetic.size())];
  fx.violated = victim;
  const Hyperedge& e = fx.state.edge(victim);
  double delta = rng.uniform(0.6, 1.2);
  EnergyDomain dom = classify_edge(fx.state, victim);
  // Perturb the last operand; fixtures keep operand sets disjoint per fact.
  NodeId target = e.args.back().id;
  // Compound operands resolve to a leaf of the term.
  while (fx.state.node(target).definition) {
    target = fx.state.edge(*fx.state.node(target).definition).args[0].id;
  }
  switch (dom) {
    case EnergyDomain::Matrix: {
      // Off-diagonal so that symmetry-style predicates break too.
      Mat& m = fx.binding.matrices.at(target);
      m(0, m.cols() > 1 ? 1 : 0) += delta;
      break;
    }
    case EnergyDomain::Geometry: {
      Point2& p = fx.binding.points.at(target);
      p.x += delta;
      p.y -= 0.5 * delta;
      break;
    }
    case EnergyDomain::Ideal: *fx.binding.scalars.at(target).value += delta; break;
    case EnergyDomain::NonEnergetic: break;
  }
}

EnergyDomain domain_cycle(std::uint64_t i) {
  switch (i % 3) {
    case 0: return EnergyDomain::Matrix;
    case 1: return EnergyDomain::Geometry;
    default: return EnergyDomain::Ideal;
  }
}

}  // namespace

EnergyFixture make_true_fixture(EnergyDomain domain, RngStream& rng, int dim) {
  switch (domain) {
    case EnergyDomain::Matrix: return matrix_fixture(rng, dim);
    case EnergyDomain::Geometry: return geometry_fixture(rng, dim);
    case EnergyDomain::Ideal: return ideal_fixture(rng, dim);
    case EnergyDomain::NonEnergetic: break;
  }
  throw Error("make_true_fixture: bad domain");
}

EnergyFixture make_violated_fixture(EnergyDomain domain, RngStream& rng, int dim) {
  EnergyFixture fx = make_true_fixture(domain, rng, dim);
  violate_one(fx, rng);
  return fx;
}

EnergyFixture make_mixed_true_fixture(RngStream& rng, int dim) {
  // Build the three single-domain fixtures into one state.
  EnergyFixture fx;
  fx.binding.dim = dim;
  EnergyFixture parts[3] = {matrix_fixture(rng, dim), geometry_fixture(rng, dim),
                            ideal_fixture(rng, dim)};
  int tag = 0;
  for (EnergyFixture& part : parts) {
    std::map<NodeId, NodeId> nmap;
    std::map<EdgeId, EdgeId> emap;
    for (const Node& n : part.state.nodes()) {
      if (n.type == NodeType::CompoundTerm) continue;  // rebuilt by edges
      nmap[n.id] = fx.state.add_node(n.type, n.label + "_" + std::to_string(tag), n.domain);
    }
    for (const Hyperedge& e : part.state.edges()) {
      std::vector<EntityRef> args;
      for (EntityRef ref : e.args) {
        args.push_back(ref.is_node() ? node_ref(nmap.at(ref.id)) : edge_ref(emap.at(ref.id)));
      }
      EdgeId ne = fx.state.add_edge(e.type, e.op, std::move(args), {});
      emap[e.id] = ne;
      if (e.output) nmap[*e.output] = *fx.state.edge(ne).output;
      if (part.state.is_fact(e.id)) fx.state.assert_fact(ne);
    }
    for (const auto& [node, m] : part.binding.matrices) fx.binding.matrices[nmap.at(node)] = m;
    for (const auto& [node, p] : part.binding.points) fx.binding.points[nmap.at(node)] = p;
    for (const auto& [node, slot] : part.binding.scalars) {
      ScalarSlot moved = slot;
      if (moved.ring_index >= 0) moved.ring_index += 4 * tag;  // keep ring indices distinct
      fx.binding.scalars[nmap.at(node)] = moved;
    }
    ++tag;
  }
  return fx;
}

double fd_total_energy_max_rel_err(const MathState& state, const Binding& binding,
                                   const DomainWeights& weights, double h) {
  EnergyReport report = total_energy(state, binding, weights);
  BindingLayout layout = report.layout;
  Eigen::VectorXd x = free_vector(binding, layout);
  double worst = 0.0;
  for (int i = 0; i < layout.total; ++i) {
    Binding plus = binding, minus = binding;
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    set_free_vector(plus, layout, xp);
    set_free_vector(minus, layout, xm);
    double fd = (total_energy(state, plus, weights).total -
                 total_energy(state, minus, weights).total) /
                (2.0 * h);
    double err = std::abs(report.gradient(i) - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

SuiteResult faithfulness_suite(int n_each, std::uint64_t seed, int dim) {
  SuiteResult res;
  res.name = "faithfulness";
  RngStream rng(seed);
  DomainWeights weights;
  for (int i = 0; i < n_each; ++i) {
    RngStream sub = rng.fork("true/" + std::to_string(i));
    EnergyFixture fx = (i % 4 == 3) ? make_mixed_true_fixture(sub, dim)
                                    : make_true_fixture(domain_cycle(i), sub, dim);
    double total = total_energy(fx.state, fx.binding, weights).total;
    if (total < 1e-8) {
      ++res.passed;
    } else {
      ++res.failed;
      res.failures.push_back("true state " + std::to_string(i) + " has energy " +
                             std::to_string(total));
    }
  }
  for (int i = 0; i < n_each; ++i) {
    RngStream sub = rng.fork("violated/" + std::to_string(i));
    EnergyFixture fx = make_violated_fixture(domain_cycle(i), sub, dim);
    EnergyReport report = total_energy(fx.state, fx.binding, weights);
    bool total_ok = report.total > 1e-4;
    bool local_ok = report.per_edge.at(fx.violated).value > 1e-4;
    bool others_ok = true;
    for (const auto& [edge, pe] : report.per_edge) {
      if (edge != fx.violated && pe.value > 1e-8) others_ok = false;
    }
    if (total_ok && local_ok && others_ok) {
      ++res.passed;
    } else {
      ++res.failed;
      res.failures.push_back("violated state " + std::to_string(i) + ": total=" +
                             std::to_string(report.total));
    }
  }
  return res;
}

SuiteResult smoothness_suite(int seeds, std::uint64_t seed, int dim) {
  SuiteResult res;
  res.name = "smoothness";
  RngStream rng(seed);
  const double h = 1e-4;
  const double tol = 1e-5;

  auto check = [&](const std::string& what, double analytic, double fd) {
    double err = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
    if (err <= tol) {
      ++res.passed;
    } else {
      ++res.failed;
      if (res.failures.size() < 16)
        res.failures.push_back(what + ": analytic=" + std::to_string(analytic) +
                               " fd=" + std::to_string(fd));
    }
  };

  // Matrix terms: every input coordinate of every term, central differences.
  for (int s = 0; s < seeds; ++s) {
    RngStream sub = rng.fork("mat/" + std::to_string(s));
    Mat a = random_matrix(sub, dim), b = random_matrix(sub, dim), c = random_matrix(sub, dim);
    struct Case {
      std::string name;
      std::function<MatrixEnergyTerm(const std::vector<Mat>&)> f;
      std::vector<Mat> inputs;
    };
    std::vector<Case> cases = {
        {"e_eq", [](const std::vector<Mat>& m) { return e_eq(m[0], m[1]); }, {a, b}},
        {"e_sym", [](const std::vector<Mat>& m) { return e_sym(m[0]); }, {a}},
        {"e_mult", [](const std::vector<Mat>& m) { return e_mult(m[0], m[1], m[2]); }, {a, b, c}},
        {"e_orth", [](const std::vector<Mat>& m) { return e_orth(m[0]); }, {a}},
        {"e_inv", [](const std::vector<Mat>& m) { return e_inv(m[0], m[1]); }, {a, b}},
    };
    for (auto& cs : cases) {
      MatrixEnergyTerm term = cs.f(cs.inputs);
      bool bad = false;
      for (std::size_t arg = 0; arg < cs.inputs.size() && !bad; ++arg) {
        for (int i = 0; i < dim && !bad; ++i) {
          for (int j = 0; j < dim; ++j) {
            std::vector<Mat> plus = cs.inputs, minus = cs.inputs;
            plus[arg](i, j) += h;
            minus[arg](i, j) -= h;
            double fd = (cs.f(plus).value - cs.f(minus).value) / (2.0 * h);
            double an = term.grads[arg](i, j);
            if (std::abs(an - fd) / std::max(1.0, std::abs(fd)) > tol) {
              check(cs.name, an, fd);
              bad = true;
              break;
            }
          }
        }
      }
      if (!bad) ++res.passed;
    }
  }

  // Geometry terms.
  for (int s = 0; s < seeds; ++s) {
    RngStream sub = rng.fork("geo/" + std::to_string(s));
    std::vector<Point2> pts(8);
    for (auto& p : pts) p = random_point(sub);
    if (s % 5 == 0) pts[1] = {pts[0].x + 1e-5, pts[0].y};  // near-degenerate
    struct Case {
      std::string name;
      int arity;
      std::function<GeoEnergyTerm(const std::vector<Point2>&)> f;
    };
    std::vector<Case> cases = {
        {"e_coll", 3, [](const std::vector<Point2>& p) { return e_coll(p[0], p[1], p[2]); }},
        {"e_para", 4, [](const std::vector<Point2>& p) { return e_para(p[0], p[1], p[2], p[3]); }},
        {"e_perp", 4, [](const std::vector<Point2>& p) { return e_perp(p[0], p[1], p[2], p[3]); }},
        {"e_cong", 4, [](const std::vector<Point2>& p) { return e_cong(p[0], p[1], p[2], p[3]); }},
        {"e_ratio", 8,
         [](const std::vector<Point2>& p) {
           return e_ratio(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]);
         }},
    };
    for (auto& cs : cases) {
      std::vector<Point2> in(pts.begin(), pts.begin() + cs.arity);
      GeoEnergyTerm term = cs.f(in);
      bool bad = false;
      for (int arg = 0; arg < cs.arity && !bad; ++arg) {
        for (int coord = 0; coord < 2; ++coord) {
          std::vector<Point2> plus = in, minus = in;
          (coord == 0 ? plus[static_cast<std::size_t>(arg)].x
                      : plus[static_cast<std::size_t>(arg)].y) += h;
          (coord == 0 ? minus[static_cast<std::size_t>(arg)].x
                      : minus[static_cast<std::size_t>(arg)].y) -= h;
          double fd = (cs.f(plus).value - cs.f(minus).value) / (2.0 * h);
          double an = term.grads[static_cast<std::size_t>(arg)][static_cast<std::size_t>(coord)];
          if (std::abs(an - fd) / std::max(1.0, std::abs(fd)) > tol) {
            check(cs.name, an, fd);
            bad = true;
            break;
          }
        }
      }
      if (!bad) ++res.passed;
    }
  }

  // Total energy over random mixed states, all three domains at once.
  DomainWeights weights;
  for (int s = 0; s < seeds; ++s) {
    RngStream sub = rng.fork("total/" + std::to_string(s));
    EnergyFixture fx = make_mixed_true_fixture(sub, dim);
    if (s % 2 == 1) violate_one(fx, sub);
    for (const auto& [node, m] : fx.binding.matrices) fx.binding.free_slots.insert(node);
    for (const auto& [node, p] : fx.binding.points) fx.binding.free_slots.insert(node);
    for (const auto& [node, sl] : fx.binding.scalars) fx.binding.free_slots.insert(node);
    double err = fd_total_energy_max_rel_err(fx.state, fx.binding, weights, h);
    if (err <= tol) {
      ++res.passed;
    } else {
      ++res.failed;
      res.failures.push_back("total_energy fd mismatch, rel err " + std::to_string(err));
    }
  }
  return res;
}

SuiteResult localization_suite(int cases, std::uint64_t seed, int dim) {
  SuiteResult res;
  res.name = "localization";
  RngStream rng(seed);
  DomainWeights weights;
  const double tol = 1e-8;
  for (int i = 0; i < cases; ++i) {
    RngStream sub = rng.fork("loc/" + std::to_string(i));
    EnergyFixture fx = make_mixed_true_fixture(sub, dim);
    if (sub.next_double() < 0.5) violate_one(fx, sub);
    EnergyReport report = total_energy(fx.state, fx.binding, weights);
    bool all_below = true;
    for (const auto& [edge, pe] : report.per_edge) all_below &= pe.value < tol;
    if ((report.total < tol) == all_below) {
      ++res.passed;
    } else {
      ++res.failed;
      res.failures.push_back("localization violated at case " + std::to_string(i));
    }
  }
  return res;
}

}  // namespace mathesis
