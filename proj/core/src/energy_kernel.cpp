#include "mathesis/energy_kernel.hpp"

#include <algorithm>
#include <cmath>

namespace mathesis {

std::string_view energy_domain_name(EnergyDomain d) {
  switch (d) {
    case EnergyDomain::Matrix: return "matrix";
    case EnergyDomain::Ideal: return "ideal";
    case EnergyDomain::Geometry: return "geometry";
    case EnergyDomain::NonEnergetic: return "none";
  }
  return "?";
}

EnergyDomain classify_edge(const MathState& state, EdgeId edge) {
  const Hyperedge& e = state.edge(edge);
  if (e.type != EdgeType::Predicate) return EnergyDomain::NonEnergetic;
  const std::string& op = e.op;
  if (op == "Symmetric" || op == "Orthogonal" || op == "MatMul" || op == "InversePair")
    return EnergyDomain::Matrix;
  if (op == "Collinear" || op == "Parallel" || op == "Perpendicular" || op == "Congruent" ||
      op == "RatioEquals")
    return EnergyDomain::Geometry;
  if (op == "Equals") {
    Domain d0 = state.node_domain(e.args[0].id);
    Domain d1 = state.node_domain(e.args[1].id);
    if (d0 != d1)
      throw TypingError("Equals over mixed domains (" + std::string(domain_name(d0)) + " vs " +
                        std::string(domain_name(d1)) + ")");
    if (d0 == Domain::Matrix) return EnergyDomain::Matrix;
    if (d0 == Domain::Scalar) return EnergyDomain::Ideal;
    throw TypingError("Equals over unsupported domain " + std::string(domain_name(d0)));
  }
  return EnergyDomain::NonEnergetic;
}

namespace {

/// Forward evaluation of matrix-valued terms with reverse-mode accumulation
/// into leaf matrices. Compounds over Sum/Sub/Product/Transpose are
/// supported; Inverse terms have no closed evaluation and are rejected.
class MatrixTermEval {
 public:
  MatrixTermEval(const MathState& s, const Binding& b) : state_(s), binding_(b) {}

  const Mat& eval(NodeId id) {
    auto it = values_.find(id);
    if (it != values_.end()) return it->second;
    const Node& n = state_.node(id);
    Mat v;
    if (!n.definition) {
      auto slot = binding_.matrices.find(id);
      if (slot == binding_.matrices.end())
        throw BindingError("missing matrix binding for node '" + n.label + "'");
      if (slot->second.rows() != binding_.dim || slot->second.cols() != binding_.dim)
        throw DimensionError("matrix binding for '" + n.label + "' is not " +
                             std::to_string(binding_.dim) + "x" + std::to_string(binding_.dim));
      v = slot->second;
    } else {
      const Hyperedge& def = state_.edge(*n.definition);
      if (def.op == "Sum") {
        v = eval(def.args[0].id) + eval(def.args[1].id);
      } else if (def.op == "Sub") {
        v = eval(def.args[0].id) - eval(def.args[1].id);
      } else if (def.op == "Product") {
        v = eval(def.args[0].id) * eval(def.args[1].id);
      } else if (def.op == "Transpose") {
        v = eval(def.args[0].id).transpose();
      } else if (def.op == "Inverse") {
        throw TypingError("Inverse terms are not numerically evaluable; assert an InversePair fact");
      } else {
        throw TypingError("constructor '" + def.op + "' does not build a matrix term");
      }
    }
    return values_[id] = std::move(v);
  }

  void backward(NodeId id, const Mat& d) {
    const Node& n = state_.node(id);
    if (!n.definition) {
      auto [it, fresh] = leaf_grads_.try_emplace(id, Mat::Zero(d.rows(), d.cols()));
      it->second += d;
      return;
    }
    const Hyperedge& def = state_.edge(*n.definition);
    if (def.op == "Sum") {
      backward(def.args[0].id, d);
      backward(def.args[1].id, d);
    } else if (def.op == "Sub") {
      backward(def.args[0].id, d);
      backward(def.args[1].id, -d);
    } else if (def.op == "Product") {
      const Mat& a = values_.at(def.args[0].id);
      const Mat& b = values_.at(def.args[1].id);
      backward(def.args[0].id, d * b.transpose());
      backward(def.args[1].id, a.transpose() * d);
    } else if (def.op == "Transpose") {
      backward(def.args[0].id, d.transpose());
    }
  }

  const std::map<NodeId, Mat>& leaf_grads() const { return leaf_grads_; }

 private:
  const MathState& state_;
  const Binding& binding_;
  std::map<NodeId, Mat> values_;
  std::map<NodeId, Mat> leaf_grads_;
};

/// Same idea for point-valued terms (leaf points and Midpoint chains).
class PointTermEval {
 public:
  PointTermEval(const MathState& s, const Binding& b) : state_(s), binding_(b) {}

  Point2 eval(NodeId id) {
    auto it = values_.find(id);
    if (it != values_.end()) return it->second;
    const Node& n = state_.node(id);
    Point2 v;
    if (!n.definition) {
      auto slot = binding_.points.find(id);
      if (slot == binding_.points.end())
        throw BindingError("missing point binding for node '" + n.label + "'");
      v = slot->second;
    } else {
      const Hyperedge& def = state_.edge(*n.definition);
      if (def.op != "Midpoint")
        throw TypingError("constructor '" + def.op + "' does not build a point term");
      Point2 a = eval(def.args[0].id);
      Point2 b = eval(def.args[1].id);
      v = Point2{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    }
    values_[id] = v;
    return v;
  }

  void backward(NodeId id, double dx, double dy) {
    const Node& n = state_.node(id);
    if (!n.definition) {
      auto& g = leaf_grads_[id];
      g[0] += dx;
      g[1] += dy;
      return;
    }
    const Hyperedge& def = state_.edge(*n.definition);
    backward(def.args[0].id, 0.5 * dx, 0.5 * dy);
    backward(def.args[1].id, 0.5 * dx, 0.5 * dy);
  }

  const std::map<NodeId, std::array<double, 2>>& leaf_grads() const { return leaf_grads_; }

 private:
  const MathState& state_;
  const Binding& binding_;
  std::map<NodeId, Point2> values_;
  std::map<NodeId, std::array<double, 2>> leaf_grads_;
};

}  // namespace

Polynomial lift_scalar_term(const MathState& state, const Binding& binding, NodeId node) {
  const std::size_t arity = binding.ring_size();
  const Node& n = state.node(node);
  if (!n.definition) {
    auto slot = binding.scalars.find(node);
    if (slot == binding.scalars.end())
      throw BindingError("missing scalar slot for node '" + n.label + "'");
    if (slot->second.ring_index >= 0)
      return Polynomial::variable(arity, static_cast<std::size_t>(slot->second.ring_index));
    if (slot->second.value) return Polynomial::constant(arity, *slot->second.value);
    throw BindingError("scalar slot for node '" + n.label + "' has neither index nor value");
  }
  const Hyperedge& def = state.edge(*n.definition);
  if (def.op == "Sum")
    return lift_scalar_term(state, binding, def.args[0].id) +
           lift_scalar_term(state, binding, def.args[1].id);
  if (def.op == "Sub")
    return lift_scalar_term(state, binding, def.args[0].id) -
           lift_scalar_term(state, binding, def.args[1].id);
  if (def.op == "Product")
    return lift_scalar_term(state, binding, def.args[0].id) *
           lift_scalar_term(state, binding, def.args[1].id);
  throw TypingError("constructor '" + def.op + "' is not liftable to a polynomial");
}

namespace {

struct GradScatter {
  const BindingLayout& layout;
  Eigen::VectorXd& grad;
  std::map<NodeId, const BindingLayout::Entry*> by_node;

  GradScatter(const BindingLayout& l, Eigen::VectorXd& g) : layout(l), grad(g) {
    for (const auto& e : l.entries) by_node[e.node] = &e;
  }

  void matrix(NodeId node, const Mat& g, double w) {
    auto it = by_node.find(node);
    if (it == by_node.end()) return;  // frozen slot
    int k = it->second->offset;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) grad(k++) += w * g(i, j);
  }
  void point(NodeId node, double gx, double gy, double w) {
    auto it = by_node.find(node);
    if (it == by_node.end()) return;
    grad(it->second->offset) += w * gx;
    grad(it->second->offset + 1) += w * gy;
  }
  void scalar(NodeId node, double g, double w) {
    auto it = by_node.find(node);
    if (it == by_node.end()) return;
    grad(it->second->offset) += w * g;
  }
};

/// Point operands of a geometry predicate, with 2-line forms unwrapped to
/// their four construction points.
std::vector<NodeId> geometry_points(const MathState& state, const Hyperedge& e) {
  std::vector<NodeId> pts;
  if ((e.op == "Parallel" || e.op == "Perpendicular") && e.args.size() == 2) {
    for (EntityRef ref : e.args) {
      const Node& line = state.node(ref.id);
      if (!line.definition) throw TypingError("line operand without a construction");
      const Hyperedge& def = state.edge(*line.definition);
      pts.push_back(def.args[0].id);
      pts.push_back(def.args[1].id);
    }
  } else {
    for (EntityRef ref : e.args) pts.push_back(ref.id);
  }
  return pts;
}

}  // namespace

EnergyReport total_energy(const MathState& state, const Binding& binding,
                          const DomainWeights& weights) {
  EnergyReport report;
  report.layout = BindingLayout::of(binding);
  report.gradient = Eigen::VectorXd::Zero(report.layout.total);
  GradScatter scatter(report.layout, report.gradient);

  // Reverse map ring index -> node for scalar gradient scatter.
  std::map<int, NodeId> ring_node;
  for (const auto& [node, slot] : binding.scalars) {
    if (slot.ring_index >= 0) ring_node[slot.ring_index] = node;
  }

  for (EdgeId fact : state.facts()) {
    EnergyDomain domain = classify_edge(state, fact);
    const Hyperedge& e = state.edge(fact);
    double value = 0.0;
    switch (domain) {
      case EnergyDomain::NonEnergetic:
        report.per_edge[fact] = {domain, 0.0};
        continue;
      case EnergyDomain::Matrix: {
        const double w = weights.matrix;
        MatrixTermEval ev(state, binding);
        MatrixEnergyTerm term;
        if (e.op == "Equals") {
          term = e_eq(ev.eval(e.args[0].id), ev.eval(e.args[1].id));
          ev.backward(e.args[0].id, term.grads[0]);
          ev.backward(e.args[1].id, term.grads[1]);
        } else if (e.op == "Symmetric") {
          term = e_sym(ev.eval(e.args[0].id));
          ev.backward(e.args[0].id, term.grads[0]);
        } else if (e.op == "Orthogonal") {
          term = e_orth(ev.eval(e.args[0].id));
          ev.backward(e.args[0].id, term.grads[0]);
        } else if (e.op == "MatMul") {
          term = e_mult(ev.eval(e.args[0].id), ev.eval(e.args[1].id), ev.eval(e.args[2].id));
          for (int i = 0; i < 3; ++i) ev.backward(e.args[i].id, term.grads[i]);
        } else {  // InversePair
          term = e_inv(ev.eval(e.args[0].id), ev.eval(e.args[1].id));
          ev.backward(e.args[0].id, term.grads[0]);
          ev.backward(e.args[1].id, term.grads[1]);
        }
        for (const auto& [leaf, g] : ev.leaf_grads()) scatter.matrix(leaf, g, w);
        value = w * term.value;
        break;
      }
      case EnergyDomain::Geometry: {
        const double w = weights.geometry;
        PointTermEval ev(state, binding);
        std::vector<NodeId> pts = geometry_points(state, e);
        std::vector<Point2> xs;
        xs.reserve(pts.size());
        for (NodeId p : pts) xs.push_back(ev.eval(p));
        GeoEnergyTerm term;
        if (e.op == "Collinear") {
          term = e_coll(xs[0], xs[1], xs[2]);
        } else if (e.op == "Parallel") {
          term = e_para(xs[0], xs[1], xs[2], xs[3]);
        } else if (e.op == "Perpendicular") {
          term = e_perp(xs[0], xs[1], xs[2], xs[3]);
        } else if (e.op == "Congruent") {
          term = e_cong(xs[0], xs[1], xs[2], xs[3]);
        } else {  // RatioEquals
          term = e_ratio(xs[0], xs[1], xs[2], xs[3], xs[4], xs[5], xs[6], xs[7]);
        }
        for (std::size_t i = 0; i < pts.size(); ++i)
          ev.backward(pts[i], term.grads[i][0], term.grads[i][1]);
        for (const auto& [leaf, g] : ev.leaf_grads()) scatter.point(leaf, g[0], g[1], w);
        if (term.degenerate)
          report.warnings.push_back("degenerate zero-length segment in edge E" +
                                    std::to_string(fact));
        value = w * term.value;
        break;
      }
      case EnergyDomain::Ideal: {
        const double w = weights.ideal;
        Polynomial p = lift_scalar_term(state, binding, e.args[0].id) -
                       lift_scalar_term(state, binding, e.args[1].id);
        std::set<int> needed;
        for (const auto& [m, c] : p.terms()) {
          for (std::size_t i = 0; i < m.exps.size(); ++i)
            if (m.exps[i] > 0) needed.insert(static_cast<int>(i));
        }
        std::vector<double> vals = binding.ring_values(needed);
        double r = p.eval(vals);
        value = w * r * r;
        for (int idx : needed) {
          double dr = p.derivative(static_cast<std::size_t>(idx)).eval(vals);
          scatter.scalar(ring_node.at(idx), 2.0 * r * dr, w);
        }
        break;
      }
    }
    report.per_edge[fact] = {domain, value};
    report.total += value;
  }
  return report;
}

bool is_consistent(const MathState& state, const Binding& binding, const DomainWeights& weights,
                   double tol) {
  return total_energy(state, binding, weights).total < tol;
}

MinimizeResult minimize_binding(const MathState& state, const Binding& binding,
                                const DomainWeights& weights, int max_steps, double lr) {
  MinimizeResult res;
  res.binding = binding;
  res.report = total_energy(state, res.binding, weights);
  res.energy_sequence.push_back(res.report.total);
  BindingLayout layout = res.report.layout;
  if (layout.total == 0) throw Error("minimize_binding: no free slots");

  Eigen::VectorXd x = free_vector(res.binding, layout);
  for (int step = 0; step < max_steps; ++step) {
    const Eigen::VectorXd& g = res.report.gradient;
    double gnorm_sq = g.squaredNorm();
    if (gnorm_sq < 1e-28 || res.report.total == 0.0) {
      res.converged = true;
      break;
    }
    // Armijo backtracking: accept f(x - a g) <= f(x) - c a |g|^2.
    double alpha = lr;
    bool accepted = false;
    while (alpha > 1e-18) {
      Binding trial = res.binding;
      set_free_vector(trial, layout, x - alpha * g);
      EnergyReport trial_report = total_energy(state, trial, weights);
      if (trial_report.total <= res.report.total - 1e-4 * alpha * gnorm_sq) {
        x = x - alpha * g;
        res.binding = std::move(trial);
        res.report = std::move(trial_report);
        res.energy_sequence.push_back(res.report.total);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // stalled; best-so-far is in res
  }
  if (res.report.total < 1e-12) res.converged = true;
  return res;
}

}  // namespace mathesis
