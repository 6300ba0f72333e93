#include "mathesis/ideal_engine.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>

namespace mathesis {

std::vector<Monomial> monomial_basis(std::size_t n_vars, int max_degree, int count_cap) {
  if (max_degree < 0) throw Error("monomial_basis: negative degree");
  // Count first: C(n_vars + max_degree, max_degree), guarded against the cap.
  long double count = 1.0L;
  for (std::size_t i = 1; i <= n_vars; ++i)
    count = count * static_cast<long double>(max_degree + i) / static_cast<long double>(i);
  if (count > static_cast<long double>(count_cap))
    throw CapacityError("monomial basis of " + std::to_string(n_vars) + " vars, degree " +
                        std::to_string(max_degree) + " has ~" +
                        std::to_string(static_cast<long long>(count)) +
                        " elements, over the cap of " + std::to_string(count_cap) +
                        "; lower the degree bound or raise ideal.basis_cap");

  std::vector<Monomial> out;
  out.reserve(static_cast<std::size_t>(count));
  Monomial m{std::vector<std::uint32_t>(n_vars, 0)};
  // Depth-first enumeration, then a grlex sort for the canonical order.
  std::function<void(std::size_t, int)> rec = [&](std::size_t var, int remaining) {
    if (var == n_vars) {
      out.push_back(m);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      m.exps[var] = static_cast<std::uint32_t>(e);
      rec(var + 1, remaining - e);
    }
    m.exps[var] = 0;
  };
  rec(0, max_degree);
  std::sort(out.begin(), out.end(), GrlexLess{});
  return out;
}

int effective_degree_bound(const Polynomial& h, const std::vector<Polynomial>& F,
                           const IdealOptions& opt) {
  if (F.empty()) throw Error("effective_degree_bound: empty premise set");
  int dh = std::max(0, h.degree());
  int df = 0;
  for (const Polynomial& f : F) df = std::max(df, std::max(0, f.degree()));
  return std::min(opt.degree_cap, dh + df + opt.slack);
}

WitnessSolution solve_witness(const Polynomial& h, const std::vector<Polynomial>& F,
                              int degree_bound, int basis_cap) {
  if (degree_bound < 0) throw Error("solve_witness: negative degree bound");
  const std::size_t n = h.n_vars();
  for (const Polynomial& f : F) {
    if (f.n_vars() != n) throw Error("solve_witness: variable arity mismatch");
  }

  WitnessSolution sol;
  sol.degree_bound_used = degree_bound;
  if (F.empty()) {
    // No basis: the only witness is zero and the residual is h itself.
    sol.residual = h;
    sol.energy = h.norm_sq();
    return sol;
  }

  std::vector<Monomial> basis = monomial_basis(n, degree_bound, basis_cap);
  const std::size_t q = basis.size();
  const std::size_t s = F.size();
  const std::size_t cols = s * q;

  // Column polynomials f_i * m_j and the shared row (monomial) index.
  std::map<Monomial, int, GrlexLess> row_index;
  auto intern = [&row_index](const Monomial& m) {
    auto [it, fresh] = row_index.try_emplace(m, static_cast<int>(row_index.size()));
    return it->second;
  };
  for (const auto& [m, c] : h.terms()) intern(m);

  std::vector<std::vector<std::pair<int, double>>> col_entries(cols);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < q; ++j) {
      Polynomial col(n);
      for (const auto& [m, c] : F[i].terms()) {
        Monomial prod{std::vector<std::uint32_t>(n)};
        for (std::size_t v = 0; v < n; ++v) prod.exps[v] = m.exps[v] + basis[j].exps[v];
        col.add_term(prod, c);
      }
      auto& entries = col_entries[i * q + j];
      entries.reserve(col.terms().size());
      for (const auto& [m, c] : col.terms()) entries.emplace_back(intern(m), c);
    }
  }

  const std::size_t rows = row_index.size();
  if (rows * cols > std::size_t(5e7))
    throw CapacityError("witness system of " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " exceeds the size guard");

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                            static_cast<Eigen::Index>(cols));
  for (std::size_t cidx = 0; cidx < cols; ++cidx) {
    for (const auto& [r, c] : col_entries[cidx])
      A(r, static_cast<Eigen::Index>(cidx)) = c;
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
  for (const auto& [m, c] : h.terms()) b(row_index.at(m)) = c;

  // Normal equations with Tikhonov damping for rank deficiency.
  Eigen::MatrixXd G = A.transpose() * A;
  G.diagonal().array() += 1e-12;
  Eigen::VectorXd x = Eigen::LDLT<Eigen::MatrixXd>(G).solve(A.transpose() * b);

  sol.witnesses.reserve(s);
  Polynomial combo(n);
  for (std::size_t i = 0; i < s; ++i) {
    Polynomial g(n);
    for (std::size_t j = 0; j < q; ++j) {
      double c = x(static_cast<Eigen::Index>(i * q + j));
      if (c != 0.0) g.add_term(basis[j], c);
    }
    combo = combo + g * F[i];
    sol.witnesses.push_back(std::move(g));
  }
  sol.residual = h - combo;
  sol.energy = sol.residual.norm_sq();
  return sol;
}

std::optional<std::pair<int, WitnessSolution>> radical_check(
    const Polynomial& h, const std::vector<Polynomial>& F, int k_max, int degree_bound,
    double tol) {
  if (k_max < 1) throw Error("radical_check: k_max must be >= 1");
  for (int k = 1; k <= k_max; ++k) {
    WitnessSolution sol = solve_witness(h.pow(k), F, degree_bound);
    if (sol.energy < tol) return std::make_pair(k, std::move(sol));
  }
  return std::nullopt;
}

std::pair<double, double> witness_energy_step(const Polynomial& h,
                                              const std::vector<Polynomial>& F_t,
                                              const Polynomial& f_new, int degree_bound) {
  double e_t = solve_witness(h, F_t, degree_bound).energy;
  std::vector<Polynomial> extended = F_t;
  extended.push_back(f_new);
  double e_t1 = solve_witness(h, extended, degree_bound).energy;
  return {e_t, e_t1};
}

}  // namespace mathesis
