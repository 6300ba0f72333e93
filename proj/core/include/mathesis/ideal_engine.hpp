#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mathesis/polynomial.hpp"

namespace mathesis {

/// Witness certificate for (approximate) ideal membership at a degree bound:
/// h ~ sum_i g_i f_i with deg(g_i) <= degree_bound_used.
struct WitnessSolution {
  std::vector<Polynomial> witnesses;
  Polynomial residual;
  double energy = 0.0;  // residual coefficient-l2 norm, squared
  int degree_bound_used = 0;
};

struct IdealOptions {
  int slack = 1;
  int degree_cap = 8;
  int basis_cap = 20000;
  double tol = 1e-8;
};

/// All monomials in n_vars variables of total degree <= max_degree, graded
/// lexicographic. Throws CapacityError when the count exceeds count_cap.
std::vector<Monomial> monomial_basis(std::size_t n_vars, int max_degree,
                                     int count_cap = 20000);

/// Practical witness degree bound: min(cap, deg h + max_i deg f_i + slack).
int effective_degree_bound(const Polynomial& h, const std::vector<Polynomial>& F,
                           const IdealOptions& opt);

/// Minimizes ||h - sum_i g_i f_i||^2 over witness polynomials g_i drawn from
/// the monomial basis of the given degree bound (linear least squares in the
/// stacked g-coefficients; Tikhonov damping 1e-12 keeps rank-deficient
/// systems deterministic). F may be empty: the residual is then h itself.
WitnessSolution solve_witness(const Polynomial& h, const std::vector<Polynomial>& F,
                              int degree_bound, int basis_cap = 20000);

/// Smallest k <= k_max with solve_witness(h^k, F, bound) below tol, if any.
std::optional<std::pair<int, WitnessSolution>> radical_check(
    const Polynomial& h, const std::vector<Polynomial>& F, int k_max, int degree_bound,
    double tol = 1e-8);

/// Residual energies before and after extending the basis with f_new.
std::pair<double, double> witness_energy_step(const Polynomial& h,
                                              const std::vector<Polynomial>& F_t,
                                              const Polynomial& f_new, int degree_bound);

}  // namespace mathesis
