#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mathesis/errors.hpp"

namespace mathesis {

/// Exponent vector over the ring's declared variables.
struct Monomial {
  std::vector<std::uint32_t> exps;

  int total_degree() const {
    int d = 0;
    for (auto e : exps) d += static_cast<int>(e);
    return d;
  }
  bool operator==(const Monomial&) const = default;
};

/// Graded lexicographic order: lower total degree first; within a degree,
/// lexicographically greater exponent vectors first (1, x, y, x^2, x*y, y^2, ...).
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    int da = a.total_degree(), db = b.total_degree();
    if (da != db) return da < db;
    return a.exps > b.exps;
  }
};

/// The ordered variable list of a polynomial problem.
struct PolyRing {
  std::vector<std::string> vars;

  std::size_t arity() const { return vars.size(); }
  int index_of(const std::string& name) const;  // -1 when absent
};

/// Sparse multivariate polynomial with 64-bit float coefficients.
/// Coefficients with |c| < 1e-15 are pruned; iteration is graded-lex.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::size_t n_vars) : n_vars_(n_vars) {}

  static Polynomial constant(std::size_t n_vars, double c);
  static Polynomial variable(std::size_t n_vars, std::size_t idx);

  std::size_t n_vars() const { return n_vars_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;  // -1 for the zero polynomial

  void add_term(const Monomial& m, double coeff);
  double coeff(const Monomial& m) const;

  const std::map<Monomial, double, GrlexLess>& terms() const { return terms_; }

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial pow(int k) const;

  /// Sum of squared coefficients (the l2 coefficient norm, squared).
  double norm_sq() const;

  /// Evaluates at a point (values indexed by ring variable).
  double eval(const std::vector<double>& values) const;

  /// Partial derivative with respect to variable idx.
  Polynomial derivative(std::size_t idx) const;

  bool operator==(const Polynomial& o) const {
    return n_vars_ == o.n_vars_ && terms_ == o.terms_;
  }

 private:
  void check_arity(const Polynomial& o) const {
    if (n_vars_ != o.n_vars_) throw Error("polynomial arity mismatch");
  }

  std::size_t n_vars_ = 0;
  std::map<Monomial, double, GrlexLess> terms_;
};

/// Fixture text form, e.g. "3*x^2*y - 1.5*y + 2".
Polynomial parse_polynomial(const std::string& text, const PolyRing& ring);
std::string polynomial_text(const Polynomial& p, const PolyRing& ring);

}  // namespace mathesis
