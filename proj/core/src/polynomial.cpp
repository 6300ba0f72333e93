#include "mathesis/polynomial.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mathesis {

namespace {
constexpr double kPrune = 1e-15;
}

int PolyRing::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Polynomial Polynomial::constant(std::size_t n_vars, double c) {
  Polynomial p(n_vars);
  p.add_term(Monomial{std::vector<std::uint32_t>(n_vars, 0)}, c);
  return p;
}

Polynomial Polynomial::variable(std::size_t n_vars, std::size_t idx) {
  if (idx >= n_vars) throw Error("polynomial variable index out of range");
  Polynomial p(n_vars);
  Monomial m{std::vector<std::uint32_t>(n_vars, 0)};
  m.exps[idx] = 1;
  p.add_term(m, 1.0);
  return p;
}

int Polynomial::degree() const {
  if (terms_.empty()) return -1;
  return std::prev(terms_.end())->first.total_degree();
}

void Polynomial::add_term(const Monomial& m, double coeff) {
  if (m.exps.size() != n_vars_) throw Error("monomial arity mismatch");
  auto [it, inserted] = terms_.try_emplace(m, coeff);
  if (!inserted) it->second += coeff;
  if (std::abs(it->second) < kPrune) terms_.erase(it);
}

double Polynomial::coeff(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  check_arity(o);
  Polynomial out = *this;
  for (const auto& [m, c] : o.terms_) out.add_term(m, c);
  return out;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  check_arity(o);
  Polynomial out = *this;
  for (const auto& [m, c] : o.terms_) out.add_term(m, -c);
  return out;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  check_arity(o);
  Polynomial out(n_vars_);
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : o.terms_) {
      Monomial m{std::vector<std::uint32_t>(n_vars_)};
      for (std::size_t i = 0; i < n_vars_; ++i) m.exps[i] = ma.exps[i] + mb.exps[i];
      out.add_term(m, ca * cb);
    }
  }
  return out;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial out(n_vars_);
  for (const auto& [m, c] : terms_) out.add_term(m, c * s);
  return out;
}

Polynomial Polynomial::pow(int k) const {
  if (k < 0) throw Error("polynomial pow: negative exponent");
  Polynomial out = Polynomial::constant(n_vars_, 1.0);
  for (int i = 0; i < k; ++i) out = out * (*this);
  return out;
}

double Polynomial::norm_sq() const {
  double s = 0.0;
  for (const auto& [m, c] : terms_) s += c * c;
  return s;
}

double Polynomial::eval(const std::vector<double>& values) const {
  if (values.size() != n_vars_) throw Error("polynomial eval: wrong point arity");
  double total = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (std::size_t i = 0; i < n_vars_; ++i) {
      for (std::uint32_t k = 0; k < m.exps[i]; ++k) t *= values[i];
    }
    total += t;
  }
  return total;
}

Polynomial Polynomial::derivative(std::size_t idx) const {
  if (idx >= n_vars_) throw Error("polynomial derivative: index out of range");
  Polynomial out(n_vars_);
  for (const auto& [m, c] : terms_) {
    if (m.exps[idx] == 0) continue;
    Monomial d = m;
    d.exps[idx] -= 1;
    out.add_term(d, c * static_cast<double>(m.exps[idx]));
  }
  return out;
}

namespace {

struct PolyLexer {
  const std::string& text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
};

// term := [number] ('*'? ident ('^' int)?)*
Polynomial parse_term(PolyLexer& lx, const PolyRing& ring) {
  double coeff = 1.0;
  Monomial m{std::vector<std::uint32_t>(ring.arity(), 0)};
  bool saw_anything = false;

  char c = lx.peek();
  if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
    std::size_t used = 0;
    coeff = std::stod(lx.text.substr(lx.pos), &used);
    lx.pos += used;
    saw_anything = true;
  }
  while (true) {
    char p = lx.peek();
    if (p == '*') {
      ++lx.pos;
      continue;
    }
    if (!std::isalpha(static_cast<unsigned char>(p)) && p != '_') break;
    std::size_t start = lx.pos;
    while (lx.pos < lx.text.size() &&
           (std::isalnum(static_cast<unsigned char>(lx.text[lx.pos])) || lx.text[lx.pos] == '_'))
      ++lx.pos;
    std::string name = lx.text.substr(start, lx.pos - start);
    int idx = ring.index_of(name);
    if (idx < 0) throw Error("polynomial text: unknown variable '" + name + "'");
    std::uint32_t e = 1;
    if (lx.peek() == '^') {
      ++lx.pos;
      std::size_t used = 0;
      e = static_cast<std::uint32_t>(std::stoul(lx.text.substr(lx.pos), &used));
      lx.pos += used;
    }
    m.exps[static_cast<std::size_t>(idx)] += e;
    saw_anything = true;
  }
  if (!saw_anything) throw Error("polynomial text: empty term");
  Polynomial out(ring.arity());
  out.add_term(m, coeff);
  return out;
}

}  // namespace

Polynomial parse_polynomial(const std::string& text, const PolyRing& ring) {
  PolyLexer lx{text};
  Polynomial out(ring.arity());
  double sign = 1.0;
  char c = lx.peek();
  if (c == '-') {
    sign = -1.0;
    ++lx.pos;
  } else if (c == '+') {
    ++lx.pos;
  }
  while (!lx.at_end()) {
    out = out + parse_term(lx, ring) * sign;
    if (lx.at_end()) break;
    char op = lx.peek();
    if (op == '+')
      sign = 1.0;
    else if (op == '-')
      sign = -1.0;
    else
      throw Error(std::string("polynomial text: expected + or -, got '") + op + "'");
    ++lx.pos;
  }
  return out;
}

std::string polynomial_text(const Polynomial& p, const PolyRing& ring) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  // Highest-degree terms first for readability.
  std::vector<std::pair<Monomial, double>> terms(p.terms().begin(), p.terms().end());
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) {
    double c = it->second;
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    first = false;
    double a = std::abs(c);
    bool unit = std::abs(a - 1.0) < 1e-15;
    bool has_var = it->first.total_degree() > 0;
    char buf[40];
    if (!unit || !has_var) {
      std::snprintf(buf, sizeof(buf), "%.17g", a);
      os << buf;
    }
    bool printed = !unit || !has_var;
    for (std::size_t i = 0; i < it->first.exps.size(); ++i) {
      std::uint32_t e = it->first.exps[i];
      if (e == 0) continue;
      if (printed) os << "*";
      os << ring.vars[i];
      if (e > 1) os << "^" << e;
      printed = true;
    }
  }
  return os.str();
}

}  // namespace mathesis
