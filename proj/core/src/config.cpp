#include "mathesis/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mathesis/errors.hpp"
#include "mathesis/rng.hpp"

namespace mathesis {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Entry {
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (is.fail()) throw Error("config: bad value '" + v + "' for key " + key);
  return out;
}

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> reg = [] {
    std::map<std::string, Entry> m;
    auto add_int = [&m](const std::string& key, int Config::* field) {
      m[key] = Entry{[field, key](Config& c, const std::string& v) { c.*field = parse_num<int>(v, key); },
                     [field](const Config& c) { return std::to_string(c.*field); }};
    };
    auto add_double = [&m](const std::string& key, double Config::* field) {
      m[key] = Entry{[field, key](Config& c, const std::string& v) { c.*field = parse_num<double>(v, key); },
                     [field](const Config& c) { return fmt_double(c.*field); }};
    };
    auto add_u64 = [&m](const std::string& key, std::uint64_t Config::* field) {
      m[key] = Entry{[field, key](Config& c, const std::string& v) { c.*field = parse_num<std::uint64_t>(v, key); },
                     [field](const Config& c) { return std::to_string(c.*field); }};
    };
    add_int("energy.dim_d", &Config::energy_dim_d);
    add_double("energy.tol", &Config::energy_tol);
    add_double("energy.weights.matrix", &Config::w_matrix);
    add_double("energy.weights.ideal", &Config::w_ideal);
    add_double("energy.weights.geometry", &Config::w_geometry);
    add_int("opt.steps", &Config::opt_steps);
    add_double("opt.lr", &Config::opt_lr);
    add_int("ideal.slack", &Config::ideal_slack);
    add_int("ideal.degree_cap", &Config::ideal_degree_cap);
    add_int("ideal.basis_cap", &Config::ideal_basis_cap);
    add_double("ideal.tol", &Config::ideal_tol);
    add_int("graph.term_budget", &Config::term_budget);
    add_int("brain.d_model", &Config::brain_d_model);
    add_int("brain.layers", &Config::brain_layers);
    add_int("brain.max_arity", &Config::brain_max_arity);
    add_double("train.gamma", &Config::train_gamma);
    add_double("train.lambda_cost", &Config::train_lambda_cost);
    add_double("train.r_success", &Config::train_r_success);
    add_double("train.eps_tol", &Config::train_eps_tol);
    add_int("train.t_max", &Config::train_t_max);
    add_double("train.clip", &Config::train_clip);
    add_double("train.lr", &Config::train_lr);
    add_int("train.epochs", &Config::train_epochs);
    add_int("train.batch_episodes", &Config::train_batch_episodes);
    add_double("train.entropy_coef", &Config::train_entropy_coef);
    add_int("mcts.sims", &Config::mcts_sims);
    add_double("mcts.c_puct", &Config::mcts_c_puct);
    add_int("eps.generations", &Config::eps_generations);
    add_int("eps.pop_size", &Config::eps_pop_size);
    add_int("eps.elitism", &Config::eps_elitism);
    add_double("eps.temperature", &Config::eps_temperature);
    add_u64("seed", &Config::seed);
    add_int("workers", &Config::workers);
    return m;
  }();
  return reg;
}

}  // namespace

void Config::apply_override(const std::string& key, const std::string& value) {
  auto it = registry().find(key);
  if (it == registry().end()) throw Error("config: unknown key '" + key + "'");
  it->second.set(*this, trim(value));
}

void Config::apply_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw Error("config: " + origin + ":" + std::to_string(lineno) + ": expected key=value");
    apply_override(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Config::apply_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  apply_text(ss.str(), path);
}

std::string Config::canonical_text() const {
  std::string out;
  for (const auto& [key, entry] : registry()) {
    out += key;
    out += "=";
    out += entry.get(*this);
    out += "\n";
  }
  return out;
}

std::string Config::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_text())));
  return buf;
}

}  // namespace mathesis
