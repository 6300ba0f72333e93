#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mathesis {

/// Run-wide configuration. Values mirror the key=value config file; flags
/// override file entries, file entries override defaults.
struct Config {
  // energy kernel
  int energy_dim_d = 4;           // energy.dim_d
  double energy_tol = 1e-8;       // energy.tol
  double w_matrix = 1.0;          // energy.weights.matrix
  double w_ideal = 1.0;           // energy.weights.ideal
  double w_geometry = 1.0;        // energy.weights.geometry

  // binding optimizer
  int opt_steps = 1000;           // opt.steps
  double opt_lr = 0.1;            // opt.lr

  // ideal engine
  int ideal_slack = 1;            // ideal.slack
  int ideal_degree_cap = 8;       // ideal.degree_cap
  int ideal_basis_cap = 20000;    // ideal.basis_cap
  double ideal_tol = 1e-8;        // ideal.tol (membership tolerance)

  // hypergraph / rule library
  int term_budget = 256;          // graph.term_budget

  // brain
  int brain_d_model = 32;         // brain.d_model
  int brain_layers = 2;           // brain.layers
  int brain_max_arity = 8;        // brain.max_arity

  // training
  double train_gamma = 0.99;      // train.gamma
  double train_lambda_cost = 0.01;// train.lambda_cost
  double train_r_success = 1.0;   // train.r_success
  double train_eps_tol = 1e-6;    // train.eps_tol
  int train_t_max = 30;           // train.t_max
  double train_clip = 0.2;        // train.clip
  double train_lr = 0.05;         // train.lr
  int train_epochs = 4;           // train.epochs
  int train_batch_episodes = 8;   // train.batch_episodes
  double train_entropy_coef = 0.0;// train.entropy_coef

  // search
  int mcts_sims = 1000;           // mcts.sims
  double mcts_c_puct = 1.5;       // mcts.c_puct
  int eps_generations = 10;       // eps.generations
  int eps_pop_size = 16;          // eps.pop_size
  int eps_elitism = 2;            // eps.elitism
  double eps_temperature = 1.0;   // eps.temperature

  std::uint64_t seed = 0;         // seed
  int workers = 1;                // workers

  /// Parses "key = value" lines (# comments, blank lines allowed) and
  /// applies them on top of the current values. Unknown keys throw.
  void apply_file(const std::string& path);
  void apply_text(const std::string& text, const std::string& origin);
  /// Applies one "key=value" override (CLI -D flags).
  void apply_override(const std::string& key, const std::string& value);

  /// Canonical text rendering: every key, sorted, one per line.
  std::string canonical_text() const;
  /// FNV-1a hash of canonical_text(), hex-encoded.
  std::string hash() const;
};

}  // namespace mathesis
