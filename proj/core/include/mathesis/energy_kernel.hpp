#pragma once

#include <map>
#include <string>
#include <vector>

#include "mathesis/binding.hpp"
#include "mathesis/hypergraph.hpp"
#include "mathesis/polynomial.hpp"

namespace mathesis {

enum class EnergyDomain : std::uint8_t { Matrix, Ideal, Geometry, NonEnergetic };

struct DomainWeights {
  double matrix = 1.0;
  double ideal = 1.0;
  double geometry = 1.0;
};

struct EnergyReport {
  double total = 0.0;
  struct PerEdge {
    EnergyDomain domain;
    double value;  // weighted
  };
  std::map<EdgeId, PerEdge> per_edge;
  Eigen::VectorXd gradient;  // over the binding's free slots
  BindingLayout layout;
  std::vector<std::string> warnings;
};

std::string_view energy_domain_name(EnergyDomain d);

/// Dispatch domain of an edge by operator symbol and operand domains.
/// Structural edges (constructors, connectives, quantifiers) are
/// NonEnergetic; so are non-fact edges in total_energy.
EnergyDomain classify_edge(const MathState& state, EdgeId edge);

/// Weighted sum of the energies of all FACT edges, with the total gradient
/// with respect to the binding's free slots. Deterministic accumulation in
/// ascending edge-id order.
EnergyReport total_energy(const MathState& state, const Binding& binding,
                          const DomainWeights& weights);

/// total_energy(...).total < tol.
bool is_consistent(const MathState& state, const Binding& binding,
                   const DomainWeights& weights, double tol = 1e-8);

struct MinimizeResult {
  Binding binding;
  EnergyReport report;
  bool converged = false;
  std::vector<double> energy_sequence;  // accepted iterates, non-increasing
};

/// Gradient descent with Armijo backtracking (c = 1e-4, shrink 0.5) on the
/// free slots. Non-convergence returns best-so-far with converged=false.
MinimizeResult minimize_binding(const MathState& state, const Binding& binding,
                                const DomainWeights& weights, int max_steps, double lr);

/// Polynomial form of a scalar term: ring variables for indexed scalar
/// slots, constants for valued ones. Throws BindingError for a leaf with no
/// slot, TypingError for non-liftable constructors.
Polynomial lift_scalar_term(const MathState& state, const Binding& binding, NodeId node);

}  // namespace mathesis
