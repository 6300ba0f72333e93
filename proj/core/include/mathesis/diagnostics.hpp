#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mathesis/energy_kernel.hpp"
#include "mathesis/rng.hpp"

namespace mathesis {

struct SuiteResult {
  std::string name;
  int passed = 0;
  int failed = 0;
  std::vector<std::string> failures;
  bool ok() const { return failed == 0; }
};

/// Random state + binding with every asserted predicate holding exactly
/// (or, for violated fixtures, exactly one falsified predicate).
struct EnergyFixture {
  MathState state;
  Binding binding;
  EdgeId violated = 0;  // meaningful for violated fixtures only
};

EnergyFixture make_true_fixture(EnergyDomain domain, RngStream& rng, int dim);
EnergyFixture make_violated_fixture(EnergyDomain domain, RngStream& rng, int dim);
/// One state holding true facts from all three engines at once.
EnergyFixture make_mixed_true_fixture(RngStream& rng, int dim);

/// Central-difference gradient check of total_energy over the free slots.
/// Returns the max relative error (|analytic-fd| / max(1, |fd|)).
double fd_total_energy_max_rel_err(const MathState& state, const Binding& binding,
                                   const DomainWeights& weights, double h = 1e-4);

/// True states below 1e-8, single-violation states above 1e-4 with the
/// violated edge identified.
SuiteResult faithfulness_suite(int n_each, std::uint64_t seed, int dim);

/// Analytic vs central-difference gradients for every energy term and for
/// total_energy, `seeds` random draws per term, 1e-5 relative tolerance.
SuiteResult smoothness_suite(int seeds, std::uint64_t seed, int dim);

/// total < tol iff every per-edge term < tol, over random mixed
/// true/violated states.
SuiteResult localization_suite(int cases, std::uint64_t seed, int dim);

}  // namespace mathesis
