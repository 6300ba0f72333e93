#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mathesis {

/// Deterministic 64-bit stream generator (splitmix64 over a counter).
///
/// All randomness in a run flows from one master seed; components derive
/// their own streams by stable string ids so that adding a consumer never
/// perturbs another component's draws.
class RngStream {
 public:
  RngStream() : state_(0x9e3779b97f4a7c15ull) {}
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 bits of entropy, platform-independent.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (two u64 draws per pair, cached).
  double next_gaussian();

  /// Derive an independent child stream from a stable component id.
  RngStream fork(std::string_view component_id) const;

  /// Sample an index from unnormalized nonnegative weights.
  std::size_t weighted_pick(const std::vector<double>& weights);

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// FNV-1a over bytes; used for component ids and config hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace mathesis
