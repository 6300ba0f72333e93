#include "mathesis/rng.hpp"

#include <cmath>

#include "mathesis/errors.hpp"

namespace mathesis {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double RngStream::next_gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // Box-Muller; u clamped away from zero so log stays finite.
  double u = next_double();
  if (u < 1e-300) u = 1e-300;
  double v = next_double();
  double r = std::sqrt(-2.0 * std::log(u));
  double theta = 2.0 * M_PI * v;
  cached_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

RngStream RngStream::fork(std::string_view component_id) const {
  return RngStream(state_ ^ fnv1a(component_id));
}

std::size_t RngStream::weighted_pick(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error("weighted_pick: negative weight");
    total += w;
  }
  if (total <= 0.0) return next_below(weights.empty() ? 1 : weights.size());
  double x = next_double() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (x < acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace mathesis
