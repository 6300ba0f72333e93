#pragma once

#include <array>
#include <vector>

#include "mathesis/errors.hpp"

namespace mathesis {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// One Euclidean predicate energy: value plus d(value)/d(point) for every
/// input point in call order. `degenerate` flags a zero-length direction
/// segment in parallel/perpendicular terms; the energy is still valid and
/// smooth there, the flag is a non-fatal warning.
struct GeoEnergyTerm {
  double value = 0.0;
  std::vector<std::array<double, 2>> grads;
  bool degenerate = false;
};

/// Squared distance between two points.
double d_sq(Point2 p, Point2 q);

/// Squared cross product of (B-A, C-A): zero iff A, B, C collinear.
GeoEnergyTerm e_coll(Point2 a, Point2 b, Point2 c);

/// Squared cross product of (B-A, D-C): zero iff AB parallel to CD.
GeoEnergyTerm e_para(Point2 a, Point2 b, Point2 c, Point2 d);

/// Squared dot product of (B-A, D-C): zero iff AB perpendicular to CD.
GeoEnergyTerm e_perp(Point2 a, Point2 b, Point2 c, Point2 d);

/// (D^2(A,B) - D^2(C,D))^2: zero iff |AB| = |CD|.
GeoEnergyTerm e_cong(Point2 a, Point2 b, Point2 c, Point2 d);

/// (D^2(A,B) D^2(G,H) - D^2(E,F) D^2(C,D))^2: zero iff |AB|/|CD| = |EF|/|GH|
/// in cross-multiplied squared form.
GeoEnergyTerm e_ratio(Point2 a, Point2 b, Point2 c, Point2 d, Point2 e, Point2 f, Point2 g,
                      Point2 h);

}  // namespace mathesis
