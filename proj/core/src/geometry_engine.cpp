#include "mathesis/geometry_engine.hpp"

namespace mathesis {

double d_sq(Point2 p, Point2 q) {
  double dx = p.x - q.x, dy = p.y - q.y;
  return dx * dx + dy * dy;
}

GeoEnergyTerm e_coll(Point2 a, Point2 b, Point2 c) {
  double ux = b.x - a.x, uy = b.y - a.y;
  double vx = c.x - a.x, vy = c.y - a.y;
  double r = ux * vy - uy * vx;
  GeoEnergyTerm t;
  t.value = r * r;
  double g = 2.0 * r;
  t.grads = {
      {g * (uy - vy), g * (vx - ux)},  // A
      {g * vy, g * -vx},               // B
      {g * -uy, g * ux},               // C
  };
  return t;
}

GeoEnergyTerm e_para(Point2 a, Point2 b, Point2 c, Point2 d) {
  double ux = b.x - a.x, uy = b.y - a.y;
  double wx = d.x - c.x, wy = d.y - c.y;
  double r = ux * wy - uy * wx;
  GeoEnergyTerm t;
  t.value = r * r;
  t.degenerate = (ux * ux + uy * uy == 0.0) || (wx * wx + wy * wy == 0.0);
  double g = 2.0 * r;
  t.grads = {
      {g * -wy, g * wx},  // A
      {g * wy, g * -wx},  // B
      {g * uy, g * -ux},  // C
      {g * -uy, g * ux},  // D
  };
  return t;
}

GeoEnergyTerm e_perp(Point2 a, Point2 b, Point2 c, Point2 d) {
  double ux = b.x - a.x, uy = b.y - a.y;
  double wx = d.x - c.x, wy = d.y - c.y;
  double r = ux * wx + uy * wy;
  GeoEnergyTerm t;
  t.value = r * r;
  t.degenerate = (ux * ux + uy * uy == 0.0) || (wx * wx + wy * wy == 0.0);
  double g = 2.0 * r;
  t.grads = {
      {g * -wx, g * -wy},  // A
      {g * wx, g * wy},    // B
      {g * -ux, g * -uy},  // C
      {g * ux, g * uy},    // D
  };
  return t;
}

GeoEnergyTerm e_cong(Point2 a, Point2 b, Point2 c, Point2 d) {
  double r = d_sq(a, b) - d_sq(c, d);
  GeoEnergyTerm t;
  t.value = r * r;
  double g = 2.0 * r;
  t.grads = {
      {g * 2.0 * (a.x - b.x), g * 2.0 * (a.y - b.y)},
      {g * 2.0 * (b.x - a.x), g * 2.0 * (b.y - a.y)},
      {-g * 2.0 * (c.x - d.x), -g * 2.0 * (c.y - d.y)},
      {-g * 2.0 * (d.x - c.x), -g * 2.0 * (d.y - c.y)},
  };
  return t;
}

GeoEnergyTerm e_ratio(Point2 a, Point2 b, Point2 c, Point2 d, Point2 e, Point2 f, Point2 g,
                      Point2 h) {
  double ab = d_sq(a, b), cd = d_sq(c, d), ef = d_sq(e, f), gh = d_sq(g, h);
  double r = ab * gh - ef * cd;
  GeoEnergyTerm t;
  t.value = r * r;
  double k = 2.0 * r;
  t.grads = {
      {k * gh * 2.0 * (a.x - b.x), k * gh * 2.0 * (a.y - b.y)},
      {k * gh * 2.0 * (b.x - a.x), k * gh * 2.0 * (b.y - a.y)},
      {-k * ef * 2.0 * (c.x - d.x), -k * ef * 2.0 * (c.y - d.y)},
      {-k * ef * 2.0 * (d.x - c.x), -k * ef * 2.0 * (d.y - c.y)},
      {-k * cd * 2.0 * (e.x - f.x), -k * cd * 2.0 * (e.y - f.y)},
      {-k * cd * 2.0 * (f.x - e.x), -k * cd * 2.0 * (f.y - e.y)},
      {k * ab * 2.0 * (g.x - h.x), k * ab * 2.0 * (g.y - h.y)},
      {k * ab * 2.0 * (h.x - g.x), k * ab * 2.0 * (h.y - g.y)},
  };
  return t;
}

}  // namespace mathesis
