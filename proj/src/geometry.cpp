#include "driveline/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "driveline/errors.hpp"

namespace driveline {

double Vec2::norm() const { return std::hypot(x, y); }

std::array<Vec2, 4> OrientedBox::corners() const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double hl = 0.5 * length, hw = 0.5 * width;
  const Vec2 ex{c * hl, s * hl};
  const Vec2 ey{-s * hw, c * hw};
  const Vec2 ctr{cx, cy};
  return {ctr + ex + ey, ctr + ex - ey, ctr - ex - ey, ctr - ex + ey};
}

void validate(const OrientedBox& box, const char* context) {
  if (!std::isfinite(box.cx) || !std::isfinite(box.cy) ||
      !std::isfinite(box.heading) || !(box.length > 0.0) ||
      !(box.width > 0.0)) {
    throw ValidationError(context, "oriented box needs finite pose and "
                                   "positive extents");
  }
}

namespace {

// Projects both corner sets onto `axis`; true when the intervals are disjoint.
bool separated_on(const Vec2& axis, const std::array<Vec2, 4>& pa,
                  const std::array<Vec2, 4>& pb) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const Vec2& p : pa) {
    const double d = p.dot(axis);
    amin = std::min(amin, d);
    amax = std::max(amax, d);
  }
  for (const Vec2& p : pb) {
    const double d = p.dot(axis);
    bmin = std::min(bmin, d);
    bmax = std::max(bmax, d);
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool obb_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto pa = a.corners();
  const auto pb = b.corners();
  const Vec2 axes[4] = {
      {std::cos(a.heading), std::sin(a.heading)},
      {-std::sin(a.heading), std::cos(a.heading)},
      {std::cos(b.heading), std::sin(b.heading)},
      {-std::sin(b.heading), std::cos(b.heading)},
  };
  for (const Vec2& axis : axes) {
    if (separated_on(axis, pa, pb)) return false;
  }
  return true;
}

double segment_distance(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                        const Vec2& q2) {
  auto point_to_segment = [](const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + ab * t)).norm();
  };
  auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  };
  const double d1 = orient(p1, p2, q1), d2 = orient(p1, p2, q2);
  const double d3 = orient(q1, q2, p1), d4 = orient(q1, q2, p2);
  if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return 0.0;
  return std::min(std::min(point_to_segment(q1, p1, p2),
                           point_to_segment(q2, p1, p2)),
                  std::min(point_to_segment(p1, q1, q2),
                           point_to_segment(p2, q1, q2)));
}

double obb_gap(const OrientedBox& a, const OrientedBox& b) {
  if (obb_overlap(a, b)) return 0.0;
  const auto pa = a.corners();
  const auto pb = b.corners();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, segment_distance(pa[i], pa[(i + 1) % 4], pb[j],
                                             pb[(j + 1) % 4]));
    }
  }
  return best;
}

void validate_polygon(const std::vector<Vec2>& polygon, const char* context) {
  if (polygon.size() < 3) {
    throw ValidationError(context, "polygon needs at least 3 vertices");
  }
  double area2 = 0.0;
  for (size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& p = polygon[i];
    const Vec2& q = polygon[(i + 1) % polygon.size()];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ValidationError(context, "non-finite polygon vertex at index " +
                                         std::to_string(i));
    }
    area2 += p.x * q.y - q.x * p.y;
  }
  if (std::abs(area2) < 1e-12) {
    throw ValidationError(context, "polygon is degenerate (zero area)");
  }
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& polygon) {
  const size_t n = polygon.size();
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    // Boundary counts as inside.
    const double cross =
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cross) < 1e-12 &&
        p.x >= std::min(a.x, b.x) - 1e-12 &&
        p.x <= std::max(a.x, b.x) + 1e-12 &&
        p.y >= std::min(a.y, b.y) - 1e-12 &&
        p.y <= std::max(a.y, b.y) + 1e-12) {
      return true;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace driveline
