#pragma once

#include <array>
#include <vector>

namespace driveline {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const;
};

// Center-pose oriented rectangle in the plane.
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double heading = 0.0;  // rad
  double length = 4.8;   // m, along heading
  double width = 2.0;    // m

  std::array<Vec2, 4> corners() const;
};

void validate(const OrientedBox& box, const char* context);

// Separating-axis test on the four edge normals of the two rectangles.
// Touching boxes count as overlapping.
bool obb_overlap(const OrientedBox& a, const OrientedBox& b);

// Euclidean clearance between two rectangles; 0 when they overlap.
double obb_gap(const OrientedBox& a, const OrientedBox& b);

double segment_distance(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                        const Vec2& q2);

// Even-odd ray test; boundary points count as inside.
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& polygon);

void validate_polygon(const std::vector<Vec2>& polygon, const char* context);

}  // namespace driveline
