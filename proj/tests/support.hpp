#pragma once

// Shared fixtures: analytic curves sampled as skeletons, random clouds around
// them, and small closed meshes.

#include <cmath>
#include <numbers>
#include <vector>

#include "freseg/geometry.hpp"
#include "freseg/io.hpp"
#include "freseg/random.hpp"

namespace freseg::test {

inline Skeleton line_skeleton(double length, std::size_t segments) {
  std::vector<Point3> v;
  for (std::size_t i = 0; i <= segments; ++i) v.emplace_back(0.0, 0.0, length * double(i) / double(segments));
  return compute_arc_length(std::move(v));
}

// Arc of a circle of radius r in the xy plane, angles [0, sweep].
inline Skeleton arc_skeleton(double r, double sweep, std::size_t segments) {
  std::vector<Point3> v;
  for (std::size_t i = 0; i <= segments; ++i) {
    const double a = sweep * double(i) / double(segments);
    v.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
  }
  return compute_arc_length(std::move(v));
}

// (a cos t, a sin t, b t) for t in [t0, t1].
inline Skeleton helix_skeleton(double a, double b, double t0, double t1, std::size_t segments) {
  std::vector<Point3> v;
  for (std::size_t i = 0; i <= segments; ++i) {
    const double t = t0 + (t1 - t0) * double(i) / double(segments);
    v.emplace_back(a * std::cos(t), a * std::sin(t), b * t);
  }
  return compute_arc_length(std::move(v));
}

inline Skeleton random_walk_skeleton(std::size_t segments, double step, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point3> v{Point3::Zero()};
  Vec3 dir = Vec3::UnitX();
  for (std::size_t i = 0; i < segments; ++i) {
    dir = (dir + 0.4 * Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng))).normalized();
    v.push_back(v.back() + step * dir);
  }
  return compute_arc_length(std::move(v));
}

// Points scattered in a ball of radius `spread` around random vertices.
inline PointCloud cloud_around(const Skeleton& s, std::size_t n, double spread, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3& base = s[uniform_index(rng, s.size())];
    c.points.push_back(base + spread * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)));
  }
  return c;
}

// Closed, outward-oriented axis-aligned box.
inline TriMesh box_mesh(const Point3& lo, const Point3& hi) {
  TriMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  }
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.faces.push_back({std::size_t(q[0]), std::size_t(q[1]), std::size_t(q[2])});
    m.faces.push_back({std::size_t(q[0]), std::size_t(q[2]), std::size_t(q[3])});
  }
  return m;
}

// Closed, outward-oriented UV sphere.
inline TriMesh sphere_mesh(const Point3& c, double r, std::size_t rings, std::size_t sectors) {
  TriMesh m;
  m.vertices.push_back(c + Vec3(0, 0, r));
  for (std::size_t i = 1; i < rings; ++i) {
    const double th = std::numbers::pi * double(i) / double(rings);
    for (std::size_t j = 0; j < sectors; ++j) {
      const double ph = 2.0 * std::numbers::pi * double(j) / double(sectors);
      m.vertices.push_back(c + r * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)));
    }
  }
  m.vertices.push_back(c - Vec3(0, 0, r));
  const std::size_t south = m.vertices.size() - 1;
  auto at = [&](std::size_t ring, std::size_t j) { return 1 + (ring - 1) * sectors + j % sectors; };
  for (std::size_t j = 0; j < sectors; ++j) m.faces.push_back({0, at(1, j), at(1, j + 1)});
  for (std::size_t i = 1; i + 1 < rings; ++i) {
    for (std::size_t j = 0; j < sectors; ++j) {
      m.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      m.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  }
  for (std::size_t j = 0; j < sectors; ++j) m.faces.push_back({south, at(rings - 1, j + 1), at(rings - 1, j)});
  return m;
}

// Ray-casting parity along a fixed, generic direction: an independent
// inside/outside oracle for closed meshes.
inline bool ray_parity_inside(const Point3& p, const TriMesh& m) {
  const Vec3 dir = Vec3(0.5773, 0.5774, 0.57735).normalized();
  int hits = 0;
  for (const auto& f : m.faces) {
    const Point3 &a = m.vertices[f[0]], &b = m.vertices[f[1]], &c = m.vertices[f[2]];
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 h = dir.cross(e2);
    const double det = e1.dot(h);
    if (std::abs(det) < 1e-14) continue;
    const Vec3 s = p - a;
    const double u = s.dot(h) / det;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) / det;
    if (v < 0.0 || u + v > 1.0) continue;
    if (e2.dot(q) / det > 0.0) ++hits;
  }
  return hits % 2 == 1;
}

inline double max_abs_diff(const PointCloud& a, const PointCloud& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a.points[i] - b.points[i]).cwiseAbs().maxCoeff());
  return m;
}

inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace freseg::test
