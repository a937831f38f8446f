#pragma once

// Core point/skeleton types and the Frenet-frame cylindrical transform.
//
// A point P is re-expressed against its nearest skeleton vertex S_j with frame
// (t_j, n_j, b_j) as
//   rho = |P - S_j|, g = arc length from S_0 to S_j,
//   phi = azimuth of the NB-plane projection of (P - S_j), measured from n_j
//         towards b_j, in [0, 2*pi).
// The component of (P - S_j) along t_j is kept as `tangential_offset` so the
// inverse reproduces P exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "freseg/error.hpp"
#include "freseg/kdtree.hpp"

namespace freseg {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Label = std::uint32_t;

inline constexpr double kDefaultStraightnessEps = 1e-8;
inline constexpr double kAxisProjectionEps = 1e-12;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline bool is_finite(const Point3& p) { return p.allFinite(); }

struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<Label>> labels;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return labels.has_value(); }

  void validate() const {
    if (labels && labels->size() != points.size()) {
      throw Error(ErrorKind::LengthMismatch, "label count " + std::to_string(labels->size()) +
                                                 " != point count " + std::to_string(points.size()));
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!is_finite(points[i])) {
        throw Error(ErrorKind::ParseError, "non-finite coordinate at point " + std::to_string(i));
      }
    }
  }
};

/// Ordered polyline with cumulative chord length. Only constructible through
/// compute_arc_length, which enforces >= 2 vertices and no zero-length segment.
class Skeleton {
 public:
  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<double>& cum_arc() const { return cum_arc_; }
  std::size_t size() const { return vertices_.size(); }
  const Point3& operator[](std::size_t i) const { return vertices_[i]; }
  double total_length() const { return cum_arc_.back(); }

 private:
  friend Skeleton compute_arc_length(std::vector<Point3> vertices);
  Skeleton(std::vector<Point3> v, std::vector<double> a) : vertices_(std::move(v)), cum_arc_(std::move(a)) {}

  std::vector<Point3> vertices_;
  std::vector<double> cum_arc_;
};

inline Skeleton compute_arc_length(std::vector<Point3> vertices) {
  if (vertices.size() < 2) {
    throw Error(ErrorKind::DegenerateSkeleton,
                "skeleton needs at least 2 vertices, got " + std::to_string(vertices.size()));
  }
  std::vector<double> cum(vertices.size(), 0.0);
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    if (!is_finite(vertices[k])) {
      throw Error(ErrorKind::DegenerateSkeleton, "non-finite vertex " + std::to_string(k));
    }
    if (k == 0) continue;
    const double seg = (vertices[k] - vertices[k - 1]).norm();
    if (!(seg > 0.0)) {
      throw Error(ErrorKind::DegenerateSkeleton, "zero-length segment between vertices " +
                                                     std::to_string(k - 1) + " and " + std::to_string(k));
    }
    cum[k] = cum[k - 1] + seg;
  }
  return Skeleton(std::move(vertices), std::move(cum));
}

struct Frame {
  Vec3 t, n, b;
};

struct FramedSkeleton {
  Skeleton skeleton;
  std::vector<Frame> frames;
};

struct CylindricalPoint {
  double rho = 0.0;
  double phi = 0.0;
  double g = 0.0;
  std::size_t vertex_index = 0;
  double tangential_offset = 0.0;
};

struct CylindricalCloud {
  std::vector<CylindricalPoint> points;
  std::optional<std::vector<Label>> labels;

  std::size_t size() const { return points.size(); }
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  void validate() const {
    const double ortho = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    const double det = rotation.determinant();
    if (!(ortho <= 1e-9) || !(std::abs(det - 1.0) <= 1e-9) || !translation.allFinite()) {
      throw Error(ErrorKind::NonOrthonormalRotation,
                  "rotation not orthonormal (residual " + std::to_string(ortho) + ", det " + std::to_string(det) + ")");
    }
  }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
};

namespace detail {

// Weights w_k with f'(x) ~= sum_k w_k f(nodes_k), from differentiating the
// Lagrange interpolant through the nodes.
inline std::vector<double> lagrange_derivative_weights(double x, std::span<const double> nodes) {
  const std::size_t n = nodes.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < n; ++m) {
      if (m == k) continue;
      double term = 1.0 / (nodes[k] - nodes[m]);
      for (std::size_t l = 0; l < n; ++l) {
        if (l != k && l != m) term *= (x - nodes[l]) / (nodes[k] - nodes[l]);
      }
      w[k] += term;
    }
  }
  return w;
}

// Finite differences on a non-uniform grid over five-node windows: centered
// in the interior, shifted to one side near the ends (fewer nodes when the
// curve is shorter). Uniform order keeps the second differentiation of the
// tangent from amplifying a mismatch between end and interior errors.
inline std::vector<Vec3> differentiate(std::span<const Vec3> f, std::span<const double> s) {
  const std::size_t n = f.size();
  const std::size_t m = std::min<std::size_t>(n, 5);
  std::vector<Vec3> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = std::min(i > m / 2 ? i - m / 2 : 0, n - m);
    const auto w = lagrange_derivative_weights(s[i], s.subspan(start, m));
    d[i] = Vec3::Zero();
    for (std::size_t k = 0; k < m; ++k) d[i] += w[k] * f[start + k];
  }
  return d;
}

// Unit vector perpendicular to t, taken from the coordinate axis along which
// t has the smallest magnitude (lowest axis on ties).
inline Vec3 seed_normal(const Vec3& t) {
  int axis = 0;
  t.cwiseAbs().minCoeff(&axis);
  const Vec3 e = Vec3::Unit(axis);
  return (e - e.dot(t) * t).normalized();
}

}  // namespace detail

/// Discrete Frenet frames. Straight stretches (|dT/ds| < straightness_eps)
/// parallel-transport the previous normal; normals are sign-aligned with their
/// predecessor so frames never flip by 180 degrees along the curve.
inline FramedSkeleton compute_tnb(const Skeleton& skeleton, double straightness_eps = kDefaultStraightnessEps) {
  const std::size_t m = skeleton.size();
  const auto& s = skeleton.cum_arc();
  std::vector<Vec3> tangents = detail::differentiate(skeleton.vertices(), s);
  for (std::size_t i = 0; i < m; ++i) {
    const double len = tangents[i].norm();
    if (!(len > 0.0)) {
      throw Error(ErrorKind::DegenerateSkeleton, "vanishing tangent at vertex " + std::to_string(i));
    }
    tangents[i] /= len;
  }
  const std::vector<Vec3> dtds = detail::differentiate(tangents, s);

  std::vector<Frame> frames(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3& t = tangents[i];
    Vec3 curvature = dtds[i] - dtds[i].dot(t) * t;
    Vec3 n;
    if (curvature.norm() >= straightness_eps) {
      n = curvature.normalized();
    } else if (i > 0) {
      const Vec3& prev = frames[i - 1].n;
      const Vec3 transported = prev - prev.dot(t) * t;
      n = transported.norm() > kAxisProjectionEps ? transported.normalized() : detail::seed_normal(t);
    } else {
      n = detail::seed_normal(t);
    }
    if (i > 0 && n.dot(frames[i - 1].n) < 0.0) n = -n;
    frames[i] = Frame{t, n, t.cross(n)};
  }
  return FramedSkeleton{skeleton, std::move(frames)};
}

/// Linear scan; lowest index wins ties.
inline std::size_t nearest_vertex(const Point3& p, const Skeleton& skeleton) {
  std::size_t best = 0;
  double best_d2 = (skeleton[0] - p).squaredNorm();
  for (std::size_t j = 1; j < skeleton.size(); ++j) {
    const double d2 = (skeleton[j] - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  return best;
}

/// Cylindrical coordinates of a single offset u = P - S_j in frame f.
inline CylindricalPoint to_cylindrical(const Vec3& u, const Frame& f, double g, std::size_t vertex_index) {
  CylindricalPoint c;
  c.rho = u.norm();
  c.g = g;
  c.vertex_index = vertex_index;
  c.tangential_offset = u.dot(f.t);
  // v = [n b][n b]^T u, so v.n = u.n and v.b = u.b. atan2 mapped to [0, 2pi)
  // equals arccos(v.n / |v|) when v.b >= 0 and 2pi - arccos(...) otherwise.
  const double along_n = u.dot(f.n);
  const double along_b = u.dot(f.b);
  if (std::hypot(along_n, along_b) < kAxisProjectionEps) {
    c.phi = 0.0;
  } else {
    double phi = std::atan2(along_b, along_n);
    if (phi < 0.0) phi += kTwoPi;
    if (phi >= kTwoPi) phi = 0.0;
    c.phi = phi;
  }
  return c;
}

/// Several framed paths addressed through one global vertex numbering:
/// path k owns indices [offset(k), offset(k) + size_k).
class FramedPathSet {
 public:
  explicit FramedPathSet(std::span<const FramedSkeleton> paths) : paths_(paths) {
    std::vector<Point3> all;
    for (const auto& p : paths_) {
      offsets_.push_back(all.size());
      all.insert(all.end(), p.skeleton.vertices().begin(), p.skeleton.vertices().end());
    }
    offsets_.push_back(all.size());
    index_ = KdTree3(all);
  }

  std::size_t vertex_count() const { return offsets_.back(); }
  std::size_t path_count() const { return paths_.size(); }
  std::size_t offset(std::size_t path) const { return offsets_[path]; }

  /// (path, local vertex) for a global vertex index.
  std::pair<std::size_t, std::size_t> locate(std::size_t global) const {
    if (global >= vertex_count()) {
      throw Error(ErrorKind::IndexOutOfRange,
                  "vertex index " + std::to_string(global) + " >= " + std::to_string(vertex_count()));
    }
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), global);
    const std::size_t path = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    return {path, global - offsets_[path]};
  }

  std::size_t nearest(const Point3& p) const { return index_.nearest(p); }
  const FramedSkeleton& path(std::size_t k) const { return paths_[k]; }

 private:
  std::span<const FramedSkeleton> paths_;
  std::vector<std::size_t> offsets_;
  KdTree3 index_;
};

inline CylindricalCloud forward_transform(const PointCloud& cloud, std::span<const FramedSkeleton> paths) {
  if (cloud.empty()) throw Error(ErrorKind::EmptyCloud, "forward transform of an empty cloud");
  if (paths.empty()) throw Error(ErrorKind::DegenerateSkeleton, "no skeleton paths");
  if (cloud.labels && cloud.labels->size() != cloud.size()) {
    throw Error(ErrorKind::LengthMismatch, "labels do not match points");
  }
  for (const auto& p : paths) {
    if (p.frames.size() != p.skeleton.size()) {
      throw Error(ErrorKind::DegenerateSkeleton, "frame count does not match vertex count");
    }
  }
  const FramedPathSet set(paths);
  CylindricalCloud out;
  out.points.resize(cloud.size());
  out.labels = cloud.labels;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t global = set.nearest(cloud.points[i]);
    const auto [k, j] = set.locate(global);
    const FramedSkeleton& fs = set.path(k);
    out.points[i] = to_cylindrical(cloud.points[i] - fs.skeleton[j], fs.frames[j], fs.skeleton.cum_arc()[j], global);
  }
  return out;
}

inline CylindricalCloud forward_transform(const PointCloud& cloud, const FramedSkeleton& fs) {
  return forward_transform(cloud, std::span<const FramedSkeleton>(&fs, 1));
}

inline Point3 from_cylindrical(const CylindricalPoint& c, const Point3& vertex, const Frame& f) {
  // rho is the full distance to the vertex; the NB-plane radius is what is
  // left after removing the tangential part.
  const double tau = std::abs(c.tangential_offset);
  const double radial = std::sqrt(std::max(0.0, (c.rho - tau) * (c.rho + tau)));
  return vertex + radial * (std::cos(c.phi) * f.n + std::sin(c.phi) * f.b) + c.tangential_offset * f.t;
}

inline PointCloud inverse_transform(const CylindricalCloud& ccloud, std::span<const FramedSkeleton> paths) {
  const FramedPathSet set(paths);
  PointCloud out;
  out.points.resize(ccloud.size());
  out.labels = ccloud.labels;
  for (std::size_t i = 0; i < ccloud.size(); ++i) {
    const auto& c = ccloud.points[i];
    const auto [k, j] = set.locate(c.vertex_index);
    const FramedSkeleton& fs = set.path(k);
    out.points[i] = from_cylindrical(c, fs.skeleton[j], fs.frames[j]);
  }
  return out;
}

inline PointCloud inverse_transform(const CylindricalCloud& ccloud, const FramedSkeleton& fs) {
  return inverse_transform(ccloud, std::span<const FramedSkeleton>(&fs, 1));
}

inline PointCloud apply_rigid(const PointCloud& cloud, const RigidTransform& xf) {
  xf.validate();
  PointCloud out = cloud;
  for (auto& p : out.points) p = xf.apply(p);
  return out;
}

inline Skeleton apply_rigid(const Skeleton& skeleton, const RigidTransform& xf) {
  xf.validate();
  std::vector<Point3> v = skeleton.vertices();
  for (auto& p : v) p = xf.apply(p);
  return compute_arc_length(std::move(v));
}

/// Resamples the polyline at (approximately) uniform arc-length spacing,
/// keeping both endpoints. The step is shrunk so segments come out equal.
inline Skeleton resample(const Skeleton& skeleton, double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::DegenerateSkeleton, "resample step must be positive");
  const double total = skeleton.total_length();
  const auto segments = static_cast<std::size_t>(std::max(1.0, std::ceil(total / step)));
  const auto& s = skeleton.cum_arc();
  std::vector<Point3> out;
  out.reserve(segments + 1);
  std::size_t seg = 0;
  for (std::size_t k = 0; k <= segments; ++k) {
    if (k == segments) {
      out.push_back(skeleton.vertices().back());
      break;
    }
    const double target = total * static_cast<double>(k) / static_cast<double>(segments);
    while (seg + 2 < skeleton.size() && s[seg + 1] < target) ++seg;
    const double w = (target - s[seg]) / (s[seg + 1] - s[seg]);
    out.push_back((1.0 - w) * skeleton[seg] + w * skeleton[seg + 1]);
  }
  return compute_arc_length(std::move(out));
}

/// Extends both ends of the polyline along their end directions so that the
/// points attached to an end vertex no longer overhang it. Contraction-based
/// skeletons stop short of the tips of the shape they came from.
inline Skeleton extend_ends(const Skeleton& skeleton, std::span<const Point3> points) {
  if (points.empty()) return skeleton;
  const KdTree3 index(skeleton.vertices());
  const std::size_t last = skeleton.size() - 1;
  const Vec3 head_dir = (skeleton[0] - skeleton[1]).normalized();
  const Vec3 tail_dir = (skeleton[last] - skeleton[last - 1]).normalized();
  double head = 0.0, tail = 0.0;
  for (const auto& p : points) {
    const std::size_t j = index.nearest(p);
    if (j == 0) head = std::max(head, (p - skeleton[0]).dot(head_dir));
    if (j == last) tail = std::max(tail, (p - skeleton[last]).dot(tail_dir));
  }
  std::vector<Point3> v;
  v.reserve(skeleton.size() + 2);
  if (head > 0.0) v.push_back(skeleton[0] + head * head_dir);
  v.insert(v.end(), skeleton.vertices().begin(), skeleton.vertices().end());
  if (tail > 0.0) v.push_back(skeleton[last] + tail * tail_dir);
  return compute_arc_length(std::move(v));
}

/// Laplacian smoothing with fixed endpoints.
inline Skeleton smooth(const Skeleton& skeleton, int iterations, double weight = 0.5) {
  std::vector<Point3> v = skeleton.vertices();
  for (int it = 0; it < iterations; ++it) {
    std::vector<Point3> next = v;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      next[i] = (1.0 - weight) * v[i] + weight * 0.5 * (v[i - 1] + v[i + 1]);
    }
    v = std::move(next);
  }
  return compute_arc_length(std::move(v));
}

}  // namespace freseg
