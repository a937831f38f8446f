#pragma once

// Synthetic spiny tubes with ground truth, Dice evaluation, a geometric
// baseline segmenter working on (rho, phi, g), and rotation sweeps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "freseg/error.hpp"
#include "freseg/geometry.hpp"
#include "freseg/io.hpp"
#include "freseg/random.hpp"

namespace freseg {

enum class CenterlineKind { Line, Helix, RandomWalk };

inline std::string to_string(CenterlineKind k) {
  switch (k) {
    case CenterlineKind::Line: return "line";
    case CenterlineKind::Helix: return "helix";
    case CenterlineKind::RandomWalk: return "random-walk";
  }
  return "line";
}

inline CenterlineKind parse_centerline_kind(const std::string& s) {
  if (s == "line") return CenterlineKind::Line;
  if (s == "helix") return CenterlineKind::Helix;
  if (s == "random-walk" || s == "smoothed-random-walk") return CenterlineKind::RandomWalk;
  throw Error(ErrorKind::BadSpec, "unknown centerline kind '" + s + "'");
}

struct TubeSpec {
  CenterlineKind kind = CenterlineKind::Line;
  double length = 20.0;         // centerline arc length
  double helix_radius = 2.0;    // a in (a cos t, a sin t, b t)
  double helix_pitch = 2.0;     // b, rise per radian
  double walk_step = 2.0;       // random-walk knot spacing
  double walk_turn = 0.3;       // random-walk direction jitter per knot
  double trunk_radius = 1.0;
  std::size_t spines = 0;
  double bump_radius_min = 0.2, bump_radius_max = 0.35;
  double protrusion_min = 2.0, protrusion_max = 3.0;  // beyond the trunk surface
  double noise_sigma = 0.0;
  double density = 50.0;        // points per unit area
  double skeleton_step = 0.1;   // ground-truth skeleton vertex spacing
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& why) { throw Error(ErrorKind::BadSpec, why); };
    if (!(length > 0.0)) bad("length must be positive");
    if (!(trunk_radius > 0.0)) bad("trunk radius must be positive");
    if (!(bump_radius_min > 0.0) || bump_radius_max < bump_radius_min) bad("bad bump radius range");
    if (!(protrusion_min > trunk_radius) || protrusion_max < protrusion_min) {
      bad("protrusion must exceed the trunk radius and form a valid range");
    }
    if (bump_radius_max >= protrusion_min) bad("bump radius must be smaller than the protrusion");
    if (!(noise_sigma >= 0.0)) bad("noise sigma must be non-negative");
    if (!(density > 0.0)) bad("density must be positive");
    if (!(skeleton_step > 0.0)) bad("skeleton step must be positive");
    if (kind == CenterlineKind::Helix) {
      if (!(helix_radius > 0.0) || !(helix_pitch > 0.0)) bad("helix radius and pitch must be positive");
      const double curvature = helix_radius / (helix_radius * helix_radius + helix_pitch * helix_pitch);
      if (!(curvature * trunk_radius < 1.0)) bad("trunk radius exceeds the helix radius of curvature");
      if (!(2.0 * std::numbers::pi * helix_pitch > 2.0 * (trunk_radius + protrusion_max))) {
        bad("helix coils would touch");
      }
    }
    if (kind == CenterlineKind::RandomWalk && (!(walk_step > 0.0) || !(walk_turn >= 0.0))) bad("bad random-walk step");
  }
};

/// Arc-length parameterized centerline with an orthonormal normal pair
/// (n, b) at every s.
class Centerline {
 public:
  Centerline(const TubeSpec& spec, Rng& rng) : spec_(spec) {
    if (spec.kind == CenterlineKind::RandomWalk) build_walk(rng);
    // Dense polyline for distance queries.
    const double step = std::min(spec.trunk_radius / 10.0, spec.length / 64.0);
    const auto segs = static_cast<std::size_t>(std::ceil(spec.length / step));
    for (std::size_t i = 0; i <= segs; ++i) dense_.push_back(position(spec.length * static_cast<double>(i) / static_cast<double>(segs)));
  }

  double length() const { return spec_.length; }

  Point3 position(double s) const {
    switch (spec_.kind) {
      case CenterlineKind::Line: return Point3(0.0, 0.0, s);
      case CenterlineKind::Helix: {
        const double t = s / helix_speed();
        return Point3(spec_.helix_radius * std::cos(t), spec_.helix_radius * std::sin(t), spec_.helix_pitch * t);
      }
      case CenterlineKind::RandomWalk: return spline(walk_param(s));
    }
    return Point3::Zero();
  }

  /// (tangent, normal, binormal) at s.
  Frame frame(double s) const {
    switch (spec_.kind) {
      case CenterlineKind::Line: return Frame{Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
      case CenterlineKind::Helix: {
        const double t = s / helix_speed();
        const Vec3 tan = Vec3(-spec_.helix_radius * std::sin(t), spec_.helix_radius * std::cos(t), spec_.helix_pitch) / helix_speed();
        const Vec3 n(-std::cos(t), -std::sin(t), 0.0);
        return Frame{tan, n, tan.cross(n)};
      }
      case CenterlineKind::RandomWalk: {
        const auto [i, w] = locate(s);
        const double u = walk_u_[i] + w * (walk_u_[i + 1] - walk_u_[i]);
        const Vec3 t = spline_tangent(u);
        const Vec3& n0 = walk_normals_[i];
        const Vec3 n = (n0 - n0.dot(t) * t).normalized();
        return Frame{t, n, t.cross(n)};
      }
    }
    return {};
  }

  /// Curvature used for area weighting of the tube surface (helix only;
  /// zero elsewhere).
  double curvature() const {
    if (spec_.kind != CenterlineKind::Helix) return 0.0;
    return spec_.helix_radius / (helix_speed() * helix_speed());
  }

  double distance(const Point3& p) const {
    if (spec_.kind == CenterlineKind::Line) return std::hypot(p.x(), p.y(), p.z() - std::clamp(p.z(), 0.0, spec_.length));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < dense_.size(); ++i) {
      const Vec3 d = dense_[i + 1] - dense_[i];
      const double w = std::clamp((p - dense_[i]).dot(d) / d.squaredNorm(), 0.0, 1.0);
      best = std::min(best, (p - (dense_[i] + w * d)).squaredNorm());
    }
    return std::sqrt(best);
  }

 private:
  double helix_speed() const { return std::hypot(spec_.helix_radius, spec_.helix_pitch); }

  std::pair<std::size_t, double> locate(double s) const {
    const auto it = std::upper_bound(walk_arc_.begin(), walk_arc_.end(), s);
    std::size_t i = it == walk_arc_.begin() ? 0 : static_cast<std::size_t>(it - walk_arc_.begin()) - 1;
    i = std::min(i, walk_arc_.size() - 2);
    const double w = std::clamp((s - walk_arc_[i]) / (walk_arc_[i + 1] - walk_arc_[i]), 0.0, 1.0);
    return {i, w};
  }

  double walk_param(double s) const {
    const auto [i, w] = locate(s);
    return walk_u_[i] + w * (walk_u_[i + 1] - walk_u_[i]);
  }

  // Catmull-Rom through the knots; u in [0, knots - 1], ends padded by
  // reflection.
  std::array<Point3, 4> spline_controls(double u, double& tau) const {
    const auto last = static_cast<std::ptrdiff_t>(knots_.size()) - 1;
    const auto j = std::clamp(static_cast<std::ptrdiff_t>(std::floor(u)), std::ptrdiff_t{0}, last - 1);
    tau = u - static_cast<double>(j);
    auto at = [&](std::ptrdiff_t m) -> Point3 {
      if (m < 0) return 2.0 * knots_[0] - knots_[1];
      if (m > last) return 2.0 * knots_[last] - knots_[last - 1];
      return knots_[static_cast<std::size_t>(m)];
    };
    return {at(j - 1), at(j), at(j + 1), at(j + 2)};
  }

  Point3 spline(double u) const {
    double t;
    const auto [p0, p1, p2, p3] = spline_controls(u, t);
    return 0.5 * (2.0 * p1 + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                  (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t);
  }

  Vec3 spline_tangent(double u) const {
    double t;
    const auto [p0, p1, p2, p3] = spline_controls(u, t);
    return (0.5 * ((p2 - p0) + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t +
                   3.0 * (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t))
        .normalized();
  }

  // Dense arc-length table over the spline.
  double tabulate_walk() {
    constexpr int per_knot = 64;
    const std::size_t nodes = (knots_.size() - 1) * per_knot + 1;
    walk_u_.resize(nodes);
    walk_arc_.assign(nodes, 0.0);
    Point3 prev = spline(0.0);
    for (std::size_t i = 0; i < nodes; ++i) {
      walk_u_[i] = static_cast<double>(i) / per_knot;
      const Point3 p = spline(walk_u_[i]);
      if (i > 0) walk_arc_[i] = walk_arc_[i - 1] + (p - prev).norm();
      prev = p;
    }
    return walk_arc_.back();
  }

  // Random knots, smoothed by repeated neighbor averaging, rescaled so the
  // spline through them has the requested arc length. Normals are parallel
  // transported along the table.
  void build_walk(Rng& rng) {
    const auto knots = static_cast<std::size_t>(std::ceil(spec_.length / spec_.walk_step)) + 1;
    std::vector<Point3> k{Point3::Zero()};
    Vec3 dir = Vec3::UnitZ();
    for (std::size_t i = 1; i < knots + 4; ++i) {
      Vec3 jitter(standard_normal(rng), standard_normal(rng), standard_normal(rng));
      dir = (dir + spec_.walk_turn * jitter).normalized();
      k.push_back(k.back() + spec_.walk_step * dir);
    }
    for (int pass = 0; pass < 8; ++pass) {
      std::vector<Point3> next = k;
      for (std::size_t i = 1; i + 1 < k.size(); ++i) next[i] = 0.25 * k[i - 1] + 0.5 * k[i] + 0.25 * k[i + 1];
      k = std::move(next);
    }
    knots_ = std::move(k);
    const double scale = spec_.length / tabulate_walk();
    for (auto& p : knots_) p *= scale;
    tabulate_walk();
    walk_arc_.back() = spec_.length;
    walk_normals_.clear();
    Vec3 n;
    for (std::size_t i = 0; i < walk_u_.size(); ++i) {
      const Vec3 t = spline_tangent(walk_u_[i]);
      n = i == 0 ? detail::seed_normal(t) : Vec3((n - n.dot(t) * t).normalized());
      walk_normals_.push_back(n);
    }
  }

  TubeSpec spec_;
  std::vector<Point3> knots_;
  std::vector<double> walk_u_;
  std::vector<double> walk_arc_;
  std::vector<Vec3> walk_normals_;
  std::vector<Point3> dense_;
};

struct SyntheticTube {
  PointCloud cloud;  // labels: 0 trunk, 1 spine
  Skeleton skeleton;
};

namespace detail {

struct Capsule {
  Point3 base, tip;
  double radius;

  double distance(const Point3& p) const {
    const Vec3 d = tip - base;
    const double w = std::clamp((p - base).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (p - (base + w * d)).norm();
  }
};

inline Vec3 perpendicular_unit(const Vec3& axis) { return seed_normal(axis); }

}  // namespace detail

/// Tube surface points (area-weighted) plus capsule-shaped spines rooted on
/// the centerline and protruding radially through the surface. Spine points
/// inside the trunk and trunk points inside a spine are discarded, so with
/// zero noise every spine point lies strictly outside the trunk radius.
inline SyntheticTube generate_tube(const TubeSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Centerline line(spec, rng);
  const double r = spec.trunk_radius;
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<detail::Capsule> capsules;
  const double margin = std::min(spec.length / 4.0, 2.0 * r);
  for (std::size_t i = 0; i < spec.spines; ++i) {
    const double s = uniform(rng, margin, spec.length - margin);
    const double theta = uniform(rng, 0.0, two_pi);
    const double rb = uniform(rng, spec.bump_radius_min, spec.bump_radius_max);
    const double p = uniform(rng, spec.protrusion_min, spec.protrusion_max);
    const Frame f = line.frame(s);
    const Vec3 d = std::cos(theta) * f.n + std::sin(theta) * f.b;
    const Point3 base = line.position(s);
    capsules.push_back({base, base + (r + p - rb) * d, rb});
  }
  auto inside_capsule = [&](const Point3& q, std::size_t skip) {
    for (std::size_t c = 0; c < capsules.size(); ++c) {
      if (c != skip && capsules[c].distance(q) < capsules[c].radius) return true;
    }
    return false;
  };

  std::vector<Point3> pts;
  std::vector<Label> labels;
  const double kr = line.curvature() * r;
  const auto n_trunk = static_cast<std::size_t>(std::llround(spec.density * two_pi * r * spec.length));
  for (std::size_t i = 0; i < n_trunk;) {
    const double s = uniform(rng, 0.0, spec.length);
    const double theta = uniform(rng, 0.0, two_pi);
    if (kr > 0.0 && uniform01(rng) * (1.0 + kr) > 1.0 - kr * std::cos(theta)) continue;
    ++i;
    const Frame f = line.frame(s);
    const Point3 q = line.position(s) + r * (std::cos(theta) * f.n + std::sin(theta) * f.b);
    if (inside_capsule(q, capsules.size())) continue;
    pts.push_back(q);
    labels.push_back(0);
  }
  for (std::size_t c = 0; c < capsules.size(); ++c) {
    const auto& cap = capsules[c];
    const Vec3 axis = (cap.tip - cap.base).normalized();
    const Vec3 u = detail::perpendicular_unit(axis);
    const Vec3 v = axis.cross(u);
    const double len = (cap.tip - cap.base).norm();
    const double lateral = two_pi * cap.radius * len;
    const double cap_area = two_pi * cap.radius * cap.radius;
    const auto n = static_cast<std::size_t>(std::llround(spec.density * (lateral + cap_area)));
    for (std::size_t i = 0; i < n; ++i) {
      const double theta = uniform(rng, 0.0, two_pi);
      const Vec3 radial = std::cos(theta) * u + std::sin(theta) * v;
      Point3 q;
      if (uniform01(rng) * (lateral + cap_area) < lateral) {
        q = cap.base + uniform(rng, 0.0, len) * axis + cap.radius * radial;
      } else {
        // Uniform on the outward hemisphere: axial component uniform in [0, 1].
        const double z = uniform01(rng);
        q = cap.tip + cap.radius * (z * axis + std::sqrt(1.0 - z * z) * radial);
      }
      if (!(line.distance(q) > r) || inside_capsule(q, c)) continue;
      pts.push_back(q);
      labels.push_back(1);
    }
  }
  if (spec.noise_sigma > 0.0) {
    for (auto& q : pts) q += spec.noise_sigma * Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
  }

  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(spec.length / spec.skeleton_step)));
  std::vector<Point3> sk;
  for (std::size_t i = 0; i <= steps; ++i) {
    sk.push_back(line.position(spec.length * static_cast<double>(i) / static_cast<double>(steps)));
  }
  SyntheticTube out{PointCloud{std::move(pts), std::move(labels)}, compute_arc_length(std::move(sk))};
  return out;
}

/// Distance from p to the analytic centerline of `spec` (same construction
/// as generate_tube).
inline double centerline_distance(const TubeSpec& spec, const Point3& p) {
  Rng rng(spec.seed);
  return Centerline(spec, rng).distance(p);
}

// ---------------------------------------------------------------------------
// evaluation

/// 2|P n G| / (|P| + |G|) over points labeled `cls`; 1 when both are empty.
inline double dice(std::span<const Label> pred, std::span<const Label> gt, Label cls) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::LengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                               " labels, ground truth " + std::to_string(gt.size()));
  }
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] == cls, b = gt[i] == cls;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

struct EvalReport {
  std::map<Label, double> dsc_per_class;
  std::size_t n_points = 0;
  KeyValues config;
  std::uint64_t seed = 0;

  KeyValues to_key_values() const {
    KeyValues kv{{"n_points", std::to_string(n_points)}, {"seed", std::to_string(seed)}};
    for (const auto& [cls, d] : dsc_per_class) kv.emplace_back("dsc." + std::to_string(cls), text::real(d));
    for (const auto& [k, v] : config) kv.emplace_back("config." + k, v);
    return kv;
  }
};

/// Dice for every class present in either labeling.
inline EvalReport evaluate(std::span<const Label> pred, std::span<const Label> gt, std::uint64_t seed = 0,
                           KeyValues config = {}) {
  EvalReport r;
  r.n_points = gt.size();
  r.seed = seed;
  r.config = std::move(config);
  std::set<Label> classes(pred.begin(), pred.end());
  classes.insert(gt.begin(), gt.end());
  for (auto c : classes) r.dsc_per_class[c] = dice(pred, gt, c);
  return r;
}

/// Baseline on the transformed representation: 1 iff rho > rho_cut.
inline std::vector<Label> rho_threshold_segmenter(const CylindricalCloud& ccloud, double rho_cut) {
  std::vector<Label> out(ccloud.size());
  for (std::size_t i = 0; i < ccloud.size(); ++i) out[i] = ccloud.points[i].rho > rho_cut ? 1 : 0;
  return out;
}

/// Strawman working on raw Cartesian coordinates: 1 iff the distance from
/// the fixed world z axis exceeds `cut`. Only meaningful while the structure
/// happens to be aligned with z.
inline std::vector<Label> z_axis_threshold_segmenter(const PointCloud& cloud, double cut) {
  std::vector<Label> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = std::hypot(cloud.points[i].x(), cloud.points[i].y()) > cut ? 1 : 0;
  return out;
}

/// 1.25 x median rho; the trunk dominates the point count, so the median
/// sits near the trunk radius.
inline double auto_rho_cut(const CylindricalCloud& ccloud) {
  if (ccloud.points.empty()) throw Error(ErrorKind::EmptyCloud, "no points");
  std::vector<double> rho;
  rho.reserve(ccloud.size());
  for (const auto& p : ccloud.points) rho.push_back(p.rho);
  const auto mid = rho.begin() + static_cast<std::ptrdiff_t>(rho.size() / 2);
  std::nth_element(rho.begin(), mid, rho.end());
  return 1.25 * *mid;
}

/// Uniformly distributed rotation (Shoemake's unit-quaternion method).
inline Eigen::Quaterniond random_quaternion(Rng& rng) {
  const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double two_pi = 2.0 * std::numbers::pi;
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return Eigen::Quaterniond(b * std::cos(two_pi * u3), a * std::sin(two_pi * u2), a * std::cos(two_pi * u2),
                            b * std::sin(two_pi * u3));
}

inline RigidTransform random_rigid(Rng& rng, double translation_scale) {
  RigidTransform xf;
  xf.rotation = random_quaternion(rng).toRotationMatrix();
  xf.translation = translation_scale * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return xf;
}

using Segmenter = std::function<std::vector<Label>(const PointCloud& cloud, const CylindricalCloud& ccloud)>;

struct SweepOptions {
  std::size_t n_rotations = 20;
  std::uint64_t seed = 0;
  bool identity_first = false;  // first rotation is the identity
  double straightness_eps = kDefaultStraightnessEps;
  Label cls = 1;
};

/// Rigidly rotates cloud and skeleton together, recomputes frames and the
/// transform, segments, and scores against the cloud's own labels.
inline std::vector<EvalReport> rotation_sweep(const PointCloud& cloud, const Skeleton& skeleton, const SweepOptions& opt,
                                              const Segmenter& segment) {
  if (opt.n_rotations == 0) throw Error(ErrorKind::ConfigError, "n_rotations must be >= 1");
  if (!cloud.labels) throw Error(ErrorKind::LengthMismatch, "rotation sweep needs ground-truth labels");
  Rng rng(opt.seed);
  std::vector<EvalReport> out;
  for (std::size_t r = 0; r < opt.n_rotations; ++r) {
    const Eigen::Quaterniond q = (r == 0 && opt.identity_first) ? Eigen::Quaterniond::Identity() : random_quaternion(rng);
    RigidTransform xf;
    xf.rotation = q.toRotationMatrix();
    const PointCloud moved = apply_rigid(cloud, xf);
    const FramedSkeleton fs = compute_tnb(apply_rigid(skeleton, xf), opt.straightness_eps);
    const CylindricalCloud cc = forward_transform(moved, fs);
    const auto pred = segment(moved, cc);
    EvalReport rep = evaluate(pred, *cloud.labels, opt.seed,
                              {{"rotation_index", std::to_string(r)},
                               {"quaternion", text::real(q.w()) + " " + text::real(q.x()) + " " + text::real(q.y()) +
                                                  " " + text::real(q.z())}});
    rep.dsc_per_class.try_emplace(opt.cls, dice(pred, *cloud.labels, opt.cls));
    out.push_back(std::move(rep));
  }
  return out;
}

/// min / max / spread / mean of one class's Dice across a sweep.
inline KeyValues summarize_sweep(std::span<const EvalReport> reports, Label cls) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  for (const auto& r : reports) {
    const auto it = r.dsc_per_class.find(cls);
    const double d = it == r.dsc_per_class.end() ? 1.0 : it->second;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    sum += d;
  }
  return {{"n_rotations", std::to_string(reports.size())},
          {"class", std::to_string(cls)},
          {"dsc_min", text::real(lo)},
          {"dsc_max", text::real(hi)},
          {"dsc_spread", text::real(hi - lo)},
          {"dsc_mean", text::real(reports.empty() ? 0.0 : sum / static_cast<double>(reports.size()))}};
}

}  // namespace freseg
