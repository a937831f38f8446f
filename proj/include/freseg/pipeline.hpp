#pragma once

// End-to-end orchestration: volume (or mesh) -> points -> skeleton ->
// trajectories -> cylindrical transform -> fragments -> batches -> baseline
// labels -> majority vote -> label volume. Each stage is a function so the
// CLI can run them one at a time on intermediate files and get the same
// result as the fused pipeline.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "freseg/error.hpp"
#include "freseg/geometry.hpp"
#include "freseg/harness.hpp"
#include "freseg/io.hpp"
#include "freseg/sampling.hpp"
#include "freseg/skeletonize.hpp"
#include "freseg/volume.hpp"

namespace freseg {

enum class Policy { Dendrite, Artery };

inline Policy parse_policy(const std::string& s) {
  if (s == "dendrite") return Policy::Dendrite;
  if (s == "artery") return Policy::Artery;
  throw Error(ErrorKind::ConfigError, "unknown policy '" + s + "' (expected dendrite or artery)");
}

inline std::string to_string(Policy p) { return p == Policy::Dendrite ? "dendrite" : "artery"; }

/// Every tunable of every stage. Zero means "derive from the data" for the
/// fields documented that way.
struct PipelineConfig {
  std::uint64_t seed = 0;
  Policy policy = Policy::Dendrite;
  std::size_t batch_size = kDefaultBatchSize;
  double window_len = 0.0;  // 0: total path length / 8
  double overlap_frac = kDefaultOverlap;
  double rho_cut = 0.0;     // 0: 1.25 x median rho
  double threshold = 0.5;   // winding-number voxelization threshold
  double resolution = 0.0;  // voxel size for meshes; 0: longest bbox side / 128
  double min_branch_len = 0.0;
  double straightness_eps = kDefaultStraightnessEps;

  // skeletonization; 0 selects the data-driven default
  std::size_t num_seeds = 0;
  double neighborhood_radius = 0.0;
  double repulsion_weight = 0.35;
  int max_iters = 100;
  double convergence_tol = 0.0;
  double edge_radius = 0.0;

  // trajectory conditioning applied to every extracted path
  int smoothing_iters = 0;
  int recenter_rounds = 3;
  bool extend_ends = true;
  double skeleton_step = 0.0;  // 0: keep the skeleton vertices as they are

  // synthesis and sweeps
  TubeSpec tube;
  std::size_t grid = 0;  // synthetic volume edge length in voxels; 0: use resolution
  std::size_t n_rotations = 20;

  SkeletonizeParams skeletonize_params(const PointCloud& cloud) const {
    SkeletonizeParams p = default_skeletonize_params(cloud);
    if (neighborhood_radius > 0.0) {
      p.neighborhood_radius = neighborhood_radius;
      p.convergence_tol = 1e-4 * neighborhood_radius;
      p.edge_radius = 2.0 * neighborhood_radius;
    }
    if (num_seeds > 0) p.num_seeds = num_seeds;
    if (convergence_tol > 0.0) p.convergence_tol = convergence_tol;
    if (edge_radius > 0.0) p.edge_radius = edge_radius;
    p.repulsion_weight = repulsion_weight;
    p.max_iters = max_iters;
    return p;
  }
};

namespace detail {

struct ConfigField {
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

inline double to_real(const std::string& key, const std::string& v) {
  try {
    return text::parse_real(v, key, 0);
  } catch (const Error&) {
    throw Error(ErrorKind::ConfigError, "'" + key + "' expects a number, got '" + v + "'");
  }
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  try {
    return text::parse_int<Int>(v, key, 0);
  } catch (const Error&) {
    throw Error(ErrorKind::ConfigError, "'" + key + "' expects an integer, got '" + v + "'");
  }
}

#define FRESEG_REAL(name, member)                                                                         \
  {                                                                                                       \
    name, ConfigField {                                                                                   \
      [](PipelineConfig& c, const std::string& v) { c.member = to_real(name, v); },                       \
          [](const PipelineConfig& c) { return text::real(c.member); }                                    \
    }                                                                                                     \
  }
#define FRESEG_INT(name, member, type)                                                                    \
  {                                                                                                       \
    name, ConfigField {                                                                                   \
      [](PipelineConfig& c, const std::string& v) { c.member = to_int<type>(name, v); },                  \
          [](const PipelineConfig& c) { return std::to_string(c.member); }                                \
    }                                                                                                     \
  }

inline const std::map<std::string, ConfigField>& config_fields() {
  static const std::map<std::string, ConfigField> fields = {
      FRESEG_INT("seed", seed, std::uint64_t),
      {"policy", ConfigField{[](PipelineConfig& c, const std::string& v) { c.policy = parse_policy(v); },
                             [](const PipelineConfig& c) { return to_string(c.policy); }}},
      FRESEG_INT("batch_size", batch_size, std::size_t),
      FRESEG_REAL("window_len", window_len),
      FRESEG_REAL("overlap_frac", overlap_frac),
      FRESEG_REAL("rho_cut", rho_cut),
      FRESEG_REAL("threshold", threshold),
      FRESEG_REAL("resolution", resolution),
      FRESEG_REAL("min_branch_len", min_branch_len),
      FRESEG_REAL("straightness_eps", straightness_eps),
      FRESEG_INT("num_seeds", num_seeds, std::size_t),
      FRESEG_REAL("neighborhood_radius", neighborhood_radius),
      FRESEG_REAL("repulsion_weight", repulsion_weight),
      FRESEG_INT("max_iters", max_iters, int),
      FRESEG_REAL("convergence_tol", convergence_tol),
      FRESEG_REAL("edge_radius", edge_radius),
      FRESEG_INT("smoothing_iters", smoothing_iters, int),
      FRESEG_REAL("skeleton_step", skeleton_step),
      FRESEG_INT("recenter_rounds", recenter_rounds, int),
      {"extend_ends", ConfigField{[](PipelineConfig& c, const std::string& v) {
                                    if (v == "true" || v == "1") c.extend_ends = true;
                                    else if (v == "false" || v == "0") c.extend_ends = false;
                                    else throw Error(ErrorKind::ConfigError, "'extend_ends' expects true or false, got '" + v + "'");
                                  },
                                  [](const PipelineConfig& c) { return std::string(c.extend_ends ? "true" : "false"); }}},
      FRESEG_INT("grid", grid, std::size_t),
      FRESEG_INT("n_rotations", n_rotations, std::size_t),
      {"tube.kind", ConfigField{[](PipelineConfig& c, const std::string& v) {
                                  try {
                                    c.tube.kind = parse_centerline_kind(v);
                                  } catch (const Error& e) {
                                    throw Error(ErrorKind::ConfigError, e.what());
                                  }
                                },
                                [](const PipelineConfig& c) { return to_string(c.tube.kind); }}},
      FRESEG_REAL("tube.length", tube.length),
      FRESEG_REAL("tube.helix_radius", tube.helix_radius),
      FRESEG_REAL("tube.helix_pitch", tube.helix_pitch),
      FRESEG_REAL("tube.walk_step", tube.walk_step),
      FRESEG_REAL("tube.walk_turn", tube.walk_turn),
      FRESEG_REAL("tube.trunk_radius", tube.trunk_radius),
      FRESEG_INT("tube.spines", tube.spines, std::size_t),
      FRESEG_REAL("tube.bump_radius_min", tube.bump_radius_min),
      FRESEG_REAL("tube.bump_radius_max", tube.bump_radius_max),
      FRESEG_REAL("tube.protrusion_min", tube.protrusion_min),
      FRESEG_REAL("tube.protrusion_max", tube.protrusion_max),
      FRESEG_REAL("tube.noise_sigma", tube.noise_sigma),
      FRESEG_REAL("tube.density", tube.density),
      FRESEG_REAL("tube.skeleton_step", tube.skeleton_step),
  };
  return fields;
}

#undef FRESEG_REAL
#undef FRESEG_INT

}  // namespace detail

/// Applies key:value pairs on top of `base`; unknown keys are rejected.
inline PipelineConfig apply_config(PipelineConfig base, const KeyValues& kv) {
  const auto& fields = detail::config_fields();
  for (const auto& [key, value] : kv) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    it->second.set(base, value);
  }
  return base;
}

inline KeyValues config_to_key_values(const PipelineConfig& c) {
  KeyValues kv;
  for (const auto& [key, field] : detail::config_fields()) kv.emplace_back(key, field.get(c));
  return kv;
}

// ---------------------------------------------------------------------------
// stages

/// Contracts the cloud and keeps the minimum spanning forest of the
/// resulting graph, which is what SWC can represent.
inline SkeletonGraph skeletonize_stage(const PointCloud& cloud, const PipelineConfig& cfg,
                                       std::vector<std::string>* diagnostics = nullptr) {
  const auto res = l1_skeletonize(cloud, cfg.skeletonize_params(cloud), cfg.seed);
  if (diagnostics) {
    diagnostics->push_back("skeletonize: " + std::to_string(res.iterations) + " iterations, " +
                           (res.converged ? "converged" : "not converged") + ", final displacement " +
                           text::real(res.final_displacement));
  }
  SkeletonGraph forest = res.graph;
  forest.edges = detail::spanning_forest(res.graph, res.graph.edges).first;
  forest.normalize();
  return forest;
}

inline Skeleton condition_path(const Skeleton& s, const PipelineConfig& cfg, std::span<const Point3> cloud = {}) {
  Skeleton out = s;
  if (cfg.extend_ends) out = extend_ends(out, cloud);
  if (cfg.recenter_rounds > 0) out = recenter_path(out, cloud, cfg.recenter_rounds, 0.0, cfg.straightness_eps);
  if (cfg.smoothing_iters > 0) out = smooth(out, cfg.smoothing_iters);
  if (cfg.skeleton_step > 0.0) out = resample(out, cfg.skeleton_step);
  return out;
}

/// Sampling trajectories under the configured policy, framed.
inline std::vector<FramedSkeleton> trajectories_stage(const SkeletonGraph& graph, const PipelineConfig& cfg,
                                                      std::span<const Point3> cloud = {},
                                                      std::vector<std::string>* diagnostics = nullptr) {
  std::vector<Skeleton> paths;
  if (cfg.policy == Policy::Dendrite) {
    auto p = select_dendrite_path(graph);
    if (diagnostics) {
      for (auto& d : p.diagnostics) diagnostics->push_back("trajectory: " + d);
    }
    paths.push_back(p.skeleton);
  } else {
    auto cover = cover_paths(graph, cfg.min_branch_len);
    if (cover.empty()) throw Error(ErrorKind::NoLeaves, "skeleton graph has no edges");
    for (const auto& p : cover) {
      if (p.skeleton.total_length() >= cfg.min_branch_len) paths.push_back(p.skeleton);
    }
    if (paths.empty()) {
      const auto longest = std::max_element(cover.begin(), cover.end(), [](const auto& a, const auto& b) {
        return a.skeleton.total_length() < b.skeleton.total_length();
      });
      paths.push_back(longest->skeleton);
    }
  }
  std::vector<FramedSkeleton> framed;
  for (const auto& p : paths) framed.push_back(compute_tnb(condition_path(p, cfg, cloud), cfg.straightness_eps));
  return framed;
}

inline std::vector<Fragment> fragment_stage(const CylindricalCloud& cc, std::span<const FramedSkeleton> paths,
                                            const PipelineConfig& cfg) {
  std::vector<Fragment> out;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const Skeleton& s = paths[k].skeleton;
    const double window = cfg.window_len > 0.0 ? cfg.window_len : s.total_length() / 8.0;
    auto frags = fragment_cloud(cc, s, window, cfg.overlap_frac, offset, k);
    out.insert(out.end(), std::make_move_iterator(frags.begin()), std::make_move_iterator(frags.end()));
    offset += s.size();
  }
  return out;
}

/// Batches every fragment (fragment f seeded with seed + f), labels each
/// batch with the rho-threshold baseline, and resolves by majority vote.
inline std::vector<Label> segment_stage(const CylindricalCloud& cc, std::span<const Fragment> fragments,
                                        const PipelineConfig& cfg) {
  const double cut = cfg.rho_cut > 0.0 ? cfg.rho_cut : auto_rho_cut(cc);
  const auto per_point = rho_threshold_segmenter(cc, cut);
  std::vector<Batch> batches;
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    auto b = make_batches(fragments[f], cfg.batch_size, cfg.seed + f, f);
    batches.insert(batches.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
  }
  std::vector<std::vector<Label>> batch_labels;
  batch_labels.reserve(batches.size());
  for (const auto& b : batches) {
    std::vector<Label> l;
    l.reserve(b.point_indices.size());
    for (auto i : b.point_indices) l.push_back(per_point[i]);
    batch_labels.push_back(std::move(l));
  }
  return assemble_prediction(cc.size(), batches, batch_labels);
}

/// Point labels are shifted by `offset` when written to a volume, keeping 0
/// for background.
inline VolumeGrid remap_stage(const PointCloud& cloud, std::span<const Label> labels, const VolumeGrid& like,
                              Label offset = 1) {
  std::vector<Label> shifted(labels.begin(), labels.end());
  for (auto& l : shifted) l += offset;
  return remap_to_volume(cloud, shifted, like);
}

inline double default_resolution(const TriMesh& mesh) {
  Point3 lo = mesh.vertices.front(), hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).maxCoeff() / 128.0;
}

inline VolumeGrid voxelize_stage(const TriMesh& mesh, const PipelineConfig& cfg) {
  if (mesh.vertices.empty()) throw Error(ErrorKind::EmptyCloud, "mesh has no vertices");
  const double res = cfg.resolution > 0.0 ? cfg.resolution : default_resolution(mesh);
  const VolumeGrid grid = bounding_grid(mesh.vertices, res);
  return voxelize_mesh(mesh, grid.shape, grid.voxel_size, grid.origin, cfg.threshold);
}

/// Scatters a synthetic cloud into a volume (labels shifted by one). With
/// `grid` > 0 the volume is grid^3 voxels, cubic, centered on the cloud.
inline VolumeGrid synth_volume(const PointCloud& cloud, const PipelineConfig& cfg) {
  VolumeGrid like;
  if (cfg.grid > 0) {
    Point3 lo = cloud.points.front(), hi = lo;
    for (const auto& p : cloud.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    if (cfg.grid < 3) throw Error(ErrorKind::ConfigError, "grid must be at least 3");
    const double side = (hi - lo).maxCoeff() * (1.0 + 1e-9) / static_cast<double>(cfg.grid - 2);
    const Point3 center = 0.5 * (lo + hi);
    like = VolumeGrid::zeros({cfg.grid, cfg.grid, cfg.grid}, Vec3::Constant(side),
                             center - Vec3::Constant(0.5 * side * static_cast<double>(cfg.grid)));
  } else {
    const double res = cfg.resolution > 0.0 ? cfg.resolution : cfg.tube.trunk_radius / 4.0;
    like = bounding_grid(cloud.points, res);
  }
  return remap_stage(cloud, *cloud.labels, like, 1);
}

struct PipelineResult {
  VolumeGrid input;
  PointCloud cloud;
  SkeletonGraph skeleton;
  std::vector<FramedSkeleton> paths;
  CylindricalCloud cylindrical;
  std::vector<Fragment> fragments;
  std::vector<Label> point_labels;
  VolumeGrid output;
  std::vector<std::string> diagnostics;
};

/// Full pipeline on a label volume; foreground is every nonzero voxel. The
/// output volume holds 1 for trunk and 2 for protrusions.
inline PipelineResult run_pipeline(const VolumeGrid& volume, const PipelineConfig& cfg) {
  PipelineResult r;
  r.input = volume;
  r.cloud = volume_to_points(volume);
  if (r.cloud.empty()) throw Error(ErrorKind::EmptyCloud, "volume has no foreground voxels");
  r.skeleton = skeletonize_stage(r.cloud, cfg, &r.diagnostics);
  r.paths = trajectories_stage(r.skeleton, cfg, r.cloud.points, &r.diagnostics);
  r.cylindrical = forward_transform(r.cloud, r.paths);
  r.fragments = fragment_stage(r.cylindrical, r.paths, cfg);
  r.point_labels = segment_stage(r.cylindrical, r.fragments, cfg);
  r.output = remap_stage(r.cloud, r.point_labels, volume, 1);
  return r;
}

}  // namespace freseg
