// freseg: command-line front end for the skeleton / cylindrical-transform /
// fragment / baseline-segmentation pipeline and its individual stages.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "freseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace freseg;

namespace {

// A failure inside a named stage, reported with the input it was working on.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& input, const Error& e)
      : std::runtime_error(stage + " (" + input + "): " + e.what()),
        kind(e.kind()) {}
  ErrorKind kind;
};

template <class F>
auto stage(const std::string& name, const std::string& input, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw StageError(name, input, e);
  }
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<std::size_t> batch_size;
  std::optional<double> window_len, overlap, rho_cut, resolution, min_branch_len;
  std::string out;
  bool verbose = false;
};

void add_common(CLI::App* sub, Flags& f, bool out_required = true) {
  sub->add_option("--config", f.config, "key:value config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "random seed");
  sub->add_option("--policy", f.policy, "trajectory policy")->check(CLI::IsMember({"dendrite", "artery"}));
  sub->add_option("--batch-size", f.batch_size, "points per batch (default 30000)");
  sub->add_option("--window-len", f.window_len, "fragment window length along the skeleton");
  sub->add_option("--overlap", f.overlap, "fragment overlap fraction in [0, 1)");
  sub->add_option("--rho-cut", f.rho_cut, "baseline radial threshold (0 = automatic)");
  sub->add_option("--resolution", f.resolution, "voxel size");
  sub->add_option("--min-branch-len", f.min_branch_len, "shortest kept branch");
  auto* out = sub->add_option("--out", f.out, "output path");
  if (out_required) out->required();
  sub->add_flag("--verbose", f.verbose, "stage diagnostics on stderr");
}

PipelineConfig make_config(const Flags& f) {
  PipelineConfig cfg;
  if (!f.config.empty()) {
    cfg = stage("config", f.config, [&] { return apply_config(cfg, load_key_values(f.config)); });
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.policy) cfg.policy = parse_policy(*f.policy);
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.window_len) cfg.window_len = *f.window_len;
  if (f.overlap) cfg.overlap_frac = *f.overlap;
  if (f.rho_cut) cfg.rho_cut = *f.rho_cut;
  if (f.resolution) cfg.resolution = *f.resolution;
  if (f.min_branch_len) cfg.min_branch_len = *f.min_branch_len;
  if (cfg.batch_size == 0) throw StageError("config", "--batch-size", Error(ErrorKind::ConfigError, "must be positive"));
  if (!(cfg.overlap_frac >= 0.0 && cfg.overlap_frac < 1.0)) {
    throw StageError("config", "--overlap", Error(ErrorKind::ConfigError, "must lie in [0, 1)"));
  }
  return cfg;
}

void report(const Flags& f, const std::vector<std::string>& diagnostics) {
  if (!f.verbose) return;
  for (const auto& d : diagnostics) std::cerr << d << '\n';
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_swc(const std::string& path) { return ends_with(path, ".swc") || ends_with(path, ".SWC"); }

PointCloud read_cloud(const std::string& path) {
  return stage("load cloud", path, [&] {
    auto c = load_pointcloud(path);
    c.validate();
    if (c.empty()) throw Error(ErrorKind::EmptyCloud, "no points");
    return c;
  });
}

// SWC graphs go through trajectory selection (conditioned on `cloud` when
// given); framed-skeleton files are taken as they are.
std::vector<FramedSkeleton> read_paths(const std::string& path, const PipelineConfig& cfg,
                                       std::span<const Point3> cloud, std::vector<std::string>* diagnostics) {
  if (is_swc(path)) {
    const auto graph = stage("load skeleton", path, [&] { return load_swc(path); });
    return stage("trajectories", path, [&] { return trajectories_stage(graph, cfg, cloud, diagnostics); });
  }
  return stage("load skeleton", path, [&] {
    std::vector<FramedSkeleton> out;
    for (const auto& s : load_framed(path)) out.push_back(compute_tnb(s, cfg.straightness_eps));
    return out;
  });
}

VolumeGrid read_volume(const std::string& path) {
  return stage("load volume", path, [&] { return load_volume(path); });
}

// Labels from a volume (path.meta present), a labeled cloud, or a plain
// label file.
std::vector<Label> read_any_labels(const std::string& path) {
  if (fs::exists(meta_path(path))) {
    const auto v = read_volume(path);
    return {v.data.begin(), v.data.end()};
  }
  return stage("load labels", path, [&] {
    const std::string content = text::read_file(path);
    std::size_t columns = 0;
    text::for_each_record(content, [&](std::size_t, const std::vector<std::string_view>& t) {
      if (columns == 0) columns = t.size();
    });
    if (columns == 4) {
      auto c = parse_pointcloud(content, path);
      return *c.labels;
    }
    return load_labels(path);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frenet-frame cylindrical transform and fragment-sampling pipeline"};
  app.require_subcommand(1);
  Flags f;
  std::string cloud_in, skeleton_in, cyl_in, mesh_in, volume_in, fragments_in, labels_in, like_in, pred_in, gt_in,
      input_in, skeleton_out, volume_out, segmenter = "rho";
  std::optional<std::size_t> n_rotations;

  auto* skel = app.add_subcommand("skeletonize", "point cloud -> SWC skeleton");
  add_common(skel, f);
  skel->add_option("--cloud", cloud_in, "input cloud")->required();

  auto* frames = app.add_subcommand("frames", "SWC -> framed trajectories");
  add_common(frames, f);
  frames->add_option("--skeleton", skeleton_in, "input SWC")->required();
  frames->add_option("--cloud", cloud_in, "cloud used to condition the trajectories");

  auto* transform = app.add_subcommand("transform", "cloud + skeleton -> cylindrical cloud");
  add_common(transform, f);
  transform->add_option("--cloud", cloud_in, "input cloud")->required();
  transform->add_option("--skeleton", skeleton_in, "SWC or framed skeleton")->required();

  auto* inverse = app.add_subcommand("inverse", "cylindrical cloud + skeleton -> cloud");
  add_common(inverse, f);
  inverse->add_option("--cylindrical", cyl_in, "input cylindrical cloud")->required();
  inverse->add_option("--skeleton", skeleton_in, "framed skeleton used by the forward transform")->required();

  auto* fragment = app.add_subcommand("fragment", "cylindrical cloud -> overlapping fragments");
  add_common(fragment, f);
  fragment->add_option("--cylindrical", cyl_in, "input cylindrical cloud")->required();
  fragment->add_option("--skeleton", skeleton_in, "framed skeleton used by the forward transform")->required();

  auto* voxelize = app.add_subcommand("voxelize", "OBJ mesh -> volume");
  add_common(voxelize, f);
  voxelize->add_option("--mesh", mesh_in, "input OBJ")->required();

  auto* points = app.add_subcommand("points", "volume -> labeled cloud");
  add_common(points, f);
  points->add_option("--volume", volume_in, "input volume")->required();

  auto* synth = app.add_subcommand("synth", "synthetic spiny tube -> cloud (+ skeleton, volume)");
  add_common(synth, f);
  synth->add_option("--skeleton-out", skeleton_out, "ground-truth skeleton (.swc or framed text)");
  synth->add_option("--volume-out", volume_out, "labeled volume (1 trunk, 2 spine)");

  auto* segment = app.add_subcommand("segment-baseline", "cylindrical cloud -> labels (rho threshold)");
  add_common(segment, f);
  segment->add_option("--cylindrical", cyl_in, "input cylindrical cloud")->required();
  segment->add_option("--fragments", fragments_in, "fragments; labels are batched and voted when given");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "prediction vs ground truth -> Dice report");
  add_common(evaluate_cmd, f);
  evaluate_cmd->add_option("--pred", pred_in, "labels, labeled cloud or volume")->required();
  evaluate_cmd->add_option("--gt", gt_in, "labels, labeled cloud or volume")->required();

  auto* sweep = app.add_subcommand("sweep-rotations", "Dice under random rigid rotations");
  add_common(sweep, f);
  sweep->add_option("--cloud", cloud_in, "labeled cloud (0 trunk, 1 spine)")->required();
  sweep->add_option("--skeleton", skeleton_in, "SWC or framed skeleton")->required();
  sweep->add_option("--n-rotations", n_rotations, "number of rotations");
  sweep->add_option("--segmenter", segmenter, "rho or z-axis")->check(CLI::IsMember({"rho", "z-axis"}));

  auto* pipeline = app.add_subcommand("pipeline", "volume or OBJ -> labeled volume");
  add_common(pipeline, f);
  pipeline->add_option("--input", input_in, "input volume or .obj mesh")->required();

  auto* remap = app.add_subcommand("remap", "cloud + point labels -> labeled volume");
  add_common(remap, f);
  remap->add_option("--cloud", cloud_in, "cloud the labels belong to")->required();
  remap->add_option("--labels", labels_in, "per-point labels")->required();
  remap->add_option("--like", like_in, "volume providing the grid")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "freseg: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    PipelineConfig cfg = make_config(f);
    std::vector<std::string> diag;

    if (*skel) {
      const auto cloud = read_cloud(cloud_in);
      const auto graph = stage("skeletonize", cloud_in, [&] { return skeletonize_stage(cloud, cfg, &diag); });
      stage("write swc", f.out, [&] { save_swc(f.out, graph); });
    } else if (*frames) {
      std::optional<PointCloud> cloud;
      if (!cloud_in.empty()) cloud = read_cloud(cloud_in);
      const auto paths = read_paths(skeleton_in, cfg, cloud ? std::span<const Point3>(cloud->points) : std::span<const Point3>(), &diag);
      stage("write frames", f.out, [&] { save_framed(f.out, paths); });
    } else if (*transform) {
      const auto cloud = read_cloud(cloud_in);
      const auto paths = read_paths(skeleton_in, cfg, cloud.points, &diag);
      const auto cc = stage("transform", cloud_in, [&] { return forward_transform(cloud, paths); });
      stage("write cylindrical", f.out, [&] { save_cylindrical(f.out, cc); });
    } else if (*inverse) {
      const auto cc = stage("load cylindrical", cyl_in, [&] { return load_cylindrical(cyl_in); });
      const auto paths = read_paths(skeleton_in, cfg, {}, &diag);
      const auto cloud = stage("inverse", cyl_in, [&] { return inverse_transform(cc, paths); });
      stage("write cloud", f.out, [&] { save_pointcloud(f.out, cloud); });
    } else if (*fragment) {
      const auto cc = stage("load cylindrical", cyl_in, [&] { return load_cylindrical(cyl_in); });
      const auto paths = read_paths(skeleton_in, cfg, {}, &diag);
      const auto frags = stage("fragment", cyl_in, [&] { return fragment_stage(cc, paths, cfg); });
      stage("write fragments", f.out, [&] { save_fragments(f.out, frags); });
    } else if (*voxelize) {
      const auto mesh = stage("load mesh", mesh_in, [&] { return load_obj(mesh_in); });
      const auto vol = stage("voxelize", mesh_in, [&] { return voxelize_stage(mesh, cfg); });
      stage("write volume", f.out, [&] { save_volume(f.out, vol); });
    } else if (*points) {
      const auto vol = read_volume(volume_in);
      const auto cloud = stage("points", volume_in, [&] { return volume_to_points(vol); });
      stage("write cloud", f.out, [&] { save_pointcloud(f.out, cloud); });
    } else if (*synth) {
      TubeSpec spec = cfg.tube;
      spec.seed = cfg.seed;
      const auto tube = stage("synth", f.config.empty() ? "<defaults>" : f.config, [&] { return generate_tube(spec); });
      stage("write cloud", f.out, [&] { save_pointcloud(f.out, tube.cloud); });
      if (!skeleton_out.empty()) {
        stage("write skeleton", skeleton_out, [&] {
          if (is_swc(skeleton_out)) {
            save_swc(skeleton_out, chain_graph(tube.skeleton));
          } else {
            const FramedSkeleton framed = compute_tnb(tube.skeleton, cfg.straightness_eps);
            save_framed(skeleton_out, std::span<const FramedSkeleton>(&framed, 1));
          }
        });
      }
      if (!volume_out.empty()) {
        stage("write volume", volume_out, [&] { save_volume(volume_out, synth_volume(tube.cloud, cfg)); });
      }
    } else if (*segment) {
      const auto cc = stage("load cylindrical", cyl_in, [&] { return load_cylindrical(cyl_in); });
      const auto labels = stage("segment-baseline", cyl_in, [&] {
        if (cc.points.empty()) throw Error(ErrorKind::EmptyCloud, "no points");
        if (fragments_in.empty()) {
          return rho_threshold_segmenter(cc, cfg.rho_cut > 0.0 ? cfg.rho_cut : auto_rho_cut(cc));
        }
        const auto frags = stage("load fragments", fragments_in, [&] { return load_fragments(fragments_in); });
        return segment_stage(cc, frags, cfg);
      });
      stage("write labels", f.out, [&] { save_labels(f.out, labels); });
    } else if (*evaluate_cmd) {
      const auto pred = read_any_labels(pred_in);
      const auto gt = read_any_labels(gt_in);
      const auto rep = stage("evaluate", pred_in, [&] {
        if (pred.size() != gt.size()) {
          throw Error(ErrorKind::LengthMismatch,
                      std::to_string(pred.size()) + " predictions vs " + std::to_string(gt.size()) + " ground truth");
        }
        return evaluate(pred, gt, cfg.seed, {{"pred", pred_in}, {"gt", gt_in}});
      });
      stage("write report", f.out, [&] { text::write_file(f.out, format_key_values(rep.to_key_values())); });
    } else if (*sweep) {
      const auto cloud = read_cloud(cloud_in);
      if (!cloud.labels) {
        throw StageError("sweep-rotations", cloud_in, Error(ErrorKind::LengthMismatch, "cloud carries no labels"));
      }
      const auto paths = read_paths(skeleton_in, cfg, cloud.points, &diag);
      SweepOptions opt;
      opt.n_rotations = n_rotations ? *n_rotations : cfg.n_rotations;
      opt.seed = cfg.seed;
      opt.identity_first = true;
      opt.straightness_eps = cfg.straightness_eps;
      // The cut is fixed once, from the unrotated data, so it cannot vary with the rotation.
      const double cut = cfg.rho_cut > 0.0 ? cfg.rho_cut : auto_rho_cut(forward_transform(cloud, paths.front()));
      Segmenter seg;
      if (segmenter == "rho") {
        seg = [cut](const PointCloud&, const CylindricalCloud& cc) { return rho_threshold_segmenter(cc, cut); };
      } else {
        seg = [cut](const PointCloud& c, const CylindricalCloud&) { return z_axis_threshold_segmenter(c, cut); };
      }
      const auto reports = stage("sweep-rotations", cloud_in,
                                 [&] { return rotation_sweep(cloud, paths.front().skeleton, opt, seg); });
      stage("write sweep", f.out, [&] {
        std::error_code ec;
        fs::create_directories(f.out, ec);
        if (ec) throw Error(ErrorKind::IoError, "cannot create directory: " + ec.message());
        for (std::size_t r = 0; r < reports.size(); ++r) {
          char name[32];
          std::snprintf(name, sizeof name, "rotation_%03zu.txt", r);
          text::write_file((fs::path(f.out) / name).string(), format_key_values(reports[r].to_key_values()));
        }
        KeyValues summary = summarize_sweep(reports, opt.cls);
        summary.emplace_back("segmenter", segmenter);
        summary.emplace_back("rho_cut", text::real(cut));
        summary.emplace_back("seed", std::to_string(cfg.seed));
        text::write_file((fs::path(f.out) / "summary.txt").string(), format_key_values(summary));
      });
    } else if (*pipeline) {
      VolumeGrid vol;
      if (ends_with(input_in, ".obj") || ends_with(input_in, ".OBJ")) {
        const auto mesh = stage("load mesh", input_in, [&] { return load_obj(input_in); });
        vol = stage("voxelize", input_in, [&] { return voxelize_stage(mesh, cfg); });
      } else {
        vol = read_volume(input_in);
      }
      const auto result = stage("pipeline", input_in, [&] { return run_pipeline(vol, cfg); });
      diag = result.diagnostics;
      stage("write volume", f.out, [&] { save_volume(f.out, result.output); });
    } else if (*remap) {
      const auto cloud = read_cloud(cloud_in);
      const auto labels = stage("load labels", labels_in, [&] { return load_labels(labels_in); });
      const auto like = read_volume(like_in);
      const auto vol = stage("remap", labels_in, [&] {
        if (labels.size() != cloud.size()) {
          throw Error(ErrorKind::LengthMismatch,
                      std::to_string(labels.size()) + " labels for " + std::to_string(cloud.size()) + " points");
        }
        return remap_stage(cloud, labels, like, 1);
      });
      stage("write volume", f.out, [&] { save_volume(f.out, vol); });
    }
    report(f, diag);
    return 0;
  } catch (const StageError& e) {
    std::cerr << "freseg: " << e.what() << '\n';
    return e.kind == ErrorKind::ConfigError ? 1 : 2;
  } catch (const Error& e) {
    std::cerr << "freseg: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "freseg: " << e.what() << '\n';
    return 2;
  }
}
