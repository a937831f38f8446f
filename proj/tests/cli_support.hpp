#pragma once

// Drives the freseg executable through std::system. The script below runs
// every subcommand once inside a working directory; running it twice in two
// directories and comparing the trees is the determinism check.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "freseg/io.hpp"
#include "support.hpp"

namespace freseg::test {

namespace fs = std::filesystem;

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

class Cli {
 public:
  Cli(std::string binary, fs::path workdir) : binary_(std::move(binary)), dir_(std::move(workdir)) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Exit status of `freseg <args>`, run inside the working directory.
  // stderr goes to <workdir>/stderr.log (overwritten on every call).
  int run(const std::string& args) const {
    const std::string cmd = "cd " + shell_quote(dir_.string()) + " && " + shell_quote(binary_) + " " + args +
                            " >/dev/null 2>" + shell_quote(stderr_path());
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
  }

  std::string last_stderr() const { return read(stderr_path()); }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }

 private:
  std::string stderr_path() const { return (dir_ / "stderr.log").string(); }

  std::string binary_;
  fs::path dir_;
};

struct ScriptStep {
  std::string subcommand;
  std::string args;
  std::vector<std::string> outputs;  // files or directories, relative to the workdir
};

inline std::vector<ScriptStep> cli_script() {
  return {
      {"synth", "synth --config tube.cfg --seed 3 --out cloud.txt --skeleton-out gt.txt --volume-out vol.raw",
       {"cloud.txt", "gt.txt", "vol.raw", "vol.raw.meta"}},
      {"synth", "synth --config line.cfg --seed 4 --out line.txt --skeleton-out line.swc", {"line.txt", "line.swc"}},
      {"points", "points --volume vol.raw --out pts.txt", {"pts.txt"}},
      {"skeletonize", "skeletonize --cloud pts.txt --seed 3 --out skel.swc", {"skel.swc"}},
      {"frames", "frames --skeleton skel.swc --cloud pts.txt --out frames.txt", {"frames.txt"}},
      {"transform", "transform --cloud pts.txt --skeleton frames.txt --out cyl.txt", {"cyl.txt"}},
      {"inverse", "inverse --cylindrical cyl.txt --skeleton frames.txt --out inv.txt", {"inv.txt"}},
      {"fragment", "fragment --cylindrical cyl.txt --skeleton frames.txt --out frags.txt", {"frags.txt"}},
      {"segment-baseline",
       "segment-baseline --cylindrical cyl.txt --fragments frags.txt --batch-size 2000 --seed 3 --out labels.txt",
       {"labels.txt"}},
      {"remap", "remap --cloud pts.txt --labels labels.txt --like vol.raw --out remap.raw",
       {"remap.raw", "remap.raw.meta"}},
      {"pipeline", "pipeline --input vol.raw --batch-size 2000 --seed 3 --out pipe.raw", {"pipe.raw", "pipe.raw.meta"}},
      {"evaluate", "evaluate --pred pipe.raw --gt vol.raw --out eval.txt", {"eval.txt"}},
      {"sweep-rotations", "sweep-rotations --cloud cloud.txt --skeleton gt.txt --n-rotations 6 --seed 5 --out sweep_rho",
       {"sweep_rho"}},
      {"sweep-rotations",
       "sweep-rotations --config line.cfg --cloud line.txt --skeleton line.swc --n-rotations 6 --seed 5 --segmenter z-axis --out sweep_z",
       {"sweep_z"}},
      {"voxelize", "voxelize --mesh cube.obj --resolution 0.1 --out cube.raw", {"cube.raw", "cube.raw.meta"}},
      {"pipeline", "pipeline --input cube.obj --resolution 0.1 --batch-size 500 --out cube_pipe.raw",
       {"cube_pipe.raw", "cube_pipe.raw.meta"}},
  };
}

// Inputs the script expects in a fresh working directory.
inline void write_script_inputs(const Cli& cli) {
  std::ofstream(cli.path("tube.cfg")) << "tube.kind: helix\ntube.length: 30\ntube.helix_radius: 8\n"
                                         "tube.helix_pitch: 30\ntube.spines: 10\ntube.density: 30\n";
  std::ofstream(cli.path("line.cfg")) << "tube.kind: line\ntube.length: 20\ntube.spines: 8\ntube.density: 30\n"
                                         "extend_ends: false\nrecenter_rounds: 0\n";
  save_obj(cli.path("cube.obj"), box_mesh(Point3::Zero(), Point3(2, 1, 1)));
}

// Concatenated contents of a file or of every file under a directory, with
// names, for bitwise comparison.
inline std::string snapshot(const fs::path& p) {
  if (!fs::is_directory(p)) return Cli::read(p.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += fs::relative(f, p).string() + "\n" + Cli::read(f.string());
  return out;
}

}  // namespace freseg::test
