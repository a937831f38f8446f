#include <gtest/gtest.h>

#include <unistd.h>

#include "cli_support.hpp"
#include "freseg/harness.hpp"

using namespace freseg;
using namespace freseg::test;

namespace {

fs::path scratch(const std::string& name) {
  return fs::temp_directory_path() / ("freseg_cli_" + std::to_string(::getpid()) + "_" + name);
}

// One scripted run shared by the tests below.
class ScriptRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cli_ = new Cli(FRESEG_CLI, scratch("script"));
    write_script_inputs(*cli_);
    for (const auto& step : cli_script()) {
      const int code = cli_->run(step.args);
      if (code != 0) failures_ += step.args + " -> " + std::to_string(code) + ": " + cli_->last_stderr() + "\n";
    }
  }
  static void TearDownTestSuite() {
    fs::remove_all(cli_->dir());
    delete cli_;
  }

  static Cli* cli_;
  static std::string failures_;
};

Cli* ScriptRun::cli_ = nullptr;
std::string ScriptRun::failures_;

std::map<std::string, std::string> report_of(const std::string& path) {
  const auto kv = load_key_values(path);
  return {kv.begin(), kv.end()};
}

}  // namespace

TEST_F(ScriptRun, EverySubcommandSucceeds) { EXPECT_EQ(failures_, ""); }

TEST_F(ScriptRun, InverseRecoversPoints) {
  const auto pts = load_pointcloud(cli_->path("pts.txt"));
  const auto inv = load_pointcloud(cli_->path("inv.txt"));
  ASSERT_EQ(pts.size(), inv.size());
  EXPECT_LT(max_abs_diff(pts, inv), 1e-9);
}

TEST_F(ScriptRun, StagesComposeToPipeline) {
  EXPECT_EQ(Cli::read(cli_->path("pipe.raw")), Cli::read(cli_->path("remap.raw")));
  EXPECT_EQ(Cli::read(cli_->path("pipe.raw.meta")), Cli::read(cli_->path("remap.raw.meta")));
}

TEST_F(ScriptRun, EvaluateReportsSpineDice) {
  const auto r = report_of(cli_->path("eval.txt"));
  ASSERT_TRUE(r.count("dsc.2"));
  EXPECT_GE(std::stod(r.at("dsc.2")), 0.9);
  EXPECT_EQ(std::stod(r.at("dsc.0")), 1.0);
}

TEST_F(ScriptRun, SweepsContrast) {
  const auto rho = report_of(cli_->path("sweep_rho/summary.txt"));
  const auto z = report_of(cli_->path("sweep_z/summary.txt"));
  EXPECT_LT(std::stod(rho.at("dsc_spread")), 1e-6);
  EXPECT_GT(std::stod(z.at("dsc_spread")), 0.2);
  EXPECT_TRUE(fs::exists(cli_->path("sweep_rho/rotation_005.txt")));
  // rotation 0 is the identity
  EXPECT_NE(Cli::read(cli_->path("sweep_z/rotation_000.txt")).find("quaternion: 1 0 0 0"), std::string::npos);
}

TEST_F(ScriptRun, VoxelizedCubeVolume) {
  const auto vol = load_volume(cli_->path("cube.raw"));
  const auto inside = std::count(vol.data.begin(), vol.data.end(), VoxelLabel(1));
  EXPECT_NEAR(double(inside), 2000.0, 40.0);
}

TEST(ExitCodes, UsageErrorsAreOne) {
  Cli cli(FRESEG_CLI, scratch("usage"));
  EXPECT_EQ(cli.run(""), 1);
  EXPECT_EQ(cli.run("transform --bogus 1 --out x"), 1);
  EXPECT_EQ(cli.run("points --out x"), 1);
  EXPECT_EQ(cli.run("points --volume v.raw"), 1);
  EXPECT_EQ(cli.run("skeletonize --cloud c.txt --policy vein --out x"), 1);
  std::ofstream(cli.path("bad.cfg")) << "no_such_key: 3\n";
  std::ofstream(cli.path("c.txt")) << "0 0 0\n1 0 0\n";
  EXPECT_EQ(cli.run("skeletonize --cloud c.txt --config bad.cfg --out x.swc"), 1);
  EXPECT_NE(cli.last_stderr().find("no_such_key"), std::string::npos);
  EXPECT_EQ(cli.run("segment-baseline --cylindrical c.txt --overlap 1.5 --out x"), 1);
  EXPECT_EQ(cli.run("--help"), 0);
  fs::remove_all(cli.dir());
}

TEST(ExitCodes, DataErrorsAreTwo) {
  Cli cli(FRESEG_CLI, scratch("data"));
  EXPECT_EQ(cli.run("points --volume missing.raw --out x.txt"), 2);
  EXPECT_NE(cli.last_stderr().find("missing.raw"), std::string::npos);
  std::ofstream(cli.path("mixed.txt")) << "0 0 0\n1 1 1 1\n";
  EXPECT_EQ(cli.run("skeletonize --cloud mixed.txt --out x.swc"), 2);
  EXPECT_NE(cli.last_stderr().find("MixedArity"), std::string::npos) << cli.last_stderr();
  std::ofstream(cli.path("empty.txt")) << "";
  EXPECT_EQ(cli.run("skeletonize --cloud empty.txt --out x.swc"), 2);
  std::ofstream(cli.path("cyc.swc")) << "1 0 0 0 0 1 2\n2 0 1 0 0 1 1\n";
  std::ofstream(cli.path("c.txt")) << "0 0 0\n";
  EXPECT_EQ(cli.run("transform --cloud c.txt --skeleton cyc.swc --out x.txt"), 2);
  EXPECT_FALSE(fs::exists(cli.path("x.txt")));
  std::ofstream(cli.path("a.txt")) << "1\n0\n";
  std::ofstream(cli.path("b.txt")) << "1\n";
  EXPECT_EQ(cli.run("evaluate --pred a.txt --gt b.txt --out r.txt"), 2);
  fs::remove_all(cli.dir());
}

TEST(Flags, OverrideConfig) {
  Cli cli(FRESEG_CLI, scratch("flags"));
  std::ofstream(cli.path("t.cfg")) << "tube.spines: 2\ntube.length: 10\ntube.density: 5\nseed: 1\n";
  ASSERT_EQ(cli.run("synth --config t.cfg --out a.txt"), 0);
  ASSERT_EQ(cli.run("synth --config t.cfg --seed 1 --out b.txt"), 0);
  ASSERT_EQ(cli.run("synth --config t.cfg --seed 2 --out c.txt"), 0);
  EXPECT_EQ(Cli::read(cli.path("a.txt")), Cli::read(cli.path("b.txt")));
  EXPECT_NE(Cli::read(cli.path("a.txt")), Cli::read(cli.path("c.txt")));
  fs::remove_all(cli.dir());
}
