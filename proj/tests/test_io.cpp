#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "freseg/io.hpp"
#include "support.hpp"

using namespace freseg;
using namespace freseg::test;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() : dir_(fs::temp_directory_path() / ("freseg_io_" + std::to_string(::getpid()))) {
    fs::create_directories(dir_);
  }
  ~TempDir() { fs::remove_all(dir_); }
  std::string file(const std::string& name) const { return (dir_ / name).string(); }

 private:
  fs::path dir_;
};

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

template <typename F>
Error caught(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorKind::IoError, "none");
}

}  // namespace

TEST(PointCloudIo, RoundTripExact) {
  TempDir tmp;
  Rng rng(1);
  PointCloud c;
  std::vector<Label> labels;
  for (int i = 0; i < 500; ++i) {
    c.points.emplace_back(uniform(rng, -1e3, 1e3), 1e-7 * standard_normal(rng), std::ldexp(uniform01(rng), -40));
    labels.push_back(static_cast<Label>(uniform_index(rng, 5)));
  }
  save_pointcloud(tmp.file("a.txt"), c);
  const auto back = load_pointcloud(tmp.file("a.txt"));
  EXPECT_EQ(back.points, c.points);
  EXPECT_FALSE(back.labels);

  c.labels = labels;
  save_pointcloud(tmp.file("b.txt"), c);
  const auto lb = load_pointcloud(tmp.file("b.txt"));
  EXPECT_EQ(lb.points, c.points);
  ASSERT_TRUE(lb.labels);
  EXPECT_EQ(*lb.labels, labels);
}

TEST(PointCloudIo, ArityAndLineNumbers) {
  TempDir tmp;
  write(tmp.file("mixed.txt"), "0 0 0\n1 1 1 2\n");
  EXPECT_EQ(caught([&] { load_pointcloud(tmp.file("mixed.txt")); }).kind(), ErrorKind::MixedArity);
  write(tmp.file("bad.txt"), "# header\n0 0 0\n\n1 x 1\n");
  const auto e = caught([&] { load_pointcloud(tmp.file("bad.txt")); });
  EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  EXPECT_NE(std::string(e.what()).find(":4"), std::string::npos) << e.what();
  write(tmp.file("empty.txt"), "");
  EXPECT_EQ(load_pointcloud(tmp.file("empty.txt")).size(), 0u);
  EXPECT_EQ(caught([&] { load_pointcloud(tmp.file("missing.txt")); }).kind(), ErrorKind::IoError);
}

TEST(LabelsIo, RoundTrip) {
  TempDir tmp;
  const std::vector<Label> l{0, 1, 2, 65535, 7};
  save_labels(tmp.file("l.txt"), l);
  EXPECT_EQ(load_labels(tmp.file("l.txt")), l);
}

TEST(CylindricalIo, RoundTrip) {
  TempDir tmp;
  Rng rng(2);
  CylindricalCloud c;
  for (int i = 0; i < 100; ++i) {
    c.points.push_back({uniform01(rng), uniform(rng, 0, 6.28), uniform(rng, 0, 50), uniform_index(rng, 99),
                        uniform(rng, -1, 1)});
  }
  save_cylindrical(tmp.file("c.txt"), c);
  const auto back = load_cylindrical(tmp.file("c.txt"));
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back.points[i].rho, c.points[i].rho);
    EXPECT_EQ(back.points[i].phi, c.points[i].phi);
    EXPECT_EQ(back.points[i].g, c.points[i].g);
    EXPECT_EQ(back.points[i].vertex_index, c.points[i].vertex_index);
    EXPECT_EQ(back.points[i].tangential_offset, c.points[i].tangential_offset);
  }
  EXPECT_FALSE(back.labels);
}

TEST(SwcIo, ChainAndRoundTrip) {
  TempDir tmp;
  write(tmp.file("chain.swc"), "# comment\n1 1 0 0 0 0.5 -1\n2 1 1 0 0 0.6 1\n3 1 2 0 0 0.7 2\n");
  const auto g = load_swc(tmp.file("chain.swc"));
  ASSERT_EQ(g.vertices.size(), 3u);
  EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
  EXPECT_EQ(g.radii, (std::vector<double>{0.5, 0.6, 0.7}));

  Rng rng(3);
  SkeletonGraph t;
  for (std::size_t i = 0; i < 40; ++i) {
    t.vertices.emplace_back(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    t.radii.push_back(uniform01(rng));
    if (i > 0 && i != 20) t.add_edge(uniform_index(rng, i), i);
  }
  t.normalize();
  save_swc(tmp.file("t.swc"), t);
  const auto back = load_swc(tmp.file("t.swc"));
  EXPECT_EQ(back.vertices, t.vertices);
  EXPECT_EQ(back.edges, t.edges);
  EXPECT_EQ(back.radii, t.radii);
}

TEST(SwcIo, Errors) {
  TempDir tmp;
  write(tmp.file("unknown.swc"), "1 1 0 0 0 1 -1\n2 1 0 0 1 1 9\n");
  const auto e = caught([&] { load_swc(tmp.file("unknown.swc")); });
  EXPECT_EQ(e.kind(), ErrorKind::ParseError);
  EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  write(tmp.file("cycle.swc"), "1 1 0 0 0 1 3\n2 1 0 0 1 1 1\n3 1 0 0 2 1 2\n");
  EXPECT_EQ(caught([&] { load_swc(tmp.file("cycle.swc")); }).kind(), ErrorKind::CyclicParentage);
  write(tmp.file("self.swc"), "1 1 0 0 0 1 1\n");
  EXPECT_EQ(caught([&] { load_swc(tmp.file("self.swc")); }).kind(), ErrorKind::CyclicParentage);
  write(tmp.file("short.swc"), "1 1 0 0 0 1\n");
  EXPECT_EQ(caught([&] { load_swc(tmp.file("short.swc")); }).kind(), ErrorKind::ParseError);
}

TEST(VolumeIo, RoundTrip8And16Bit) {
  TempDir tmp;
  Rng rng(4);
  auto v8 = VolumeGrid::zeros({3, 4, 5}, Vec3(0.5, 0.25, 2), Point3(-1, 0.1, 7));
  for (auto& x : v8.data) x = static_cast<VoxelLabel>(uniform_index(rng, 256));
  save_volume(tmp.file("v8.raw"), v8);
  EXPECT_EQ(fs::file_size(tmp.file("v8.raw")), 60u);
  const auto b8 = load_volume(tmp.file("v8.raw"));
  EXPECT_EQ(b8.shape, v8.shape);
  EXPECT_EQ(b8.voxel_size, v8.voxel_size);
  EXPECT_EQ(b8.origin, v8.origin);
  EXPECT_EQ(b8.data, v8.data);

  auto v16 = v8;
  v16.data[7] = 300;
  v16.data[59] = 65535;
  save_volume(tmp.file("v16.raw"), v16);
  EXPECT_EQ(fs::file_size(tmp.file("v16.raw")), 120u);
  EXPECT_EQ(load_volume(tmp.file("v16.raw")).data, v16.data);
}

TEST(VolumeIo, TruncatedAndBadMeta) {
  TempDir tmp;
  const auto v = VolumeGrid::zeros({2, 2, 2}, Vec3::Ones(), Point3::Zero());
  save_volume(tmp.file("v.raw"), v);
  write(tmp.file("v.raw"), std::string(7, '\0'));
  EXPECT_EQ(caught([&] { load_volume(tmp.file("v.raw")); }).kind(), ErrorKind::ShapeMismatch);
  save_volume(tmp.file("w.raw"), v);
  write(tmp.file("w.raw.meta"), "shape: 2 2\ndtype: uint8\nvoxel_size: 1 1 1\norigin: 0 0 0\n");
  EXPECT_EQ(caught([&] { load_volume(tmp.file("w.raw")); }).kind(), ErrorKind::ParseError);
}

TEST(VoxelIndexing, Examples) {
  auto one = VolumeGrid::zeros({1, 1, 1}, Vec3::Ones(), Point3::Zero());
  one.data[0] = 1;
  const auto c = volume_to_points(one);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.points[0], Point3(0.5, 0.5, 0.5));
  EXPECT_EQ(*c.labels, std::vector<Label>{1});

  EXPECT_EQ(volume_to_points(VolumeGrid::zeros({3, 3, 3}, Vec3::Ones(), Point3::Zero())).size(), 0u);

  auto two = VolumeGrid::zeros({2, 1, 1}, Vec3::Ones(), Point3::Zero());
  two.data = {1, 2};
  const auto fg = volume_to_points(two, {2});
  ASSERT_EQ(fg.size(), 1u);
  EXPECT_EQ(fg.points[0], Point3(1.5, 0.5, 0.5));

  // z varies fastest
  auto row = VolumeGrid::zeros({1, 1, 3}, Vec3(1, 1, 2), Point3(0, 0, 10));
  row.data = {1, 1, 1};
  const auto r = volume_to_points(row);
  EXPECT_EQ(r.points[2], Point3(0.5, 0.5, 15.0));
}

TEST(ObjIo, CubeQuadAndSlashForms) {
  TempDir tmp;
  save_obj(tmp.file("cube.obj"), box_mesh(Point3::Zero(), Point3::Ones()));
  const auto cube = load_obj(tmp.file("cube.obj"));
  EXPECT_EQ(cube.vertices.size(), 8u);
  EXPECT_EQ(cube.faces.size(), 12u);

  write(tmp.file("quad.obj"), "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/2/1 3//1 4\n");
  const auto quad = load_obj(tmp.file("quad.obj"));
  ASSERT_EQ(quad.faces.size(), 2u);
  EXPECT_EQ(quad.faces[0], (std::array<std::size_t, 3>{0, 1, 2}));
  EXPECT_EQ(quad.faces[1], (std::array<std::size_t, 3>{0, 2, 3}));

  write(tmp.file("neg.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
  EXPECT_EQ(load_obj(tmp.file("neg.obj")).faces[0], (std::array<std::size_t, 3>{0, 1, 2}));

  write(tmp.file("line.obj"), "v 0 0 0\nv 1 0 0\nf 1 2\n");
  EXPECT_EQ(caught([&] { load_obj(tmp.file("line.obj")); }).kind(), ErrorKind::NonPolygonalFace);
  write(tmp.file("range.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
  EXPECT_EQ(caught([&] { load_obj(tmp.file("range.obj")); }).kind(), ErrorKind::ParseError);
}

TEST(Winding, CubeCenterAndFarPoint) {
  const auto cube = box_mesh(Point3::Zero(), Point3::Ones());
  EXPECT_NEAR(winding_number(Point3(0.5, 0.5, 0.5), cube).value, 1.0, 1e-6);
  EXPECT_NEAR(winding_number(Point3(10, 10, 10), cube).value, 0.0, 1e-6);
  EXPECT_TRUE(winding_number(Point3(0.5, 0.5, 0.0), cube).on_surface);
  EXPECT_FALSE(winding_number(Point3(0.5, 0.5, 0.5), cube).on_surface);
}

TEST(Winding, AgreesWithRayParity) {
  Rng rng(6);
  for (const auto& mesh : {box_mesh(Point3(-1, -0.5, 0), Point3(1, 0.7, 0.9)), sphere_mesh(Point3(0.1, 0, -0.2), 1.0, 16, 24)}) {
    std::size_t agree = 0;
    const std::size_t n = 4000;
    for (std::size_t i = 0; i < n; ++i) {
      const Point3 p(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5));
      agree += (winding_number(p, mesh).value > 0.5) == ray_parity_inside(p, mesh);
    }
    EXPECT_GE(double(agree) / double(n), 0.999);
  }
}

TEST(Voxelize, UnitCubeVolume) {
  const auto cube = box_mesh(Point3::Zero(), Point3::Ones());
  const auto vol = voxelize_mesh(cube, {20, 20, 20}, Vec3::Constant(0.1), Point3::Constant(-0.5));
  const auto inside = std::count(vol.data.begin(), vol.data.end(), VoxelLabel(1));
  EXPECT_NEAR(double(inside), 1000.0, 20.0);
  const auto loose = voxelize_mesh(cube, {20, 20, 20}, Vec3::Constant(0.1), Point3::Constant(-0.5), 0.499);
  EXPECT_EQ(loose.data, vol.data);
  const auto away = voxelize_mesh(cube, {5, 5, 5}, Vec3::Constant(0.1), Point3::Constant(5.0));
  EXPECT_EQ(std::count(away.data.begin(), away.data.end(), VoxelLabel(0)), 125);
}

TEST(Voxelize, BoundingGridHasMargin) {
  const std::vector<Point3> pts{Point3(0, 0, 0), Point3(1, 2, 3)};
  const auto g = bounding_grid(pts, 0.5);
  for (const auto& p : pts) {
    const auto v = g.locate(p);
    ASSERT_TRUE(v);
    const auto [i, j, k] = g.unravel(*v);
    EXPECT_GE(std::min({i, j, k}), 1u);
    EXPECT_LT(i + 1, g.shape[0]);
    EXPECT_LT(j + 1, g.shape[1]);
    EXPECT_LT(k + 1, g.shape[2]);
  }
}

TEST(KeyValuesIo, DuplicatesAndComments) {
  EXPECT_EQ(parse_key_values("a: 1\n# c\nb : two words \n", "x").size(), 2u);
  EXPECT_EQ(parse_key_values("a: 1\n", "x")[0], std::make_pair(std::string("a"), std::string("1")));
  EXPECT_EQ(caught([] { parse_key_values("a: 1\na: 2\n", "x"); }).kind(), ErrorKind::ParseError);
  EXPECT_EQ(caught([] { parse_key_values("novalue\n", "x"); }).kind(), ErrorKind::ParseError);
}

TEST(FramedIo, RoundTripVertices) {
  TempDir tmp;
  const std::vector<FramedSkeleton> paths{compute_tnb(helix_skeleton(2, 0.5, 0, 6, 40)), compute_tnb(line_skeleton(3, 4))};
  save_framed(tmp.file("f.txt"), paths);
  const auto back = load_framed(tmp.file("f.txt"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].vertices(), paths[0].skeleton.vertices());
  EXPECT_EQ(back[1].vertices(), paths[1].skeleton.vertices());
  write(tmp.file("gap.txt"), "");
  EXPECT_EQ(caught([&] { load_framed(tmp.file("gap.txt")); }).kind(), ErrorKind::DegenerateSkeleton);
}

TEST(FragmentIo, RoundTrip) {
  TempDir tmp;
  std::vector<Fragment> f(2);
  f[0].point_indices = {0, 4, 9};
  f[0].skeleton_range = {0, 3};
  f[0].window = {0.0, 2.5};
  f[1].point_indices = {9, 12};
  f[1].skeleton_range = {3, 7};
  f[1].window = {1.875, 4.375};
  f[1].path = 1;
  save_fragments(tmp.file("fr.txt"), f);
  const auto back = load_fragments(tmp.file("fr.txt"));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].point_indices, f[i].point_indices);
    EXPECT_EQ(back[i].skeleton_range, f[i].skeleton_range);
    EXPECT_EQ(back[i].window, f[i].window);
    EXPECT_EQ(back[i].path, f[i].path);
  }
}
