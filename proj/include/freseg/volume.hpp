#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "freseg/error.hpp"
#include "freseg/geometry.hpp"

namespace freseg {

using VoxelLabel = std::uint16_t;

/// Dense label volume. Linear index is C-order with z fastest:
/// ((i * ny) + j) * nz + k. Voxel (i, j, k) covers
/// [origin + (i, j, k) * voxel_size, origin + (i+1, j+1, k+1) * voxel_size).
struct VolumeGrid {
  std::array<std::size_t, 3> shape{0, 0, 0};
  Vec3 voxel_size = Vec3::Ones();
  Point3 origin = Point3::Zero();
  std::vector<VoxelLabel> data;

  static VolumeGrid zeros(std::array<std::size_t, 3> shape, Vec3 voxel_size, Point3 origin) {
    VolumeGrid g{shape, voxel_size, origin, {}};
    g.data.assign(g.voxel_count(), 0);
    return g;
  }

  std::size_t voxel_count() const { return shape[0] * shape[1] * shape[2]; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * shape[1] + j) * shape[2] + k; }

  std::array<std::size_t, 3> unravel(std::size_t idx) const {
    const std::size_t k = idx % shape[2];
    const std::size_t j = (idx / shape[2]) % shape[1];
    const std::size_t i = idx / (shape[1] * shape[2]);
    return {i, j, k};
  }

  Point3 center(std::size_t i, std::size_t j, std::size_t k) const {
    return origin + Vec3((static_cast<double>(i) + 0.5) * voxel_size.x(), (static_cast<double>(j) + 0.5) * voxel_size.y(),
                         (static_cast<double>(k) + 0.5) * voxel_size.z());
  }

  /// Linear index of the voxel containing p, if inside the grid.
  std::optional<std::size_t> locate(const Point3& p) const {
    std::array<std::size_t, 3> ijk{};
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - origin[a]) / voxel_size[a]);
      if (!(f >= 0.0) || f >= static_cast<double>(shape[static_cast<std::size_t>(a)])) return std::nullopt;
      ijk[static_cast<std::size_t>(a)] = static_cast<std::size_t>(f);
    }
    return index(ijk[0], ijk[1], ijk[2]);
  }

  void validate() const {
    if (shape[0] == 0 || shape[1] == 0 || shape[2] == 0) throw Error(ErrorKind::ShapeMismatch, "zero-sized grid");
    if (!(voxel_size.minCoeff() > 0.0) || !voxel_size.allFinite() || !origin.allFinite()) {
      throw Error(ErrorKind::ShapeMismatch, "voxel size must be positive and finite");
    }
    if (data.size() != voxel_count()) {
      throw Error(ErrorKind::ShapeMismatch, "data length " + std::to_string(data.size()) + " != " +
                                                std::to_string(voxel_count()));
    }
  }
};

}  // namespace freseg
