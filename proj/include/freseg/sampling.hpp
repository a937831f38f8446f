#pragma once

// Fragmenting along the trajectory, fixed-size batching with ceil-up
// resampling, and majority-vote recombination of per-batch predictions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freseg/error.hpp"
#include "freseg/geometry.hpp"
#include "freseg/random.hpp"
#include "freseg/volume.hpp"

namespace freseg {

inline constexpr std::size_t kDefaultBatchSize = 30000;
inline constexpr double kDefaultOverlap = 0.25;

struct Fragment {
  std::vector<std::size_t> point_indices;
  std::pair<std::size_t, std::size_t> skeleton_range{0, 0};  // inclusive, global vertex indices
  std::pair<double, double> window{0.0, 0.0};
  std::size_t path = 0;
};

struct Batch {
  std::vector<std::size_t> point_indices;
  std::size_t source_fragment = 0;
};

/// Closed windows [k*s, k*s + window_len], s = window_len * (1 - overlap),
/// tiling [0, total length]. A point joins every window containing its g.
/// Only points whose vertex lies in [vertex_offset, vertex_offset + skeleton
/// size) are considered, which lets several paths share one cylindrical
/// cloud. Windows that receive no point are dropped.
inline std::vector<Fragment> fragment_cloud(const CylindricalCloud& ccloud, const Skeleton& skeleton, double window_len,
                                            double overlap_frac, std::size_t vertex_offset = 0, std::size_t path = 0) {
  if (!(window_len > 0.0) || !std::isfinite(window_len)) {
    throw Error(ErrorKind::BadWindow, "window length must be positive, got " + std::to_string(window_len));
  }
  if (!(overlap_frac >= 0.0 && overlap_frac < 1.0)) {
    throw Error(ErrorKind::BadWindow, "overlap must lie in [0, 1), got " + std::to_string(overlap_frac));
  }
  const double total = skeleton.total_length();
  const double stride = window_len * (1.0 - overlap_frac);
  std::size_t count = 1;
  if (window_len < total) count = static_cast<std::size_t>(std::ceil((total - window_len) / stride - 1e-9)) + 1;

  const auto& arc = skeleton.cum_arc();
  const std::size_t vend = vertex_offset + skeleton.size();
  std::vector<Fragment> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double lo = static_cast<double>(k) * stride;
    double hi = lo + window_len;
    if (k + 1 == count) hi = std::max(hi, total);
    Fragment f;
    f.window = {lo, hi};
    f.path = path;
    for (std::size_t i = 0; i < ccloud.size(); ++i) {
      const auto& c = ccloud.points[i];
      if (c.vertex_index < vertex_offset || c.vertex_index >= vend) continue;
      if (c.g >= lo && c.g <= hi) f.point_indices.push_back(i);
    }
    if (f.point_indices.empty()) continue;
    const auto first = std::lower_bound(arc.begin(), arc.end(), lo);
    const auto last = std::upper_bound(arc.begin(), arc.end(), hi);
    f.skeleton_range = {vertex_offset + static_cast<std::size_t>(first - arc.begin()),
                        vertex_offset + static_cast<std::size_t>(last - arc.begin()) - 1};
    out.push_back(std::move(f));
  }
  return out;
}

/// Consecutive chunks of batch_size points. A short final chunk is filled up
/// from the fragment's other points: without replacement (seeded shuffle)
/// until they run out, then with replacement. If the fragment is smaller
/// than one batch, its own points are the pool.
inline std::vector<Batch> make_batches(const Fragment& fragment, std::size_t batch_size, std::uint64_t seed,
                                       std::size_t fragment_id = 0) {
  if (batch_size == 0) throw Error(ErrorKind::BadWindow, "batch size must be positive");
  const auto& idx = fragment.point_indices;
  if (idx.empty()) throw Error(ErrorKind::EmptyFragment, "fragment " + std::to_string(fragment_id) + " is empty");
  std::vector<Batch> out;
  for (std::size_t begin = 0; begin < idx.size(); begin += batch_size) {
    const std::size_t end = std::min(idx.size(), begin + batch_size);
    out.push_back(Batch{std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                                 idx.begin() + static_cast<std::ptrdiff_t>(end)),
                        fragment_id});
  }
  Batch& last = out.back();
  if (last.point_indices.size() < batch_size) {
    const std::size_t last_begin = (out.size() - 1) * batch_size;
    std::vector<std::size_t> pool(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(last_begin));
    if (pool.empty()) pool = last.point_indices;
    Rng rng(seed);
    shuffle(pool, rng);
    const std::size_t need = batch_size - last.point_indices.size();
    for (std::size_t i = 0; i < need; ++i) {
      last.point_indices.push_back(i < pool.size() ? pool[i] : pool[uniform_index(rng, pool.size())]);
    }
  }
  return out;
}

/// Per-point label tallies.
class LabelVotes {
 public:
  explicit LabelVotes(std::size_t n_points) : tallies_(n_points) {}

  std::size_t size() const { return tallies_.size(); }

  void add(std::size_t point, Label label, std::size_t count = 1) {
    if (point >= tallies_.size()) throw Error(ErrorKind::IndexOutOfRange, "vote for point " + std::to_string(point));
    auto& t = tallies_[point];
    auto it = std::lower_bound(t.begin(), t.end(), label, [](const auto& e, Label l) { return e.first < l; });
    if (it != t.end() && it->first == label) {
      it->second += count;
    } else {
      t.insert(it, {label, count});
    }
  }

  std::size_t vote_count(std::size_t point) const {
    std::size_t n = 0;
    for (const auto& e : tallies_[point]) n += e.second;
    return n;
  }

  /// Most frequent label; tallies are sorted by label, so the first maximum
  /// is the smallest label among ties.
  std::optional<Label> winner(std::size_t point) const {
    const auto& t = tallies_[point];
    if (t.empty()) return std::nullopt;
    auto best = t.begin();
    for (auto it = t.begin(); it != t.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    return best->first;
  }

 private:
  std::vector<std::vector<std::pair<Label, std::size_t>>> tallies_;
};

inline std::vector<Label> majority_vote(const LabelVotes& votes) {
  std::vector<Label> out(votes.size());
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const auto w = votes.winner(i);
    if (!w) throw Error(ErrorKind::MissingVotes, "point " + std::to_string(i) + " has no votes");
    out[i] = *w;
  }
  return out;
}

/// Accumulates every batch's prediction per cloud point and resolves by
/// majority vote.
inline std::vector<Label> assemble_prediction(std::size_t n_points, std::span<const Batch> batches,
                                              std::span<const std::vector<Label>> batch_labels) {
  if (batches.size() != batch_labels.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(batches.size()) + " batches but " +
                                               std::to_string(batch_labels.size()) + " label sequences");
  }
  LabelVotes votes(n_points);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& idx = batches[b].point_indices;
    if (idx.size() != batch_labels[b].size()) {
      throw Error(ErrorKind::LengthMismatch, "batch " + std::to_string(b) + " label count mismatch");
    }
    for (std::size_t i = 0; i < idx.size(); ++i) votes.add(idx[i], batch_labels[b][i]);
  }
  for (std::size_t i = 0; i < n_points; ++i) {
    if (votes.vote_count(i) == 0) throw Error(ErrorKind::UncoveredPoint, "point " + std::to_string(i) + " is in no batch");
  }
  return majority_vote(votes);
}

/// Scatters per-point labels into a volume with the geometry of `grid`;
/// voxels hit by several points take the majority label, untouched voxels
/// are 0.
inline VolumeGrid remap_to_volume(const PointCloud& cloud, std::span<const Label> labels, const VolumeGrid& grid) {
  if (labels.size() != cloud.size()) throw Error(ErrorKind::LengthMismatch, "labels do not match points");
  VolumeGrid out = VolumeGrid::zeros(grid.shape, grid.voxel_size, grid.origin);
  std::vector<std::pair<std::size_t, Label>> hits;
  hits.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto v = out.locate(cloud.points[i]);
    if (!v) throw Error(ErrorKind::OutOfGrid, "point " + std::to_string(i) + " lies outside the grid");
    if (labels[i] > 0xFFFF) throw Error(ErrorKind::OutOfGrid, "label " + std::to_string(labels[i]) + " exceeds 16 bits");
    hits.emplace_back(*v, labels[i]);
  }
  std::sort(hits.begin(), hits.end());
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    Label best = hits[i].second;
    std::size_t best_count = 0;
    while (j < hits.size() && hits[j].first == hits[i].first) {
      std::size_t r = j;
      while (r < hits.size() && hits[r].first == hits[j].first && hits[r].second == hits[j].second) ++r;
      if (r - j > best_count) {
        best_count = r - j;
        best = hits[j].second;
      }
      j = r;
    }
    out.data[hits[i].first] = static_cast<VoxelLabel>(best);
    i = j;
  }
  return out;
}

}  // namespace freseg
