#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace freseg {

/// Static 3-d tree for exact nearest-neighbor queries. Among equidistant
/// candidates the lowest input index wins, matching a linear scan that keeps
/// the first minimum.
class KdTree3 {
 public:
  KdTree3() = default;

  explicit KdTree3(std::span<const Eigen::Vector3d> points)
      : points_(points.begin(), points.end()), order_(points.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) build(0, order_.size());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  /// Index of the nearest point; requires a non-empty tree.
  std::size_t nearest(const Eigen::Vector3d& q) const {
    Best best;
    search(0, q, best, kNone);
    return best.index;
  }

  /// Nearest point other than `skip` (for nearest-neighbor spacing of the
  /// indexed set itself); requires at least two points.
  std::size_t nearest_other(std::size_t skip) const {
    Best best;
    search(0, points_[skip], best, skip);
    return best.index;
  }

  /// All indices within `radius` of q (inclusive), ascending.
  std::vector<std::size_t> within(const Eigen::Vector3d& q, double radius) const {
    std::vector<std::size_t> out;
    if (!nodes_.empty()) collect(0, q, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr std::size_t kLeafSize = 8;
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Node {
    std::size_t begin = 0, end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    std::size_t index = std::numeric_limits<std::size_t>::max();
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    Node& node = nodes_[id];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void search(std::size_t id, const Eigen::Vector3d& q, Best& best, std::size_t skip) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == skip) continue;
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 < best.d2 || (d2 == best.d2 && idx < best.index)) {
          best.d2 = d2;
          best.index = idx;
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t first = diff < 0.0 ? node.left : node.right;
    const std::size_t second = diff < 0.0 ? node.right : node.left;
    search(first, q, best, skip);
    // Points equal to the split value may sit on either side; visit ties too.
    if (diff * diff <= best.d2) search(second, q, best, skip);
  }

  void collect(std::size_t id, const Eigen::Vector3d& q, double r2, std::vector<std::size_t>& out) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    if (diff <= 0.0 || diff * diff <= r2) collect(node.left, q, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) collect(node.right, q, r2, out);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace freseg
