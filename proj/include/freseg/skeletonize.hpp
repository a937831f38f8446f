#pragma once

// Curve skeletons: L1-median contraction of a point cloud into a skeleton
// graph, branch pruning, and extraction of sampling trajectories (single
// trunk path for dendrites, a path cover for vessel trees).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "freseg/error.hpp"
#include "freseg/geometry.hpp"
#include "freseg/kdtree.hpp"
#include "freseg/random.hpp"

namespace freseg {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected graph over skeleton vertices. Edges are stored normalized
/// (first < second), sorted and unique. `radii` is either empty or holds one
/// radius per vertex (carried through SWC files).
struct SkeletonGraph {
  std::vector<Point3> vertices;
  std::vector<Edge> edges;
  std::vector<double> radii;

  std::size_t vertex_count() const { return vertices.size(); }

  void add_edge(std::size_t a, std::size_t b) {
    if (a == b) throw Error(ErrorKind::IndexOutOfRange, "self-loop at vertex " + std::to_string(a));
    edges.emplace_back(std::min(a, b), std::max(a, b));
  }

  /// Sorts and deduplicates edges and checks indices.
  void normalize() {
    for (auto& e : edges) {
      if (e.first > e.second) std::swap(e.first, e.second);
      if (e.first == e.second) throw Error(ErrorKind::IndexOutOfRange, "self-loop");
      if (e.second >= vertices.size()) {
        throw Error(ErrorKind::IndexOutOfRange, "edge endpoint " + std::to_string(e.second));
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    if (!radii.empty() && radii.size() != vertices.size()) {
      throw Error(ErrorKind::LengthMismatch, "radii do not match vertices");
    }
  }

  double edge_length(const Edge& e) const { return (vertices[e.first] - vertices[e.second]).norm(); }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(vertices.size());
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
  }
};

/// A polyline as a chain graph.
inline SkeletonGraph chain_graph(const Skeleton& s) {
  SkeletonGraph g;
  g.vertices = s.vertices();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) g.edges.emplace_back(i, i + 1);
  return g;
}

struct SkeletonizeParams {
  std::size_t num_seeds = 32;
  double neighborhood_radius = 1.0;
  double repulsion_weight = 0.35;
  int max_iters = 100;
  double convergence_tol = 1e-4;
  double edge_radius = 2.0;

  void validate() const {
    if (num_seeds == 0 || !(neighborhood_radius > 0.0) || !(repulsion_weight >= 0.0) || max_iters <= 0 ||
        !(convergence_tol > 0.0) || !(edge_radius > 0.0)) {
      throw Error(ErrorKind::ConfigError, "invalid skeletonize parameters");
    }
  }
};

/// Median distance from a point to its nearest neighbor, estimated on at most
/// `max_probe` evenly strided points.
inline double median_nn_spacing(const PointCloud& cloud, std::size_t max_probe = 4096) {
  if (cloud.size() < 2) return 1.0;
  const KdTree3 tree(cloud.points);
  const std::size_t stride = std::max<std::size_t>(1, cloud.size() / max_probe);
  std::vector<double> d;
  for (std::size_t i = 0; i < cloud.size(); i += stride) {
    d.push_back((cloud.points[tree.nearest_other(i)] - cloud.points[i]).norm());
  }
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

/// Data-driven defaults: num_seeds = max(32, N/500), h = 20 x median
/// nearest-neighbor spacing, tol = 1e-4 h, edge radius = 2h.
inline SkeletonizeParams default_skeletonize_params(const PointCloud& cloud) {
  SkeletonizeParams p;
  p.num_seeds = std::min<std::size_t>(std::max<std::size_t>(32, cloud.size() / 500), std::max<std::size_t>(1, cloud.size()));
  p.neighborhood_radius = 2.0 * median_nn_spacing(cloud) * 10.0;
  p.convergence_tol = 1e-4 * p.neighborhood_radius;
  p.edge_radius = 2.0 * p.neighborhood_radius;
  return p;
}

struct SkeletonizeResult {
  SkeletonGraph graph;
  bool converged = false;
  int iterations = 0;
  double final_displacement = 0.0;
};

/// Farthest-point sampling; the first pick comes from the PRNG, later picks
/// break distance ties by lowest index.
inline std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t count, Rng& rng) {
  std::vector<std::size_t> picks;
  if (count == 0 || cloud.empty()) return picks;
  std::vector<double> dist(cloud.size(), std::numeric_limits<double>::infinity());
  std::size_t next = uniform_index(rng, cloud.size());
  while (picks.size() < count) {
    picks.push_back(next);
    const Point3 p = cloud.points[next];
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      dist[i] = std::min(dist[i], (cloud.points[i] - p).squaredNorm());
      if (dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    next = far;
  }
  return picks;
}

/// L1-median contraction. Each sample moves to the Weiszfeld step of the
/// local L1 median of the input points within radius h, plus mu times a
/// 1/r^2-weighted push away from neighboring samples. Stops when the largest
/// displacement drops below the tolerance; hitting max_iters is reported in
/// the result, not raised.
inline SkeletonizeResult l1_skeletonize(const PointCloud& cloud, const SkeletonizeParams& params, std::uint64_t seed) {
  params.validate();
  if (cloud.size() < params.num_seeds) {
    throw Error(ErrorKind::TooFewPoints, "cloud has " + std::to_string(cloud.size()) + " points, need " +
                                             std::to_string(params.num_seeds));
  }
  const double h = params.neighborhood_radius;
  const double tiny = 1e-12 * h;
  Rng rng(seed);
  const auto picks = farthest_point_sample(cloud, params.num_seeds, rng);
  std::vector<Point3> x;
  x.reserve(picks.size());
  for (auto i : picks) x.push_back(cloud.points[i]);

  const KdTree3 cloud_tree(cloud.points);
  SkeletonizeResult result;
  for (int iter = 0; iter < params.max_iters; ++iter) {
    const KdTree3 sample_tree(x);
    std::vector<Point3> next(x.size());
    double max_move = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      Point3 attract = x[k];
      double weight_sum = 0.0;
      Point3 acc = Point3::Zero();
      for (auto q : cloud_tree.within(x[k], h)) {
        // A point under the sample itself has no direction; Weiszfeld skips it.
        const double r = (cloud.points[q] - x[k]).norm();
        if (r <= tiny) continue;
        acc += cloud.points[q] / r;
        weight_sum += 1.0 / r;
      }
      if (weight_sum > 0.0) attract = acc / weight_sum;

      Point3 push = Point3::Zero();
      double push_sum = 0.0;
      for (auto o : sample_tree.within(x[k], h)) {
        if (o == k) continue;
        const Vec3 d = x[k] - x[o];
        const double r2 = std::max(d.squaredNorm(), tiny * tiny);
        push += d / r2;
        push_sum += 1.0 / r2;
      }
      next[k] = attract;
      if (push_sum > 0.0) next[k] += params.repulsion_weight * push / push_sum;
      max_move = std::max(max_move, (next[k] - x[k]).norm());
    }
    x = std::move(next);
    result.iterations = iter + 1;
    result.final_displacement = max_move;
    if (max_move < params.convergence_tol) {
      result.converged = true;
      break;
    }
  }

  // Collapse coincident samples so every edge has positive length.
  std::vector<Point3> kept;
  for (const auto& p : x) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Point3& q) { return (p - q).norm() <= 1e-9 * h; });
    if (!dup) kept.push_back(p);
  }
  SkeletonGraph g;
  g.vertices = kept;
  const KdTree3 kept_tree(kept);
  for (std::size_t a = 0; a < kept.size(); ++a) {
    for (auto b : kept_tree.within(kept[a], params.edge_radius)) {
      if (b > a && (kept[a] - kept[b]).norm() < params.edge_radius) g.edges.emplace_back(a, b);
    }
  }
  g.normalize();
  if (!g.edges.empty()) {
    std::vector<bool> used(g.vertices.size(), false);
    for (const auto& [a, b] : g.edges) used[a] = used[b] = true;
    std::vector<std::size_t> remap(g.vertices.size());
    SkeletonGraph compact;
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
      if (!used[i]) continue;
      remap[i] = compact.vertices.size();
      compact.vertices.push_back(g.vertices[i]);
    }
    for (const auto& [a, b] : g.edges) compact.edges.emplace_back(remap[a], remap[b]);
    compact.normalize();
    g = std::move(compact);
  }
  result.graph = std::move(g);
  return result;
}

namespace detail {

using Adjacency = std::vector<std::set<std::size_t>>;

inline Adjacency make_adjacency(const SkeletonGraph& g) {
  Adjacency adj(g.vertices.size());
  for (const auto& [a, b] : g.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  return adj;
}

inline std::vector<Edge> edges_of(const Adjacency& adj) {
  std::vector<Edge> out;
  for (std::size_t a = 0; a < adj.size(); ++a) {
    for (auto b : adj[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

struct LeafBranch {
  std::vector<std::size_t> vertices;  // leaf first, junction last
  double length = 0.0;
  bool reaches_junction = false;
};

inline LeafBranch walk_from_leaf(const SkeletonGraph& g, const Adjacency& adj, std::size_t leaf) {
  LeafBranch br;
  br.vertices.push_back(leaf);
  std::size_t prev = leaf, cur = *adj[leaf].begin();
  br.length += (g.vertices[leaf] - g.vertices[cur]).norm();
  br.vertices.push_back(cur);
  while (adj[cur].size() == 2) {
    const std::size_t nxt = *adj[cur].begin() == prev ? *adj[cur].rbegin() : *adj[cur].begin();
    br.length += (g.vertices[cur] - g.vertices[nxt]).norm();
    prev = cur;
    cur = nxt;
    br.vertices.push_back(cur);
  }
  br.reaches_junction = adj[cur].size() >= 3;
  return br;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

/// Kruskal over edges ordered by (length, endpoints). Dropping every edge
/// that closes a cycle removes, for each cycle, its longest edge.
inline std::pair<std::vector<Edge>, std::vector<Edge>> spanning_forest(const SkeletonGraph& g,
                                                                       const std::vector<Edge>& edges) {
  std::vector<std::pair<double, Edge>> order;
  order.reserve(edges.size());
  for (const auto& e : edges) order.emplace_back(g.edge_length(e), e);
  std::sort(order.begin(), order.end());
  DisjointSets ds(g.vertices.size());
  std::vector<Edge> tree, rest;
  for (const auto& [len, e] : order) {
    (ds.unite(e.first, e.second) ? tree : rest).push_back(e);
  }
  std::sort(tree.begin(), tree.end());
  std::sort(rest.begin(), rest.end());
  return {tree, rest};
}

inline std::vector<std::vector<std::size_t>> components(const Adjacency& adj) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> seen(adj.size(), false);
  for (std::size_t s = 0; s < adj.size(); ++s) {
    if (seen[s] || adj[s].empty()) continue;
    std::vector<std::size_t> comp;
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (auto w : adj[v]) {
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

// Parent pointers and path statistics of a traversal from `root` in a forest.
struct TreeWalk {
  std::vector<std::size_t> parent;
  std::vector<double> length;
  std::vector<std::size_t> high_degree;  // interior vertices of degree > 2 on root..v, excluding both ends
  std::vector<bool> reached;
};

inline TreeWalk walk_tree(const SkeletonGraph& g, const Adjacency& tree, std::size_t root) {
  const std::size_t n = tree.size();
  TreeWalk w{std::vector<std::size_t>(n, n), std::vector<double>(n, 0.0), std::vector<std::size_t>(n, 0),
             std::vector<bool>(n, false)};
  std::vector<std::size_t> stack{root};
  w.reached[root] = true;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto c : tree[v]) {
      if (w.reached[c]) continue;
      w.reached[c] = true;
      w.parent[c] = v;
      w.length[c] = w.length[v] + (g.vertices[v] - g.vertices[c]).norm();
      w.high_degree[c] = w.high_degree[v] + ((v != root && tree[v].size() > 2) ? 1 : 0);
      stack.push_back(c);
    }
  }
  return w;
}

inline std::vector<std::size_t> trace(const TreeWalk& w, std::size_t root, std::size_t end) {
  std::vector<std::size_t> path;
  for (std::size_t v = end; v != root; v = w.parent[v]) path.push_back(v);
  path.push_back(root);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace detail

/// A simple path of graph vertices together with its geometric skeleton.
struct GraphPath {
  std::vector<std::size_t> vertex_ids;
  Skeleton skeleton;
  std::vector<std::string> diagnostics;
};

inline GraphPath make_graph_path(const SkeletonGraph& g, std::vector<std::size_t> ids) {
  std::vector<Point3> pts;
  pts.reserve(ids.size());
  for (auto i : ids) pts.push_back(g.vertices[i]);
  return GraphPath{std::move(ids), compute_arc_length(std::move(pts)), {}};
}

/// Repeatedly removes the shortest leaf branch (leaf up to the first vertex of
/// degree >= 3) whose length is below min_len, until none is left. Bare paths
/// are never touched, so a non-empty graph keeps at least one path. Vertices
/// stay in place (indices are stable); pruned ones simply lose their edges.
inline SkeletonGraph prune_short_branches(const SkeletonGraph& g, double min_len) {
  SkeletonGraph out = g;
  out.normalize();
  if (!(min_len > 0.0)) return out;
  auto adj = detail::make_adjacency(out);
  while (true) {
    std::optional<detail::LeafBranch> victim;
    for (std::size_t v = 0; v < adj.size(); ++v) {
      if (adj[v].size() != 1) continue;
      auto br = detail::walk_from_leaf(out, adj, v);
      if (!br.reaches_junction || !(br.length < min_len)) continue;
      if (!victim || br.length < victim->length) victim = std::move(br);
    }
    if (!victim) break;
    for (std::size_t i = 0; i + 1 < victim->vertices.size(); ++i) {
      adj[victim->vertices[i]].erase(victim->vertices[i + 1]);
      adj[victim->vertices[i + 1]].erase(victim->vertices[i]);
    }
  }
  out.edges = detail::edges_of(adj);
  return out;
}

/// Trunk selection: among leaf-to-leaf paths of the minimum spanning tree of
/// the largest component, pick the one with the most interior vertices of
/// degree > 2; ties go to the longer path, then to the smallest (start, end)
/// leaf pair. The path runs from the lower leaf index to the higher one.
inline GraphPath select_dendrite_path(const SkeletonGraph& g) {
  SkeletonGraph norm = g;
  norm.normalize();
  const auto full_adj = detail::make_adjacency(norm);
  auto comps = detail::components(full_adj);
  if (comps.empty()) throw Error(ErrorKind::NoLeaves, "graph has no edges");
  std::vector<std::string> diag;
  std::size_t pick = 0;
  for (std::size_t c = 1; c < comps.size(); ++c) {
    if (comps[c].size() > comps[pick].size()) pick = c;
  }
  if (comps.size() > 1) {
    diag.push_back("graph has " + std::to_string(comps.size()) + " components; using the largest (" +
                   std::to_string(comps[pick].size()) + " vertices)");
  }
  const std::set<std::size_t> members(comps[pick].begin(), comps[pick].end());
  std::vector<Edge> comp_edges;
  for (const auto& e : norm.edges) {
    if (members.count(e.first)) comp_edges.push_back(e);
  }
  auto [tree_edges, cut] = detail::spanning_forest(norm, comp_edges);
  if (!cut.empty()) diag.push_back("broke " + std::to_string(cut.size()) + " cycle edge(s)");
  detail::Adjacency tree(norm.vertices.size());
  for (const auto& [a, b] : tree_edges) {
    tree[a].insert(b);
    tree[b].insert(a);
  }
  std::vector<std::size_t> leaves;
  for (auto v : comps[pick]) {
    if (tree[v].size() == 1) leaves.push_back(v);
  }
  if (leaves.size() < 2) throw Error(ErrorKind::NoLeaves, "component has no leaf pair");

  std::size_t best_a = 0, best_b = 0, best_count = 0;
  double best_len = -1.0;
  for (std::size_t ia = 0; ia < leaves.size(); ++ia) {
    const auto walk = detail::walk_tree(norm, tree, leaves[ia]);
    for (std::size_t ib = ia + 1; ib < leaves.size(); ++ib) {
      const auto b = leaves[ib];
      const std::size_t count = walk.high_degree[b];
      const double len = walk.length[b];
      // Leaves are visited in ascending order, so the first candidate found
      // at a given (count, length) already has the smallest index pair.
      if (best_len < 0.0 || count > best_count || (count == best_count && len > best_len)) {
        best_a = leaves[ia];
        best_b = b;
        best_count = count;
        best_len = len;
      }
    }
  }
  const auto walk = detail::walk_tree(norm, tree, best_a);
  GraphPath path = make_graph_path(norm, detail::trace(walk, best_a, best_b));
  path.diagnostics = std::move(diag);
  return path;
}

/// Path cover of the pruned graph. The spanning forest is consumed greedily
/// by its longest leaf-to-leaf path (ties: smallest endpoint pair) until no
/// edge is left; each cycle-closing edge the forest left out is then emitted
/// as its own two-vertex path, so every pruned edge is covered exactly once.
inline std::vector<GraphPath> cover_paths(const SkeletonGraph& g, double min_branch_len) {
  const SkeletonGraph pruned = prune_short_branches(g, min_branch_len);
  std::vector<GraphPath> out;
  if (pruned.edges.empty()) return out;
  auto [tree_edges, cut] = detail::spanning_forest(pruned, pruned.edges);
  detail::Adjacency forest(pruned.vertices.size());
  for (const auto& [a, b] : tree_edges) {
    forest[a].insert(b);
    forest[b].insert(a);
  }
  std::size_t remaining = tree_edges.size();
  while (remaining > 0) {
    std::size_t best_a = 0, best_b = 0;
    double best_len = -1.0;
    for (std::size_t a = 0; a < forest.size(); ++a) {
      if (forest[a].size() != 1) continue;
      const auto walk = detail::walk_tree(pruned, forest, a);
      for (std::size_t b = a + 1; b < forest.size(); ++b) {
        if (forest[b].size() != 1 || !walk.reached[b]) continue;
        if (walk.length[b] > best_len) {
          best_len = walk.length[b];
          best_a = a;
          best_b = b;
        }
      }
    }
    const auto walk = detail::walk_tree(pruned, forest, best_a);
    auto ids = detail::trace(walk, best_a, best_b);
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      forest[ids[i]].erase(ids[i + 1]);
      forest[ids[i + 1]].erase(ids[i]);
      --remaining;
    }
    out.push_back(make_graph_path(pruned, std::move(ids)));
  }
  for (const auto& [a, b] : cut) out.push_back(make_graph_path(pruned, {a, b}));
  return out;
}

/// Re-centers a path on the cloud it was extracted from. The path is resampled
/// at half the window w, then each vertex moves within its NB plane to the
/// trimmed centroid of the slab |(p - S_k) . t_k| <= 2w. Points farther than
/// 1.3x the median in-plane distance from the running center are dropped
/// before each re-estimate, so side protrusions do not pull the axis.
/// half_window <= 0 picks w as the median point-to-path distance.
inline Skeleton recenter_path(const Skeleton& path, std::span<const Point3> points, int rounds = 3,
                              double half_window = 0.0, double straightness_eps = kDefaultStraightnessEps) {
  if (points.empty() || rounds <= 0) return path;
  double w = half_window;
  if (!(w > 0.0)) {
    const KdTree3 index(path.vertices());
    std::vector<double> dist;
    dist.reserve(points.size());
    for (const auto& p : points) dist.push_back((p - path[index.nearest(p)]).norm());
    std::nth_element(dist.begin(), dist.begin() + dist.size() / 2, dist.end());
    w = dist[dist.size() / 2];
  }
  if (!(w > 0.0)) return path;
  const KdTree3 cloud_index(points);
  const double reach = 3.0 * w;

  Skeleton current = resample(path, 0.5 * w);
  std::vector<Vec3> offsets;
  std::vector<double> radii, sorted;
  for (int round = 0; round < rounds; ++round) {
    const FramedSkeleton fs = compute_tnb(smooth(current, 4), straightness_eps);
    std::vector<Point3> moved(current.size());
    for (std::size_t k = 0; k < current.size(); ++k) {
      const Vec3& t = fs.frames[k].t;
      offsets.clear();
      for (auto i : cloud_index.within(current[k], reach)) {
        const Vec3 u = points[i] - current[k];
        const double along = u.dot(t);
        if (std::abs(along) <= 2.0 * w) offsets.push_back(u - along * t);
      }
      Vec3 c = Vec3::Zero();
      for (int it = 0; it < 8 && !offsets.empty(); ++it) {
        radii.clear();
        for (const auto& o : offsets) radii.push_back((o - c).norm());
        sorted = radii;
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        const double keep = 1.3 * sorted[sorted.size() / 2];
        Vec3 sum = Vec3::Zero();
        std::size_t n = 0;
        for (std::size_t q = 0; q < offsets.size(); ++q) {
          if (radii[q] <= keep) {
            sum += offsets[q];
            ++n;
          }
        }
        if (n == 0) break;
        c = sum / static_cast<double>(n);
      }
      moved[k] = current[k] + c;
    }
    std::vector<Point3> kept;
    kept.reserve(moved.size());
    for (const auto& v : moved) {
      if (kept.empty() || (v - kept.back()).norm() > 1e-9) kept.push_back(v);
    }
    if (kept.size() < 2) break;
    current = resample(smooth(compute_arc_length(std::move(kept)), 2), 0.5 * w);
  }
  return current;
}

}  // namespace freseg
