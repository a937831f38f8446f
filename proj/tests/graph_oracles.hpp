#pragma once

// Brute-force references for trunk selection and path covers on small
// random graphs.

#include <functional>
#include <set>

#include "freseg/skeletonize.hpp"

namespace freseg::test {

inline SkeletonGraph graph_from(std::vector<Point3> v, std::vector<Edge> e) {
  SkeletonGraph g;
  g.vertices = std::move(v);
  g.edges = std::move(e);
  g.normalize();
  return g;
}

inline SkeletonGraph random_tree(std::size_t n, Rng& rng) {
  std::vector<Point3> v;
  std::vector<Edge> e;
  for (std::size_t i = 0; i < n; ++i) {
    v.emplace_back(uniform(rng, 0, 10), uniform(rng, 0, 10), uniform(rng, 0, 10));
    if (i > 0) e.emplace_back(uniform_index(rng, i), i);
  }
  return graph_from(v, e);
}

// Independent DFS path between two vertices of a tree.
inline std::vector<std::size_t> tree_path(const SkeletonGraph& g, std::size_t a, std::size_t b) {
  const auto adj = g.adjacency();
  std::vector<std::size_t> path;
  std::function<bool(std::size_t, std::size_t)> dfs = [&](std::size_t u, std::size_t from) {
    path.push_back(u);
    if (u == b) return true;
    for (auto w : adj[u]) {
      if (w != from && dfs(w, u)) return true;
    }
    path.pop_back();
    return false;
  };
  dfs(a, a);
  return path;
}

inline std::vector<std::size_t> brute_force_trunk(const SkeletonGraph& g) {
  const auto adj = g.adjacency();
  std::vector<std::size_t> leaves;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    if (adj[i].size() == 1) leaves.push_back(i);
  }
  std::vector<std::size_t> best;
  std::size_t best_count = 0;
  double best_len = -1;
  for (std::size_t x = 0; x < leaves.size(); ++x) {
    for (std::size_t y = x + 1; y < leaves.size(); ++y) {
      const auto p = tree_path(g, leaves[x], leaves[y]);
      std::size_t count = 0;
      double len = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (i > 0) len += (g.vertices[p[i]] - g.vertices[p[i - 1]]).norm();
        if (i > 0 && i + 1 < p.size() && adj[p[i]].size() > 2) ++count;
      }
      if (best_len < 0 || count > best_count || (count == best_count && len > best_len)) {
        best = p;
        best_count = count;
        best_len = len;
      }
    }
  }
  return best;
}

inline std::multiset<Edge> path_edges(const std::vector<GraphPath>& paths) {
  std::multiset<Edge> out;
  for (const auto& p : paths) {
    for (std::size_t i = 0; i + 1 < p.vertex_ids.size(); ++i) {
      out.insert({std::min(p.vertex_ids[i], p.vertex_ids[i + 1]), std::max(p.vertex_ids[i], p.vertex_ids[i + 1])});
    }
  }
  return out;
}

// Random tree of 3 to 14 vertices plus up to three extra edges (cycles).
inline SkeletonGraph random_graph(Rng& rng) {
  auto g = random_tree(3 + uniform_index(rng, 12), rng);
  const std::size_t extra = uniform_index(rng, 4);
  for (std::size_t x = 0; x < extra; ++x) {
    const auto a = uniform_index(rng, g.vertices.size()), b = uniform_index(rng, g.vertices.size());
    if (a != b) g.add_edge(a, b);
  }
  g.normalize();
  return g;
}

// Every pruned edge appears in exactly one path, and every path is a simple
// walk along pruned edges.
inline bool covers_exactly_once(const SkeletonGraph& g, double min_len) {
  const auto pruned = prune_short_branches(g, min_len);
  const auto paths = cover_paths(g, min_len);
  if (path_edges(paths) != std::multiset<Edge>(pruned.edges.begin(), pruned.edges.end())) return false;
  const std::set<Edge> edge_set(pruned.edges.begin(), pruned.edges.end());
  for (const auto& p : paths) {
    if (std::set<std::size_t>(p.vertex_ids.begin(), p.vertex_ids.end()).size() != p.vertex_ids.size()) return false;
    for (std::size_t i = 0; i + 1 < p.vertex_ids.size(); ++i) {
      const Edge e{std::min(p.vertex_ids[i], p.vertex_ids[i + 1]), std::max(p.vertex_ids[i], p.vertex_ids[i + 1])};
      if (!edge_set.count(e)) return false;
    }
  }
  return true;
}

}  // namespace freseg::test
