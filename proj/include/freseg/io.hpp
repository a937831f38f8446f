#pragma once

// File formats and volume/mesh conversion.
//
//   point cloud   text, one point per line: "x y z" or "x y z label"
//   cylindrical   text, "rho phi g vertex_index tangential_offset [label]"
//   SWC           "id type x y z radius parent", 1-based ids, parent -1 for roots
//   volume        raw little-endian uint8/uint16 labels, C-order (z fastest),
//                 plus a "<path>.meta" key:value sidecar (shape, dtype,
//                 voxel_size, origin)
//   OBJ           "v" and "f" records only
//
// Reals are written with 17 significant digits so text round-trips are exact.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "freseg/error.hpp"
#include "freseg/geometry.hpp"
#include "freseg/sampling.hpp"
#include "freseg/skeletonize.hpp"
#include "freseg/volume.hpp"

namespace freseg {

// ---------------------------------------------------------------------------
// text helpers

namespace text {

inline void append_real(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

inline std::string real(double v) {
  std::string s;
  append_real(s, v);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::string where(const std::string& path, std::size_t line) { return path + ":" + std::to_string(line); }

inline double parse_real(std::string_view tok, const std::string& path, std::size_t line) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto res = std::from_chars(tok.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw Error(ErrorKind::ParseError, where(path, line) + ": bad number '" + std::string(tok) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view tok, const std::string& path, std::size_t line) {
  Int v{};
  const char* begin = tok.data();
  if (!tok.empty() && tok.front() == '+') ++begin;
  const char* end = tok.data() + tok.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(ErrorKind::ParseError, where(path, line) + ": bad integer '" + std::string(tok) + "'");
  }
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

/// Calls fn(line_number, tokens) for every non-blank line not starting with '#'.
template <typename Fn>
void for_each_record(const std::string& content, Fn&& fn) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) nl = content.size();
    ++line_no;
    std::string_view line(content.data() + pos, nl - pos);
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = split(line);
    if (!toks.empty()) fn(line_no, toks);
    pos = nl + 1;
  }
}

}  // namespace text

// ---------------------------------------------------------------------------
// key:value files

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues parse_key_values(const std::string& content, const std::string& path) {
  KeyValues out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto toks = text::split(line);
    if (toks.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorKind::ParseError, text::where(path, line_no) + ": expected 'key: value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, colon));
    std::string value = trim(line.substr(colon + 1));
    if (key.empty()) throw Error(ErrorKind::ParseError, text::where(path, line_no) + ": empty key");
    if (!seen.insert(key).second) {
      throw Error(ErrorKind::ParseError, text::where(path, line_no) + ": duplicate key '" + key + "'");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

inline KeyValues load_key_values(const std::string& path) { return parse_key_values(text::read_file(path), path); }

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + ": " + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// point clouds

inline std::string format_pointcloud(const PointCloud& cloud) {
  cloud.validate();
  std::string out;
  out.reserve(cloud.size() * 64);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    text::append_real(out, p.x());
    out += ' ';
    text::append_real(out, p.y());
    out += ' ';
    text::append_real(out, p.z());
    if (cloud.labels) {
      out += ' ';
      out += std::to_string((*cloud.labels)[i]);
    }
    out += '\n';
  }
  return out;
}

inline PointCloud parse_pointcloud(const std::string& content, const std::string& path) {
  PointCloud cloud;
  std::vector<Label> labels;
  std::optional<std::size_t> arity;
  text::for_each_record(content, [&](std::size_t line, const std::vector<std::string_view>& t) {
    if (t.size() != 3 && t.size() != 4) {
      throw Error(ErrorKind::ParseError, text::where(path, line) + ": expected 3 or 4 columns, got " +
                                             std::to_string(t.size()));
    }
    if (arity && *arity != t.size()) {
      throw Error(ErrorKind::MixedArity, text::where(path, line) + ": " + std::to_string(t.size()) +
                                             " columns after " + std::to_string(*arity) + "-column lines");
    }
    arity = t.size();
    cloud.points.emplace_back(text::parse_real(t[0], path, line), text::parse_real(t[1], path, line),
                              text::parse_real(t[2], path, line));
    if (t.size() == 4) labels.push_back(text::parse_int<Label>(t[3], path, line));
  });
  if (arity == 4u) cloud.labels = std::move(labels);
  return cloud;
}

inline PointCloud load_pointcloud(const std::string& path) { return parse_pointcloud(text::read_file(path), path); }

inline void save_pointcloud(const std::string& path, const PointCloud& cloud) {
  text::write_file(path, format_pointcloud(cloud));
}

// ---------------------------------------------------------------------------
// per-point labels, one integer per line

inline std::vector<Label> load_labels(const std::string& path) {
  std::vector<Label> out;
  text::for_each_record(text::read_file(path), [&](std::size_t line, const std::vector<std::string_view>& t) {
    if (t.size() != 1) throw Error(ErrorKind::ParseError, text::where(path, line) + ": expected one label");
    out.push_back(text::parse_int<Label>(t[0], path, line));
  });
  return out;
}

inline void save_labels(const std::string& path, std::span<const Label> labels) {
  std::string out;
  for (auto l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  text::write_file(path, out);
}

// ---------------------------------------------------------------------------
// cylindrical clouds

inline std::string format_cylindrical(const CylindricalCloud& c) {
  std::string out;
  out.reserve(c.size() * 96);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& p = c.points[i];
    text::append_real(out, p.rho);
    out += ' ';
    text::append_real(out, p.phi);
    out += ' ';
    text::append_real(out, p.g);
    out += ' ';
    out += std::to_string(p.vertex_index);
    out += ' ';
    text::append_real(out, p.tangential_offset);
    if (c.labels) {
      out += ' ';
      out += std::to_string((*c.labels)[i]);
    }
    out += '\n';
  }
  return out;
}

inline CylindricalCloud load_cylindrical(const std::string& path) {
  CylindricalCloud c;
  std::vector<Label> labels;
  std::optional<std::size_t> arity;
  text::for_each_record(text::read_file(path), [&](std::size_t line, const std::vector<std::string_view>& t) {
    if (t.size() != 5 && t.size() != 6) {
      throw Error(ErrorKind::ParseError, text::where(path, line) + ": expected 5 or 6 columns");
    }
    if (arity && *arity != t.size()) throw Error(ErrorKind::MixedArity, text::where(path, line) + ": mixed arity");
    arity = t.size();
    CylindricalPoint p;
    p.rho = text::parse_real(t[0], path, line);
    p.phi = text::parse_real(t[1], path, line);
    p.g = text::parse_real(t[2], path, line);
    p.vertex_index = text::parse_int<std::size_t>(t[3], path, line);
    p.tangential_offset = text::parse_real(t[4], path, line);
    c.points.push_back(p);
    if (t.size() == 6) labels.push_back(text::parse_int<Label>(t[5], path, line));
  });
  if (arity == 6u) c.labels = std::move(labels);
  return c;
}

inline void save_cylindrical(const std::string& path, const CylindricalCloud& c) {
  text::write_file(path, format_cylindrical(c));
}

// ---------------------------------------------------------------------------
// framed skeletons: "path x y z cum_arc tx ty tz nx ny nz bx by bz"

inline void save_framed(const std::string& path, std::span<const FramedSkeleton> paths) {
  std::string out;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const auto& fs = paths[k];
    for (std::size_t i = 0; i < fs.skeleton.size(); ++i) {
      out += std::to_string(k);
      auto put = [&](const Vec3& v) {
        for (int a = 0; a < 3; ++a) {
          out += ' ';
          text::append_real(out, v[a]);
        }
      };
      put(fs.skeleton[i]);
      out += ' ';
      text::append_real(out, fs.skeleton.cum_arc()[i]);
      put(fs.frames[i].t);
      put(fs.frames[i].n);
      put(fs.frames[i].b);
      out += '\n';
    }
  }
  text::write_file(path, out);
}

/// Reads the polylines back; frames are recomputed by the caller (they are a
/// pure function of the vertices, so nothing is lost).
inline std::vector<Skeleton> load_framed(const std::string& path) {
  std::vector<std::vector<Point3>> groups;
  text::for_each_record(text::read_file(path), [&](std::size_t line, const std::vector<std::string_view>& t) {
    if (t.size() != 14) throw Error(ErrorKind::ParseError, text::where(path, line) + ": expected 14 columns");
    const auto k = text::parse_int<std::size_t>(t[0], path, line);
    if (k != groups.size() && k + 1 != groups.size()) {
      throw Error(ErrorKind::ParseError, text::where(path, line) + ": path ids must be consecutive");
    }
    if (k == groups.size()) groups.emplace_back();
    groups[k].emplace_back(text::parse_real(t[1], path, line), text::parse_real(t[2], path, line),
                           text::parse_real(t[3], path, line));
  });
  if (groups.empty()) throw Error(ErrorKind::DegenerateSkeleton, path + ": no skeleton vertices");
  std::vector<Skeleton> out;
  for (auto& g : groups) out.push_back(compute_arc_length(std::move(g)));
  return out;
}

// ---------------------------------------------------------------------------
// fragments: "fragment path start_vertex end_vertex g_lo g_hi count idx..."

inline void save_fragments(const std::string& path, std::span<const Fragment> fragments) {
  std::string out;
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    const auto& fr = fragments[f];
    out += std::to_string(f) + ' ' + std::to_string(fr.path) + ' ' + std::to_string(fr.skeleton_range.first) + ' ' +
           std::to_string(fr.skeleton_range.second) + ' ';
    text::append_real(out, fr.window.first);
    out += ' ';
    text::append_real(out, fr.window.second);
    out += ' ' + std::to_string(fr.point_indices.size());
    for (auto i : fr.point_indices) out += ' ' + std::to_string(i);
    out += '\n';
  }
  text::write_file(path, out);
}

inline std::vector<Fragment> load_fragments(const std::string& path) {
  std::vector<Fragment> out;
  text::for_each_record(text::read_file(path), [&](std::size_t line, const std::vector<std::string_view>& t) {
    if (t.size() < 7) throw Error(ErrorKind::ParseError, text::where(path, line) + ": short fragment record");
    Fragment f;
    f.path = text::parse_int<std::size_t>(t[1], path, line);
    f.skeleton_range = {text::parse_int<std::size_t>(t[2], path, line), text::parse_int<std::size_t>(t[3], path, line)};
    f.window = {text::parse_real(t[4], path, line), text::parse_real(t[5], path, line)};
    const auto n = text::parse_int<std::size_t>(t[6], path, line);
    if (t.size() != 7 + n) throw Error(ErrorKind::ParseError, text::where(path, line) + ": point count mismatch");
    for (std::size_t i = 0; i < n; ++i) f.point_indices.push_back(text::parse_int<std::size_t>(t[7 + i], path, line));
    out.push_back(std::move(f));
  });
  return out;
}

// ---------------------------------------------------------------------------
// SWC

inline SkeletonGraph parse_swc(const std::string& content, const std::string& path) {
  struct Row {
    long long id, parent;
    std::size_t line;
  };
  std::vector<Row> rows;
  SkeletonGraph g;
  std::map<long long, std::size_t> by_id;
  text::for_each_record(content, [&](std::size_t line, const std::vector<std::string_view>& t) {
    if (t.size() < 7) throw Error(ErrorKind::ParseError, text::where(path, line) + ": SWC rows need 7 columns");
    const auto id = text::parse_int<long long>(t[0], path, line);
    text::parse_int<long long>(t[1], path, line);
    const Point3 p(text::parse_real(t[2], path, line), text::parse_real(t[3], path, line),
                   text::parse_real(t[4], path, line));
    const double radius = text::parse_real(t[5], path, line);
    const auto parent = text::parse_int<long long>(t[6], path, line);
    if (id <= 0) throw Error(ErrorKind::ParseError, text::where(path, line) + ": ids must be positive");
    if (!by_id.emplace(id, g.vertices.size()).second) {
      throw Error(ErrorKind::ParseError, text::where(path, line) + ": duplicate id " + std::to_string(id));
    }
    g.vertices.push_back(p);
    g.radii.push_back(radius);
    rows.push_back({id, parent, line});
  });
  std::vector<std::size_t> parent_of(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].parent == -1) continue;
    const auto it = by_id.find(rows[i].parent);
    if (it == by_id.end()) {
      throw Error(ErrorKind::ParseError, text::where(path, rows[i].line) + ": unknown parent " +
                                             std::to_string(rows[i].parent));
    }
    if (it->second == i) {
      throw Error(ErrorKind::CyclicParentage, text::where(path, rows[i].line) + ": node is its own parent");
    }
    parent_of[i] = it->second;
  }
  // 0 = unvisited, 1 = on the current chain, 2 = known to reach a root
  std::vector<int> state(rows.size(), 0);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    std::vector<std::size_t> chain;
    std::size_t v = s;
    while (v < rows.size() && state[v] == 0) {
      state[v] = 1;
      chain.push_back(v);
      v = parent_of[v];
    }
    if (v < rows.size() && state[v] == 1) {
      throw Error(ErrorKind::CyclicParentage, text::where(path, rows[v].line) + ": parent links form a cycle");
    }
    for (auto c : chain) state[c] = 2;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (parent_of[i] < rows.size()) g.edges.emplace_back(i, parent_of[i]);
  }
  g.normalize();
  return g;
}

inline SkeletonGraph load_swc(const std::string& path) { return parse_swc(text::read_file(path), path); }

/// Rows are written in vertex order (id = index + 1). Parents come from a
/// traversal of each component rooted at its lowest index, so the graph must
/// be a forest. Missing radii are written as 0; the type column is 0
/// (undefined).
inline std::string format_swc(const SkeletonGraph& graph) {
  SkeletonGraph g = graph;
  g.normalize();
  const std::size_t n = g.vertices.size();
  const auto adj = g.adjacency();
  std::vector<long long> parent(n, -2);
  std::size_t tree_edges = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (parent[root] != -2) continue;
    parent[root] = -1;
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : adj[v]) {
        if (parent[w] != -2) continue;
        parent[w] = static_cast<long long>(v) + 1;
        ++tree_edges;
        stack.push_back(w);
      }
    }
  }
  if (tree_edges != g.edges.size()) {
    throw Error(ErrorKind::CyclicParentage, "graph has cycles; SWC can only store forests");
  }
  std::string out = "# id type x y z radius parent\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(i + 1) + " 0";
    for (int a = 0; a < 3; ++a) {
      out += ' ';
      text::append_real(out, g.vertices[i][a]);
    }
    out += ' ';
    text::append_real(out, g.radii.empty() ? 0.0 : g.radii[i]);
    out += ' ' + std::to_string(parent[i]) + '\n';
  }
  return out;
}

inline void save_swc(const std::string& path, const SkeletonGraph& g) { text::write_file(path, format_swc(g)); }

// ---------------------------------------------------------------------------
// volumes

inline std::string meta_path(const std::string& path) { return path + ".meta"; }

inline void save_volume(const std::string& path, const VolumeGrid& vol) {
  vol.validate();
  const VoxelLabel max_label = vol.data.empty() ? 0 : *std::max_element(vol.data.begin(), vol.data.end());
  const bool wide = max_label > 0xFF;
  std::string raw;
  raw.reserve(vol.data.size() * (wide ? 2 : 1));
  for (auto v : vol.data) {
    raw += static_cast<char>(v & 0xFF);
    if (wide) raw += static_cast<char>((v >> 8) & 0xFF);
  }
  text::write_file(path, raw);
  auto triple = [](const Vec3& v) { return text::real(v.x()) + " " + text::real(v.y()) + " " + text::real(v.z()); };
  KeyValues meta{{"shape", std::to_string(vol.shape[0]) + " " + std::to_string(vol.shape[1]) + " " +
                               std::to_string(vol.shape[2])},
                 {"dtype", wide ? "uint16" : "uint8"},
                 {"voxel_size", triple(vol.voxel_size)},
                 {"origin", triple(vol.origin)}};
  text::write_file(meta_path(path), format_key_values(meta));
}

inline VolumeGrid load_volume(const std::string& path) {
  const std::string mpath = meta_path(path);
  const auto kv = load_key_values(mpath);
  std::map<std::string, std::string> m(kv.begin(), kv.end());
  for (const auto& [k, v] : kv) {
    if (k != "shape" && k != "dtype" && k != "voxel_size" && k != "origin") {
      throw Error(ErrorKind::ParseError, mpath + ": unknown key '" + k + "'");
    }
  }
  for (const char* key : {"shape", "dtype", "voxel_size", "origin"}) {
    if (!m.count(key)) throw Error(ErrorKind::ParseError, mpath + ": missing key '" + std::string(key) + "'");
  }
  auto three = [&](const std::string& key) {
    const auto t = text::split(m[key]);
    if (t.size() != 3) throw Error(ErrorKind::ParseError, mpath + ": '" + key + "' needs 3 values");
    return t;
  };
  VolumeGrid vol;
  const auto s = three("shape");
  for (std::size_t a = 0; a < 3; ++a) vol.shape[a] = text::parse_int<std::size_t>(s[a], mpath, 0);
  const auto vs = three("voxel_size");
  const auto o = three("origin");
  for (int a = 0; a < 3; ++a) {
    vol.voxel_size[a] = text::parse_real(vs[static_cast<std::size_t>(a)], mpath, 0);
    vol.origin[a] = text::parse_real(o[static_cast<std::size_t>(a)], mpath, 0);
  }
  const std::string& dtype = m["dtype"];
  if (dtype != "uint8" && dtype != "uint16") throw Error(ErrorKind::ParseError, mpath + ": unsupported dtype " + dtype);
  const std::size_t width = dtype == "uint16" ? 2 : 1;
  const std::string raw = text::read_file(path);
  if (raw.size() != vol.voxel_count() * width) {
    throw Error(ErrorKind::ShapeMismatch, path + ": " + std::to_string(raw.size()) + " bytes, expected " +
                                              std::to_string(vol.voxel_count() * width));
  }
  vol.data.resize(vol.voxel_count());
  for (std::size_t i = 0; i < vol.data.size(); ++i) {
    const auto lo = static_cast<unsigned char>(raw[i * width]);
    const auto hi = width == 2 ? static_cast<unsigned char>(raw[i * width + 1]) : 0u;
    vol.data[i] = static_cast<VoxelLabel>(lo | (hi << 8));
  }
  vol.validate();
  return vol;
}

/// Voxel indexing: one point per foreground voxel at its center, in scan
/// order, labeled with the voxel label. An empty foreground set means every
/// nonzero label.
inline PointCloud volume_to_points(const VolumeGrid& vol, const std::set<Label>& foreground = {}) {
  vol.validate();
  PointCloud cloud;
  std::vector<Label> labels;
  for (std::size_t idx = 0; idx < vol.data.size(); ++idx) {
    const Label l = vol.data[idx];
    const bool keep = foreground.empty() ? l != 0 : foreground.count(l) > 0;
    if (!keep) continue;
    const auto [i, j, k] = vol.unravel(idx);
    cloud.points.push_back(vol.center(i, j, k));
    labels.push_back(l);
  }
  cloud.labels = std::move(labels);
  return cloud;
}

// ---------------------------------------------------------------------------
// meshes

struct TriMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::size_t, 3>> faces;

  void validate() const {
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const auto& t = faces[f];
      for (auto i : t) {
        if (i >= vertices.size()) throw Error(ErrorKind::IndexOutOfRange, "face " + std::to_string(f) + " index");
      }
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
        throw Error(ErrorKind::ParseError, "face " + std::to_string(f) + " repeats a vertex");
      }
    }
  }
};

inline TriMesh parse_obj(const std::string& content, const std::string& path) {
  TriMesh mesh;
  std::vector<std::pair<std::array<std::size_t, 3>, std::size_t>> pending;
  text::for_each_record(content, [&](std::size_t line, const std::vector<std::string_view>& t) {
    if (t[0] == "v") {
      if (t.size() < 4) throw Error(ErrorKind::ParseError, text::where(path, line) + ": vertex needs 3 coordinates");
      mesh.vertices.emplace_back(text::parse_real(t[1], path, line), text::parse_real(t[2], path, line),
                                 text::parse_real(t[3], path, line));
    } else if (t[0] == "f") {
      if (t.size() < 4) {
        throw Error(ErrorKind::NonPolygonalFace, text::where(path, line) + ": face with " +
                                                     std::to_string(t.size() - 1) + " vertices");
      }
      std::vector<std::size_t> idx;
      for (std::size_t i = 1; i < t.size(); ++i) {
        const auto slash = t[i].find('/');
        const auto head = t[i].substr(0, slash);
        const auto raw = text::parse_int<long long>(head, path, line);
        const auto count = static_cast<long long>(mesh.vertices.size());
        const long long resolved = raw < 0 ? count + raw : raw - 1;
        if (raw == 0 || resolved < 0) {
          throw Error(ErrorKind::ParseError, text::where(path, line) + ": bad vertex index " + std::string(head));
        }
        idx.push_back(static_cast<std::size_t>(resolved));
      }
      for (std::size_t i = 1; i + 1 < idx.size(); ++i) pending.push_back({{idx[0], idx[i], idx[i + 1]}, line});
    }
  });
  for (const auto& [face, line] : pending) {
    for (auto i : face) {
      if (i >= mesh.vertices.size()) {
        throw Error(ErrorKind::ParseError, text::where(path, line) + ": vertex index out of range");
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw Error(ErrorKind::ParseError, text::where(path, line) + ": degenerate face");
    }
    mesh.faces.push_back(face);
  }
  return mesh;
}

inline TriMesh load_obj(const std::string& path) { return parse_obj(text::read_file(path), path); }

inline void save_obj(const std::string& path, const TriMesh& mesh) {
  std::string out;
  for (const auto& v : mesh.vertices) out += "v " + text::real(v.x()) + " " + text::real(v.y()) + " " + text::real(v.z()) + "\n";
  for (const auto& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + " " + std::to_string(f[1] + 1) + " " + std::to_string(f[2] + 1) + "\n";
  }
  text::write_file(path, out);
}

struct WindingNumber {
  double value = 0.0;
  bool on_surface = false;  // query within 1e-12 of some face
};

namespace detail {

inline bool inside_triangle(const Point3& p, const Point3& a, const Point3& b, const Point3& c, double tol) {
  const Vec3 n = (b - a).cross(c - a);
  const double n2 = n.squaredNorm();
  if (n2 == 0.0) return false;
  const double u = (c - b).cross(p - b).dot(n) / n2;
  const double v = (a - c).cross(p - c).dot(n) / n2;
  const double w = 1.0 - u - v;
  return u >= -tol && v >= -tol && w >= -tol;
}

}  // namespace detail

/// Generalized winding number: total signed solid angle of the faces seen
/// from p, over 4*pi. Per-face solid angle uses the Van Oosterom-Strackee
/// formula.
inline WindingNumber winding_number(const Point3& p, const TriMesh& mesh) {
  WindingNumber w;
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]] - p;
    const Vec3 b = mesh.vertices[f[1]] - p;
    const Vec3 c = mesh.vertices[f[2]] - p;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double det = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(det, den);
    if (!w.on_surface) {
      const double area2 = (b - a).cross(c - a).norm();
      if (area2 > 0.0 && std::abs(det) / area2 <= 1e-12 &&
          detail::inside_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]], 1e-12)) {
        w.on_surface = true;
      }
    }
  }
  w.value = total / (4.0 * std::numbers::pi);
  return w;
}

/// Label 1 where the winding number at the voxel center exceeds `threshold`.
/// Voxels whose centers fall outside the mesh bounding box are background
/// without evaluation (the winding number of a closed mesh vanishes there).
inline VolumeGrid voxelize_mesh(const TriMesh& mesh, std::array<std::size_t, 3> shape, const Vec3& voxel_size,
                                const Point3& origin, double threshold = 0.5) {
  mesh.validate();
  VolumeGrid vol = VolumeGrid::zeros(shape, voxel_size, origin);
  if (mesh.vertices.empty()) return vol;
  Point3 lo = mesh.vertices.front(), hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  for (std::size_t i = 0; i < shape[0]; ++i) {
    for (std::size_t j = 0; j < shape[1]; ++j) {
      for (std::size_t k = 0; k < shape[2]; ++k) {
        const Point3 c = vol.center(i, j, k);
        if ((c.array() < lo.array()).any() || (c.array() > hi.array()).any()) continue;
        if (winding_number(c, mesh).value > threshold) vol.data[vol.index(i, j, k)] = 1;
      }
    }
  }
  return vol;
}

/// Grid of cubic voxels of side `resolution` covering the bounding box of
/// `points` with a one-voxel margin on every side.
inline VolumeGrid bounding_grid(std::span<const Point3> points, double resolution) {
  if (points.empty()) throw Error(ErrorKind::EmptyCloud, "no points to bound");
  if (!(resolution > 0.0)) throw Error(ErrorKind::ConfigError, "resolution must be positive");
  Point3 lo = points.front(), hi = lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::array<std::size_t, 3> shape{};
  for (int a = 0; a < 3; ++a) {
    shape[static_cast<std::size_t>(a)] = static_cast<std::size_t>(std::floor((hi[a] - lo[a]) / resolution)) + 3;
  }
  return VolumeGrid::zeros(shape, Vec3::Constant(resolution), lo - Vec3::Constant(resolution));
}

}  // namespace freseg
