#pragma once

#include "fbnr/geometry.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

namespace fbnr {

struct Face {
  std::vector<int> vertex_indices;
  Vec3 unit_normal = Vec3::Zero();
  double area = 0.0;
  Vec3 centroid = Vec3::Zero();
};

struct FaceRef {
  int face = -1;
  int omega = 1;  // +1 if unit_normal points out of the cell
};

struct Cell {
  std::vector<FaceRef> face_refs;
  double volume = 0.0;
  Vec3 centroid = Vec3::Zero();
  std::vector<int> vertex_indices;  // sorted, unique
};

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();
  double volume() const { return (hi - lo).prod(); }
};

enum class StencilKind { face, edge, vertex };

inline const char* to_string(StencilKind k) {
  switch (k) {
    case StencilKind::face: return "face";
    case StencilKind::edge: return "edge";
    case StencilKind::vertex: return "vertex";
  }
  return "?";
}

inline StencilKind stencil_kind_from_string(const std::string& s) {
  if (s == "face") return StencilKind::face;
  if (s == "edge") return StencilKind::edge;
  if (s == "vertex") return StencilKind::vertex;
  throw std::invalid_argument("unknown stencil kind: " + s);
}

struct Stencil {
  int center = -1;
  std::vector<int> members;  // center first, rest ascending
  StencilKind kind = StencilKind::face;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable unstructured polyhedral mesh with shared faces.
class Mesh {
 public:
  Mesh() = default;

  /// Builds a mesh from per-cell face loops (outward, counter-clockwise).
  /// Faces with the same vertex set are merged; the first cell to reference
  /// a face owns it.
  Mesh(std::vector<Vec3> vertices, const std::vector<std::vector<std::vector<int>>>& cell_loops,
       Box bounds)
      : vertices_(std::move(vertices)), bounds_(bounds) {
    struct KeyHash {
      std::size_t operator()(const std::vector<int>& k) const {
        std::uint64_t h = 1469598103934665603ull;
        for (int v : k) {
          h ^= static_cast<std::uint64_t>(v);
          h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
      }
    };
    std::unordered_map<std::vector<int>, int, KeyHash> lookup;
    lookup.reserve(cell_loops.size() * 4);
    cells_.resize(cell_loops.size());
    for (std::size_t c = 0; c < cell_loops.size(); ++c) {
      for (const auto& loop : cell_loops[c]) {
        for (int v : loop)
          if (v < 0 || static_cast<std::size_t>(v) >= vertices_.size())
            throw MeshError("face vertex index out of range");
        std::vector<int> key = loop;
        std::sort(key.begin(), key.end());
        auto [it, inserted] = lookup.try_emplace(std::move(key), static_cast<int>(faces_.size()));
        if (inserted) {
          faces_.push_back(make_face(loop));
          face_cells_.push_back({static_cast<int>(c), -1});
          cells_[c].face_refs.push_back({it->second, 1});
        } else {
          auto& fc = face_cells_[it->second];
          if (fc[1] != -1) throw MeshError("face referenced by more than two cells");
          fc[1] = static_cast<int>(c);
          cells_[c].face_refs.push_back({it->second, -1});
        }
      }
    }
    vertex_cells_.resize(vertices_.size());
    polys_.reserve(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      auto& cell = cells_[c];
      for (const auto& ref : cell.face_refs)
        for (int v : faces_[ref.face].vertex_indices) cell.vertex_indices.push_back(v);
      std::sort(cell.vertex_indices.begin(), cell.vertex_indices.end());
      cell.vertex_indices.erase(std::unique(cell.vertex_indices.begin(), cell.vertex_indices.end()),
                                cell.vertex_indices.end());
      for (int v : cell.vertex_indices) vertex_cells_[v].push_back(static_cast<int>(c));
      polys_.push_back(build_polyhedron(cell));
      cell.volume = polys_.back().volume();
      cell.centroid = polys_.back().centroid();
      if (!(cell.volume > 0.0)) throw MeshError("non-positive cell volume at cell " + std::to_string(c));
    }
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const Box& domain_bounds() const { return bounds_; }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_faces() const { return faces_.size(); }

  /// Cell as a standalone polyhedron with outward loops (global coordinates).
  const Polyhedron& polyhedron(int c) const { return polys_[c]; }

  /// Owner and neighbor (-1 on the boundary) of a face.
  const std::array<int, 2>& face_cells(int f) const { return face_cells_[f]; }

  const std::vector<int>& vertex_cells(int v) const { return vertex_cells_[v]; }

  /// Unit co-normal of edge m of face f: in the face plane, pointing out of the face.
  Vec3 co_normal(int f, std::size_t m) const {
    const auto& idx = faces_[f].vertex_indices;
    const Vec3 e = vertices_[idx[(m + 1) % idx.size()]] - vertices_[idx[m]];
    return e.cross(faces_[f].unit_normal).normalized();
  }

  double total_volume() const {
    double v = 0.0;
    for (const auto& c : cells_) v += c.volume;
    return v;
  }

  Stencil neighborhood(int center, StencilKind kind) const {
    Stencil st{center, {center}, kind};
    std::vector<int> others;
    const Cell& cc = cells_[center];
    if (kind == StencilKind::face) {
      for (const auto& ref : cc.face_refs) {
        const auto& fc = face_cells_[ref.face];
        const int other = fc[0] == center ? fc[1] : fc[0];
        if (other >= 0) others.push_back(other);
      }
    } else {
      for (int v : cc.vertex_indices)
        for (int c : vertex_cells_[v])
          if (c != center) others.push_back(c);
      std::sort(others.begin(), others.end());
      others.erase(std::unique(others.begin(), others.end()), others.end());
      if (kind == StencilKind::edge) {
        std::erase_if(others, [&](int c) { return !shares_edge(center, c); });
      }
    }
    std::sort(others.begin(), others.end());
    others.erase(std::unique(others.begin(), others.end()), others.end());
    st.members.insert(st.members.end(), others.begin(), others.end());
    return st;
  }

  /// Largest deviation of a face vertex from the face plane, relative to the face diameter.
  double face_planarity(int f) const {
    const Face& face = faces_[f];
    double dev = 0.0, diam = 0.0;
    for (int a : face.vertex_indices) {
      dev = std::max(dev, std::abs((vertices_[a] - face.centroid).dot(face.unit_normal)));
      for (int b : face.vertex_indices) diam = std::max(diam, (vertices_[a] - vertices_[b]).norm());
    }
    return diam > 0.0 ? dev / diam : 0.0;
  }

 private:
  Face make_face(const std::vector<int>& loop) const {
    Face f;
    f.vertex_indices = loop;
    std::vector<Vec3> pts;
    pts.reserve(loop.size());
    for (int v : loop) pts.push_back(vertices_[v]);
    auto [area_vec, centroid] = polygon_area_centroid(pts);
    f.area = area_vec.norm();
    if (!(f.area > 0.0)) throw MeshError("degenerate face with zero area");
    f.unit_normal = area_vec / f.area;
    f.centroid = centroid;
    return f;
  }

  Polyhedron build_polyhedron(const Cell& cell) const {
    std::vector<Vec3> verts;
    verts.reserve(cell.vertex_indices.size());
    for (int v : cell.vertex_indices) verts.push_back(vertices_[v]);
    auto local = [&](int v) {
      return static_cast<int>(std::lower_bound(cell.vertex_indices.begin(), cell.vertex_indices.end(), v) -
                              cell.vertex_indices.begin());
    };
    std::vector<std::vector<int>> loops;
    loops.reserve(cell.face_refs.size());
    for (const auto& ref : cell.face_refs) {
      std::vector<int> loop;
      for (int v : faces_[ref.face].vertex_indices) loop.push_back(local(v));
      if (ref.omega < 0) std::reverse(loop.begin(), loop.end());
      loops.push_back(std::move(loop));
    }
    return {std::move(verts), std::move(loops)};
  }

  bool shares_edge(int a, int b) const {
    for (const auto& ra : cells_[a].face_refs) {
      const auto& fa = faces_[ra.face].vertex_indices;
      for (const auto& rb : cells_[b].face_refs) {
        int common = 0;
        for (int v : faces_[rb.face].vertex_indices)
          if (std::find(fa.begin(), fa.end(), v) != fa.end()) ++common;
        if (common >= 2) return true;
      }
    }
    return false;
  }

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<std::array<int, 2>> face_cells_;
  std::vector<Cell> cells_;
  std::vector<std::vector<int>> vertex_cells_;
  std::vector<Polyhedron> polys_;
  Box bounds_;
};

inline const std::vector<std::vector<int>>& tetra_face_loops() {
  static const std::vector<std::vector<int>> loops{{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
  return loops;
}

inline const std::vector<std::vector<int>>& hexa_face_loops() {
  static const std::vector<std::vector<int>> loops{{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                                   {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
  return loops;
}

/// Equidistant hexahedral mesh with N cells along each edge of the box.
inline Mesh generate_cuboid_mesh(int N, const Box& domain = {Vec3::Constant(-1.0), Vec3::Constant(1.0)}) {
  if (N < 1) throw std::invalid_argument("cuboid mesh needs N >= 1");
  if (!((domain.hi - domain.lo).minCoeff() > 0.0)) throw std::invalid_argument("degenerate domain");
  const int P = N + 1;
  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>(P) * P * P);
  const Vec3 h = (domain.hi - domain.lo) / N;
  auto coord = [&](int i, int d) { return i == N ? domain.hi[d] : domain.lo[d] + i * h[d]; };
  for (int k = 0; k < P; ++k)
    for (int j = 0; j < P; ++j)
      for (int i = 0; i < P; ++i) verts.emplace_back(coord(i, 0), coord(j, 1), coord(k, 2));
  auto id = [&](int i, int j, int k) { return i + P * (j + P * k); };
  std::vector<std::vector<std::vector<int>>> cells;
  cells.reserve(static_cast<std::size_t>(N) * N * N);
  for (int k = 0; k < N; ++k)
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        const std::array<int, 8> v{id(i, j, k),         id(i + 1, j, k),         id(i + 1, j + 1, k),
                                   id(i, j + 1, k),     id(i, j, k + 1),         id(i + 1, j, k + 1),
                                   id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1)};
        std::vector<std::vector<int>> loops;
        for (const auto& l : hexa_face_loops()) {
          std::vector<int> g;
          for (int li : l) g.push_back(v[li]);
          loops.push_back(std::move(g));
        }
        cells.push_back(std::move(loops));
      }
  return {std::move(verts), cells, domain};
}

/// Vertex status of a signed distance.
inline int classify_point(const Plane& plane, const Vec3& x) { return point_status(plane.level(x)); }

/// Edge status from the statuses of its two vertices.
inline int classify_edge(int a, int b) {
  if (a == b) return a == 0 ? 3 : a;
  if (a == -b) return 0;
  return a + b == 1 ? 2 : -2;
}

}  // namespace fbnr
