#pragma once

#include "fbnr/mesh.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace fbnr {

/// Reads a legacy ASCII VTK unstructured grid holding tetrahedra (10) and
/// hexahedra (12). Sections after CELL_TYPES are ignored.
inline Mesh read_vtk(std::istream& in) {
  std::string token;
  std::vector<Vec3> points;
  std::vector<std::vector<int>> conn;
  std::vector<int> types;
  bool have_points = false, have_cells = false, have_types = false;
  auto fail = [](const std::string& what) { throw MeshError("vtk parse error: " + what); };

  std::string line;
  if (!std::getline(in, line) || line.rfind("# vtk DataFile", 0) != 0) fail("missing header");
  std::getline(in, line);  // title
  if (!(in >> token) || token != "ASCII") fail("only ASCII files are supported");
  if (!(in >> token) || token != "DATASET" || !(in >> token) || token != "UNSTRUCTURED_GRID")
    fail("expected DATASET UNSTRUCTURED_GRID");

  while (in >> token) {
    if (token == "POINTS") {
      std::size_t n;
      std::string type;
      if (!(in >> n >> type)) fail("bad POINTS line");
      points.resize(n);
      for (auto& p : points)
        if (!(in >> p.x() >> p.y() >> p.z())) fail("truncated POINTS section");
      have_points = true;
    } else if (token == "CELLS") {
      std::size_t n, size;
      if (!(in >> n >> size)) fail("bad CELLS line");
      conn.resize(n);
      std::size_t read = 0;
      for (auto& c : conn) {
        int k;
        if (!(in >> k) || k < 0) fail("truncated CELLS section");
        c.resize(k);
        for (int& v : c)
          if (!(in >> v)) fail("truncated CELLS section");
        read += k + 1;
      }
      if (read != size) fail("CELLS size mismatch");
      have_cells = true;
    } else if (token == "CELL_TYPES") {
      std::size_t n;
      if (!(in >> n)) fail("bad CELL_TYPES line");
      types.resize(n);
      for (int& t : types)
        if (!(in >> t)) fail("truncated CELL_TYPES section");
      have_types = true;
      break;
    } else {
      fail("unexpected token '" + token + "'");
    }
  }
  if (!have_points || !have_cells || !have_types) fail("missing POINTS, CELLS or CELL_TYPES");
  if (types.size() != conn.size()) fail("CELLS and CELL_TYPES counts differ");

  std::vector<std::vector<std::vector<int>>> cells;
  cells.reserve(conn.size());
  for (std::size_t c = 0; c < conn.size(); ++c) {
    const std::vector<std::vector<int>>* loops = nullptr;
    std::size_t nv = 0;
    if (types[c] == 10) {
      loops = &tetra_face_loops();
      nv = 4;
    } else if (types[c] == 12) {
      loops = &hexa_face_loops();
      nv = 8;
    } else {
      throw MeshError("unsupported cell type " + std::to_string(types[c]) + " at cell " + std::to_string(c));
    }
    if (conn[c].size() != nv) fail("cell " + std::to_string(c) + " has wrong vertex count");
    std::vector<std::vector<int>> global;
    for (const auto& l : *loops) {
      std::vector<int> g;
      for (int li : l) g.push_back(conn[c][li]);
      global.push_back(std::move(g));
    }
    cells.push_back(std::move(global));
  }
  Box bounds{Vec3::Constant(std::numeric_limits<double>::max()), Vec3::Constant(-std::numeric_limits<double>::max())};
  for (const auto& p : points) {
    bounds.lo = bounds.lo.cwiseMin(p);
    bounds.hi = bounds.hi.cwiseMax(p);
  }
  return {std::move(points), cells, bounds};
}

inline Mesh load_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open " + path);
  return read_vtk(in);
}

/// Debug dump: vertices, faces (index loops) and cells (signed face ids, ~f for omega=-1).
inline nlohmann::json mesh_to_json(const Mesh& mesh) {
  nlohmann::json j;
  auto& vs = j["vertices"] = nlohmann::json::array();
  for (const auto& v : mesh.vertices()) vs.push_back({v.x(), v.y(), v.z()});
  auto& fs = j["faces"] = nlohmann::json::array();
  for (const auto& f : mesh.faces()) fs.push_back(f.vertex_indices);
  auto& cs = j["cells"] = nlohmann::json::array();
  for (const auto& c : mesh.cells()) {
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& r : c.face_refs) refs.push_back(r.omega > 0 ? r.face : ~r.face);
    cs.push_back(std::move(refs));
  }
  return j;
}

}  // namespace fbnr
