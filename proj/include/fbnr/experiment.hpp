#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fbnr/metrics.hpp"
#include "fbnr/vtk_io.hpp"

namespace fbnr {

/// Invalid experiment description (bad flag values, unknown keys, empty lists).
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Halfspace benchmark_halfspace() {
  return {Vec3(0.4534, 0.5442, 0.4330), Vec3(1, -3, 6).normalized()};
}

// ---------------------------------------------------------------------------
// mesh and surface sources

/// "cube:N" (N^3 hexahedra on [-1,1]^3) or "vtk:path".
inline Mesh load_mesh_source(const std::string& src) {
  const auto colon = src.find(':');
  if (colon == std::string::npos) throw SpecError("mesh source must be cube:N or vtk:path, got '" + src + "'");
  const std::string kind = src.substr(0, colon), arg = src.substr(colon + 1);
  if (kind == "cube") {
    std::size_t used = 0;
    int N = 0;
    try {
      N = std::stoi(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != arg.size() || N < 1) throw SpecError("cube:N needs a positive integer, got '" + arg + "'");
    return generate_cuboid_mesh(N);
  }
  if (kind == "vtk") return load_vtk(arg);
  throw SpecError("unknown mesh kind '" + kind + "'");
}

namespace detail {

inline Vec3 vec3_from(const nlohmann::json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw SpecError(std::string(key) + " must be a 3-vector");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw SpecError("unknown key '" + k + "'");
  }
}

}  // namespace detail

/// Surface description with defaults filled in. The seed only matters for
/// perturbed spheres; a "seed" key in the JSON wins over the fallback.
inline nlohmann::json canonical_surface(const nlohmann::json& in, std::uint64_t fallback_seed) {
  if (!in.is_object() || !in.contains("type")) throw SpecError("surface must be a JSON object with a \"type\"");
  const std::string type = in.at("type").get<std::string>();
  nlohmann::json out{{"type", type}};
  try {
    if (type == "halfspace") {
      detail::check_keys(in, {"type", "x_ref", "n_ref"});
      const Halfspace h = benchmark_halfspace();
      const Vec3 n = detail::vec3_from(in, "n_ref", h.n_ref);
      if (!(n.norm() > 0.0)) throw SpecError("n_ref must be nonzero");
      out["x_ref"] = detail::to_json(detail::vec3_from(in, "x_ref", h.x_ref));
      out["n_ref"] = detail::to_json(n.normalized());
    } else if (type == "sphere") {
      detail::check_keys(in, {"type", "center", "radius"});
      out["center"] = detail::to_json(detail::vec3_from(in, "center", Vec3::Zero()));
      out["radius"] = in.value("radius", 0.8);
      if (!(out["radius"].get<double>() > 0.0)) throw SpecError("radius must be positive");
    } else if (type == "ellipsoid") {
      detail::check_keys(in, {"type", "center", "semi_axes"});
      const Vec3 a = detail::vec3_from(in, "semi_axes", Vec3::Constant(0.8));
      if (!(a.minCoeff() > 0.0)) throw SpecError("semi_axes must be positive");
      out["center"] = detail::to_json(detail::vec3_from(in, "center", Vec3::Zero()));
      out["semi_axes"] = detail::to_json(a);
    } else if (type == "perturbed_sphere") {
      detail::check_keys(in, {"type", "center", "R0", "L", "sigma0", "seed"});
      out["center"] = detail::to_json(detail::vec3_from(in, "center", Vec3::Zero()));
      out["R0"] = in.value("R0", 0.8);
      out["L"] = in.value("L", 6);
      out["sigma0"] = in.value("sigma0", 5e-4);
      out["seed"] = in.contains("seed") ? in.at("seed").get<std::uint64_t>() : fallback_seed;
      if (!(out["R0"].get<double>() > 0.0) || out["L"].get<int>() < 0 || out["sigma0"].get<double>() < 0.0)
        throw SpecError("perturbed_sphere needs R0 > 0, L >= 0, sigma0 >= 0");
    } else {
      throw SpecError("unknown surface type '" + type + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad surface field: ") + e.what());
  }
  return out;
}

/// Builds the surface from a canonical description.
inline Hypersurface make_surface(const nlohmann::json& c) {
  const std::string type = c.at("type").get<std::string>();
  const Vec3 center = detail::vec3_from(c, "center", Vec3::Zero());
  if (type == "halfspace")
    return Halfspace{detail::vec3_from(c, "x_ref", Vec3::Zero()), detail::vec3_from(c, "n_ref", Vec3::UnitZ())};
  if (type == "sphere") return Sphere{center, c.at("radius").get<double>()};
  if (type == "ellipsoid") return Ellipsoid{center, detail::vec3_from(c, "semi_axes", Vec3::Ones())};
  if (type == "perturbed_sphere")
    return make_perturbed_sphere(center, c.at("R0").get<double>(), c.at("L").get<int>(),
                                 c.at("sigma0").get<double>(), c.at("seed").get<std::uint64_t>());
  throw SpecError("unknown surface type '" + type + "'");
}

// ---------------------------------------------------------------------------
// configuration

inline nlohmann::json config_to_json(const ReconConfig& c) {
  return {{"grad_tol", c.grad_tol},         {"max_iters", c.max_iters},
          {"line_search_max", c.line_search_max}, {"box_theta", c.box_theta},
          {"box_exponent", c.box_exponent}, {"bulk_weight", c.bulk_weight},
          {"eps_alpha", c.eps_alpha},       {"stencil_kind", to_string(c.stencil_kind)},
          {"extend_stencil", c.extend_stencil}};
}

/// Applies the keys present in j on top of base.
inline ReconConfig config_from_json(const nlohmann::json& j, ReconConfig c = {}) {
  if (!j.is_object()) throw SpecError("config must be a JSON object");
  detail::check_keys(j, {"grad_tol", "max_iters", "line_search_max", "box_theta", "box_exponent", "bulk_weight",
                         "eps_alpha", "stencil_kind", "extend_stencil"});
  try {
    c.grad_tol = j.value("grad_tol", c.grad_tol);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.line_search_max = j.value("line_search_max", c.line_search_max);
    c.box_theta = j.value("box_theta", c.box_theta);
    c.box_exponent = j.value("box_exponent", c.box_exponent);
    c.bulk_weight = j.value("bulk_weight", c.bulk_weight);
    c.eps_alpha = j.value("eps_alpha", c.eps_alpha);
    if (j.contains("stencil_kind")) c.stencil_kind = stencil_kind_from_string(j.at("stencil_kind").get<std::string>());
    c.extend_stencil = j.value("extend_stencil", c.extend_stencil);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad config field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SpecError(e.what());
  }
  if (!(c.grad_tol > 0.0) || c.max_iters < 0 || c.line_search_max < 1 || !(c.box_theta > 0.0) ||
      c.box_theta >= pi || c.box_exponent < 2 || c.box_exponent % 2 != 0 || !(c.bulk_weight > 0.0) ||
      !(c.eps_alpha >= 0.0) || c.eps_alpha >= 0.5)
    throw SpecError("config value out of range");
  return c;
}

// ---------------------------------------------------------------------------
// experiment spec

struct ExperimentSpec {
  std::string command;
  std::vector<std::string> meshes;
  nlohmann::json surface;  // as given; canonicalized in canonical_spec()
  std::vector<Scheme> schemes{Scheme::fbnr};
  ReconConfig config;      // config.stencil_kind is the stencil flag
  std::uint64_t seed = 1;
  int depth = 3;
  double threshold = 1e-6;  // halfspace: outlier if dn > threshold
  int cell = -1;            // errormap
  int M = 60;               // errormap
  std::string out = ".";
};

inline nlohmann::json default_surface(const std::string& command) {
  if (command == "halfspace") return {{"type", "halfspace"}};
  return {{"type", "sphere"}};
}

/// Validated spec as canonical JSON; everything that influences the output except the directory.
inline nlohmann::json canonical_spec(const ExperimentSpec& s) {
  static const std::vector<std::string> commands{"halfspace", "convergence", "errormap", "init"};
  if (std::find(commands.begin(), commands.end(), s.command) == commands.end())
    throw SpecError("unknown command '" + s.command + "'");
  if (s.meshes.empty()) throw SpecError("at least one mesh is required");
  if (s.schemes.empty()) throw SpecError("at least one scheme is required");
  if (s.depth < 0 || s.depth > 8) throw SpecError("depth must be in [0, 8]");
  const nlohmann::json surf = canonical_surface(s.surface.is_null() ? default_surface(s.command) : s.surface, s.seed);
  const std::string type = surf.at("type").get<std::string>();
  if (s.command == "halfspace" && type != "halfspace") throw SpecError("halfspace needs a halfspace surface");
  if (s.command == "convergence" && type == "halfspace") throw SpecError("convergence needs a closed surface");
  if (s.command == "errormap") {
    if (s.meshes.size() != 1) throw SpecError("errormap takes exactly one mesh");
    if (s.M < 1) throw SpecError("M must be positive");
    if (s.cell < 0) throw SpecError("errormap needs a cell id");
  }
  if (s.command == "halfspace" && !(s.threshold >= 0.0)) throw SpecError("threshold must be non-negative");
  const ReconConfig cfg = config_from_json(config_to_json(s.config));
  nlohmann::json j{{"command", s.command}, {"meshes", s.meshes},    {"surface", surf},
                   {"config", config_to_json(cfg)}, {"depth", s.depth}};
  nlohmann::json schemes = nlohmann::json::array();
  for (Scheme sc : s.schemes) schemes.push_back(to_string(sc));
  j["schemes"] = schemes;
  if (s.command == "halfspace") j["threshold"] = s.threshold;
  if (s.command == "errormap") {
    j["cell"] = s.cell;
    j["M"] = s.M;
  }
  return j;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// FNV-1a of the canonical spec JSON, as 16 hex digits.
inline std::string spec_hash(const nlohmann::json& canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(canonical.dump()));
  return buf;
}

// ---------------------------------------------------------------------------
// CSV output

/// Shortest text that reads back to the same double.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& title, const std::string& hash,
            const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# fbnr " << title << " spec_hash=" << hash << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(v), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return fmt_double(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }

  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// halfspace

struct HalfspaceCell {
  int id = -1;
  double alpha = 0.0;
  ReconstructionResult result;
  double dn = 0.0;
  bool outlier = false;
  std::string cause;  // non_compliant_minimum | max_iters | degenerate, for outliers
};

struct HalfspaceReport {
  std::string mesh;
  std::vector<HalfspaceCell> cells;
  std::size_t outliers = 0;
  double max_error = 0.0;
  double max_dn = 0.0;
  double mean_dn = 0.0;  // patch-area weighted
};

inline const char* outlier_cause(ReconStatus s) {
  switch (s) {
    case ReconStatus::converged: return "non_compliant_minimum";
    case ReconStatus::max_iters: return "max_iters";
    case ReconStatus::degenerate: return "degenerate";
  }
  return "?";
}

inline HalfspaceReport run_halfspace(const Mesh& mesh, const Halfspace& h, const ReconConfig& cfg, Scheme scheme,
                                     double threshold) {
  HalfspaceReport rep;
  const VolumeFractionField field = init_volume_fractions(mesh, h, 0, cfg.eps_alpha);
  const auto results = reconstruct_field(mesh, field, cfg, scheme);
  for (const auto& [k, r] : results) {
    HalfspaceCell c;
    c.id = k;
    c.alpha = field.alpha[k];
    c.result = r;
    c.dn = std::abs(1.0 - r.normal.dot(h.n_ref));
    c.outlier = c.dn > threshold;
    if (c.outlier) {
      c.cause = outlier_cause(r.status);
      ++rep.outliers;
    }
    rep.max_error = std::max(rep.max_error, r.error);
    rep.max_dn = std::max(rep.max_dn, c.dn);
    rep.cells.push_back(std::move(c));
  }
  rep.mean_dn = normal_alignment(mesh, results, field).value;
  return rep;
}

// ---------------------------------------------------------------------------
// convergence

struct ConvergenceRow {
  std::string mesh;
  Scheme scheme = Scheme::fbnr;
  double resolution = 0.0;  // sqrt(N_Sigma)
  std::size_t n_interface_cells = 0;
  double mean_dn = 0.0;
  double mean_dV = 0.0;
  std::size_t missing = 0;
  std::size_t degenerate = 0;
  std::string status = "ok";
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;  // mesh-major, schemes in request order
  std::map<Scheme, std::pair<double, double>> orders;  // (dn, dV); nan with < 2 usable rows
};

inline std::pair<double, double> fit_orders(std::vector<const ConvergenceRow*> rows) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->resolution < b->resolution; });
  std::vector<double> res, dn, dv;
  for (const ConvergenceRow* r : rows) {
    if (r->status != "ok") continue;
    res.push_back(r->resolution);
    dn.push_back(r->mean_dn);
    dv.push_back(r->mean_dV);
  }
  auto fit = [&](const std::vector<double>& e) {
    try {
      return convergence_order(res, e);
    } catch (const std::invalid_argument&) {
      return nan;
    }
  };
  return {fit(dn), fit(dv)};
}

/// mesh_loader is called once per entry of meshes; failures are recorded per row.
inline ConvergenceTable run_convergence(const std::vector<std::string>& meshes, const Hypersurface& surf,
                                        const std::vector<Scheme>& schemes, const ReconConfig& cfg, int depth,
                                        const std::function<Mesh(const std::string&)>& mesh_loader = load_mesh_source) {
  if (meshes.empty()) throw SpecError("resolution list is empty");
  if (schemes.empty()) throw SpecError("scheme list is empty");
  const double volume = enclosed_volume(surf);
  ConvergenceTable t;
  for (const std::string& src : meshes) {
    std::optional<Mesh> mesh;
    std::optional<VolumeFractionField> field;
    std::string failure;
    try {
      mesh = mesh_loader(src);
      field = init_volume_fractions(*mesh, surf, depth, cfg.eps_alpha);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    for (Scheme sc : schemes) {
      ConvergenceRow row;
      row.mesh = src;
      row.scheme = sc;
      if (!failure.empty()) {
        row.status = "error: " + failure;
        t.rows.push_back(row);
        continue;
      }
      try {
        const auto results = reconstruct_field(*mesh, *field, cfg, sc);
        const MetricValue dn = normal_alignment(*mesh, results, *field);
        const MetricValue dv = symmetric_volume_error(*mesh, results, *field, volume);
        row.n_interface_cells = results.size();
        row.resolution = std::sqrt(static_cast<double>(results.size()));
        row.mean_dn = dn.value;
        row.mean_dV = dv.value;
        row.missing = dn.missing;
        row.degenerate = dn.degenerate;
        if (results.empty()) row.status = "error: no interface cells";
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      t.rows.push_back(row);
    }
  }
  for (Scheme sc : schemes) {
    std::vector<const ConvergenceRow*> rows;
    for (const auto& r : t.rows)
      if (r.scheme == sc) rows.push_back(&r);
    t.orders[sc] = fit_orders(rows);
  }
  return t;
}

// ---------------------------------------------------------------------------
// local error maps

struct ErrorMapPoint {
  Angles p;
  double E = 0.0;
  Vec2 grad_dir = Vec2::Zero();  // unit direction of the error gradient, zero if none
  Vec2 step_dir = Vec2::Zero();  // unit direction of the Gauss-Newton step (steepest descent if singular)
};

struct StencilValue {
  int id = -1;
  double alpha = 0.0;
  double weight = 0.0;
};

struct ErrorMap {
  int M = 0;
  std::vector<ErrorMapPoint> points;  // index (i-1)*M + (j-1), i = 1..2M over phi, j = 1..M over theta
  ReconstructionResult run;           // started at the LSE* guess
  std::vector<StencilValue> stencil;
  Angles p_ref;                       // from the field's reference normal

  const ErrorMapPoint& at(int i, int j) const { return points[static_cast<std::size_t>((i - 1) * M + (j - 1))]; }
};

/// Grid nodes cover the sphere: phi_i = pi (2i-1) / (2M), theta_j = pi (2j-1) / (2M).
inline Angles error_map_node(int i, int j, int M) {
  return {pi * (2 * i - 1) / (2.0 * M), pi * (2 * j - 1) / (2.0 * M)};
}

inline ErrorMap compute_error_map(const Mesh& mesh, const VolumeFractionField& field, int cell, int M,
                                  const ReconConfig& cfg = {}) {
  if (cell < 0 || cell >= static_cast<int>(mesh.num_cells())) throw SpecError("cell id out of range");
  if (!is_intersected(field.alpha[cell], cfg.eps_alpha)) throw SpecError("cell is not intersected");
  if (M < 1) throw SpecError("M must be positive");
  ErrorMap map;
  map.M = M;
  bool extended = false;
  const StencilProblem pb = make_problem(mesh, field, cell, cfg, &extended);
  for (std::size_t i = 0; i < pb.stencil.members.size(); ++i) {
    const int k = pb.stencil.members[i];
    map.stencil.push_back({k, field.alpha[k], pb.weights[i]});
  }
  map.p_ref = angles_from_normal(field.normal[cell]);
  map.points.resize(static_cast<std::size_t>(2 * M) * M);
  parallel_for(map.points.size(), [&](std::size_t idx) {
    const int i = static_cast<int>(idx) / M + 1, j = static_cast<int>(idx) % M + 1;
    ErrorMapPoint& pt = map.points[idx];
    pt.p = error_map_node(i, j, M);
    const ErrorGradient eg = error_gradient(pb, pt.p);
    pt.E = eg.E;
    if (eg.grad.norm() > 0.0) pt.grad_dir = eg.grad.normalized();
    const double hn = eg.H.norm();
    Vec2 step = -eg.grad;
    if (hn > 0.0 && std::abs(eg.H.determinant()) >= 1e-14 * hn * hn) step = eg.H.ldlt().solve(-eg.grad);
    if (step.norm() > 0.0) pt.step_dir = step.normalized();
  });
  map.run = minimize_from(pb, initial_orientation(mesh, pb.stencil, field, Scheme::lse_star), cfg);
  map.run.extended = extended;
  return map;
}

/// Grid points whose E does not exceed any of their 8 neighbours and is below
/// at least one. phi wraps around; theta rows at the poles have fewer neighbours.
inline std::vector<std::size_t> error_map_minima(const ErrorMap& map) {
  const int M = map.M;
  std::vector<std::size_t> out;
  for (int i = 1; i <= 2 * M; ++i)
    for (int j = 1; j <= M; ++j) {
      const double e = map.at(i, j).E;
      bool le_all = true, lt_any = false;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (!di && !dj) continue;
          const int jj = j + dj;
          if (jj < 1 || jj > M) continue;
          const int ii = (i - 1 + di + 2 * M) % (2 * M) + 1;
          const double o = map.at(ii, jj).E;
          le_all = le_all && e <= o;
          lt_any = lt_any || e < o;
        }
      if (le_all && lt_any) out.push_back(static_cast<std::size_t>((i - 1) * M + (j - 1)));
    }
  return out;
}

inline std::size_t error_map_global_minimum(const ErrorMap& map) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < map.points.size(); ++k)
    if (map.points[k].E < map.points[best].E) best = k;
  return best;
}

// ---------------------------------------------------------------------------
// writers

inline void write_trace_rows(CsvWriter& w, const std::string& mesh, int cell, const ReconstructionResult& r) {
  for (std::size_t it = 0; it < r.trace.size(); ++it) {
    const TraceEntry& t = r.trace[it];
    w.row(mesh, cell, it, t.p.phi, t.p.theta, t.error, t.grad_norm, to_string(t.step));
  }
}

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> c{"mesh",           "cell_id",
                                          "iter",           "phi[rad]",
                                          "theta[rad]",     "error[volume^2]",
                                          "grad_norm[volume^2/rad]", "step"};
  return c;
}

/// Runs one subcommand and writes its files into spec.out. Returns the files written.
inline std::vector<std::filesystem::path> run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  namespace fs = std::filesystem;
  const nlohmann::json canon = canonical_spec(spec);
  const std::string hash = spec_hash(canon);
  const Hypersurface surf = make_surface(canon.at("surface"));
  const ReconConfig& cfg = spec.config;
  const fs::path dir(spec.out);
  fs::create_directories(dir);
  std::vector<fs::path> files;
  {
    std::ofstream js(dir / (spec.command + "_spec.json"));
    js << canon.dump(2) << '\n';
    files.push_back(dir / (spec.command + "_spec.json"));
  }

  if (spec.command == "halfspace") {
    const Halfspace& h = std::get<Halfspace>(surf);
    CsvWriter sw(dir / "halfspace_summary.csv", "halfspace summary", hash,
                 {"mesh", "scheme", "n_interface_cells", "outliers", "threshold[-]", "max_error[volume^2]",
                  "max_dn[-]", "mean_dn[-]"});
    CsvWriter tw(dir / "halfspace_traces.csv", "halfspace traces of outlier cells", hash, trace_columns());
    for (Scheme sc : spec.schemes) {
      const std::string tag = to_string(sc);
      const fs::path cells_path = dir / ("halfspace_" + tag + ".csv");
      // one file per scheme, all meshes appended
      std::vector<HalfspaceCell> all;
      std::vector<std::string> mesh_of;
      for (const std::string& src : spec.meshes) {
        const Mesh mesh = load_mesh_source(src);
        HalfspaceReport rep = run_halfspace(mesh, h, cfg, sc, spec.threshold);
        rep.mesh = src;
        sw.row(src, tag, rep.cells.size(), rep.outliers, spec.threshold, rep.max_error, rep.max_dn, rep.mean_dn);
        log << src << " " << tag << ": " << rep.cells.size() << " cells, " << rep.outliers
            << " outliers, max E " << fmt_double(rep.max_error) << ", max dn " << fmt_double(rep.max_dn) << '\n';
        for (auto& c : rep.cells) {
          if (c.outlier) write_trace_rows(tw, src, c.id, c.result);
          mesh_of.push_back(src);
          all.push_back(std::move(c));
        }
      }
      CsvWriter w(cells_path, "halfspace cells scheme=" + tag, hash,
                  {"mesh", "cell_id", "alpha[-]", "phi[rad]", "theta[rad]", "s[length]", "nx[-]", "ny[-]", "nz[-]",
                   "error[volume^2]", "grad_norm[volume^2/rad]", "iters", "status", "dn[-]", "outlier", "cause"});
      for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& c = all[i];
        const auto& r = c.result;
        w.row(mesh_of[i], c.id, c.alpha, r.p.phi, r.p.theta, r.s, r.normal.x(), r.normal.y(), r.normal.z(),
              r.error, r.grad_norm, r.iterations, to_string(r.status), c.dn, c.outlier ? 1 : 0, c.cause);
      }
      files.push_back(cells_path);
    }
    files.push_back(dir / "halfspace_summary.csv");
    files.push_back(dir / "halfspace_traces.csv");
  } else if (spec.command == "convergence") {
    const ConvergenceTable t = run_convergence(spec.meshes, surf, spec.schemes, cfg, spec.depth);
    CsvWriter w(dir / "convergence.csv", "convergence", hash,
                {"scheme", "mesh", "resolution[sqrt(cells)]", "n_interface_cells", "mean_dn[-]", "mean_dV[-]",
                 "fitted_order_dn[-]", "fitted_order_dV[-]", "missing", "degenerate", "status"});
    for (const auto& r : t.rows) {
      const auto& o = t.orders.at(r.scheme);
      w.row(to_string(r.scheme), r.mesh, r.resolution, r.n_interface_cells, r.mean_dn, r.mean_dV, o.first, o.second,
            r.missing, r.degenerate, r.status);
      log << r.mesh << " " << to_string(r.scheme) << ": N_S=" << r.n_interface_cells
          << " dn=" << fmt_double(r.mean_dn) << " dV=" << fmt_double(r.mean_dV) << " " << r.status << '\n';
    }
    for (const auto& [sc, o] : t.orders)
      log << to_string(sc) << " order dn=" << fmt_double(o.first) << " dV=" << fmt_double(o.second) << '\n';
    files.push_back(dir / "convergence.csv");
  } else if (spec.command == "errormap") {
    const Mesh mesh = load_mesh_source(spec.meshes.front());
    const VolumeFractionField field = init_volume_fractions(mesh, surf, spec.depth, cfg.eps_alpha);
    const ErrorMap map = compute_error_map(mesh, field, spec.cell, spec.M, cfg);
    const std::vector<std::size_t> minima = error_map_minima(map);
    std::vector<bool> is_min(map.points.size(), false);
    for (std::size_t k : minima) is_min[k] = true;
    {
      CsvWriter w(dir / "errormap.csv", "errormap cell=" + std::to_string(spec.cell), hash,
                  {"i", "j", "phi[rad]", "theta[rad]", "E[volume^2]", "log10E[-]", "grad_dir_phi[-]",
                   "grad_dir_theta[-]", "step_dir_phi[-]", "step_dir_theta[-]", "local_min"});
      for (std::size_t k = 0; k < map.points.size(); ++k) {
        const auto& pt = map.points[k];
        const int i = static_cast<int>(k) / map.M + 1, j = static_cast<int>(k) % map.M + 1;
        w.row(i, j, pt.p.phi, pt.p.theta, pt.E, std::log10(std::max(pt.E, 1e-300)), pt.grad_dir[0],
              pt.grad_dir[1], pt.step_dir[0], pt.step_dir[1], is_min[k] ? 1 : 0);
      }
    }
    {
      CsvWriter w(dir / "errormap_trace.csv", "errormap trace from lse-star guess", hash, trace_columns());
      write_trace_rows(w, spec.meshes.front(), spec.cell, map.run);
    }
    {
      CsvWriter w(dir / "errormap_stencil.csv", "errormap stencil", hash,
                  {"cell_id", "alpha[-]", "weight[-]", "center"});
      for (const auto& v : map.stencil) w.row(v.id, v.alpha, v.weight, v.id == spec.cell ? 1 : 0);
    }
    log << "cell " << spec.cell << ": " << minima.size() << " local minima, reference (" << fmt_double(map.p_ref.phi)
        << ", " << fmt_double(map.p_ref.theta) << "), run ended at (" << fmt_double(map.run.p.phi) << ", "
        << fmt_double(map.run.p.theta) << ") E=" << fmt_double(map.run.error) << '\n';
    files.push_back(dir / "errormap.csv");
    files.push_back(dir / "errormap_trace.csv");
    files.push_back(dir / "errormap_stencil.csv");
  } else {  // init
    CsvWriter w(dir / "init.csv", "init", hash, {"mesh", "cell_id", "alpha[-]", "nx[-]", "ny[-]", "nz[-]", "intersected"});
    for (const std::string& src : spec.meshes) {
      const Mesh mesh = load_mesh_source(src);
      const VolumeFractionField f = init_volume_fractions(mesh, surf, spec.depth, cfg.eps_alpha);
      double vol = 0.0;
      for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
        const bool cut = is_intersected(f.alpha[k], cfg.eps_alpha);
        w.row(src, k, f.alpha[k], f.normal[k].x(), f.normal[k].y(), f.normal[k].z(), cut ? 1 : 0);
        vol += f.alpha[k] * mesh.polyhedron(static_cast<int>(k)).volume();
      }
      log << src << ": " << mesh.num_cells() << " cells, " << interface_cells(f, cfg.eps_alpha).size()
          << " intersected, inside volume " << fmt_double(vol) << '\n';
    }
    files.push_back(dir / "init.csv");
  }
  return files;
}

}  // namespace fbnr
