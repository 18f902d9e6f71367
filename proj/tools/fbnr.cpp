// fbnr: experiment driver. See README.md for the subcommands and CSV layouts.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "fbnr/fbnr.hpp"

namespace {

nlohmann::json read_json_arg(const std::string& text, const char* what) {
  std::string src = text;
  if (!text.empty() && text.front() != '{') {
    std::ifstream in(text);
    if (!in) throw fbnr::SpecError(std::string("cannot read ") + what + " file " + text);
    src.assign(std::istreambuf_iterator<char>(in), {});
  }
  try {
    return nlohmann::json::parse(src);
  } catch (const nlohmann::json::exception& e) {
    throw fbnr::SpecError(std::string("invalid ") + what + " JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face-based normal reconstruction experiments"};
  app.require_subcommand(1);

  std::vector<std::string> meshes;
  std::string surface, config_file, stencil, out = ".";
  std::vector<std::string> schemes;
  std::uint64_t seed = 1;
  int depth = 3, cell = -1, M = 60;
  double threshold = 1e-6;
  bool quiet = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--mesh", meshes, "cube:N or vtk:path (repeatable)")->required();
    sub->add_option("--surface", surface, "surface JSON, inline or a file name");
    sub->add_option("--stencil", stencil, "face | edge | vertex (default vertex)")
        ->check(CLI::IsMember({"face", "edge", "vertex"}));
    sub->add_option("--scheme", schemes, "fbnr | lse | lse-star | gg (repeatable)")
        ->check(CLI::IsMember({"fbnr", "lse", "lse-star", "gg"}));
    sub->add_option("--seed", seed, "seed for perturbed spheres without an explicit seed");
    sub->add_option("--config", config_file, "reconstruction settings JSON, inline or a file name");
    sub->add_option("--depth", depth, "subdivision depth of the initializer");
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--quiet", quiet, "no progress output");
  };

  CLI::App* hs = app.add_subcommand("halfspace", "reconstruct exact halfspace data and report outliers");
  common(hs);
  hs->add_option("--threshold", threshold, "outlier if |1 - <n, n_ref>| exceeds this");
  CLI::App* conv = app.add_subcommand("convergence", "mesh convergence study over the listed meshes");
  common(conv);
  CLI::App* em = app.add_subcommand("errormap", "local error map of one cell");
  common(em);
  em->add_option("--cell", cell, "cell id")->required();
  em->add_option("-M,--half-resolution", M, "grid is 2M x M");
  CLI::App* init = app.add_subcommand("init", "volume fractions of a surface");
  common(init);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    fbnr::ExperimentSpec spec;
    spec.schemes.clear();
    spec.command = app.get_subcommands().front()->get_name();
    spec.meshes = meshes;
    if (!surface.empty()) spec.surface = read_json_arg(surface, "surface");
    for (const auto& s : schemes) spec.schemes.push_back(fbnr::scheme_from_string(s));
    if (spec.schemes.empty()) spec.schemes.push_back(fbnr::Scheme::fbnr);
    if (!config_file.empty()) spec.config = fbnr::config_from_json(read_json_arg(config_file, "config"));
    if (!stencil.empty()) spec.config.stencil_kind = fbnr::stencil_kind_from_string(stencil);
    spec.seed = seed;
    spec.depth = depth;
    spec.threshold = threshold;
    spec.cell = cell;
    spec.M = M;
    spec.out = out;
    std::ostringstream sink;
    for (const auto& f : fbnr::run_experiment(spec, quiet ? sink : std::cerr))
      if (!quiet) std::cerr << "wrote " << f.string() << '\n';
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
