#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Core>
#include <json.hpp>

#include "viscofe/cli.hpp"
#include "viscofe/matpoint.hpp"
#include "viscofe/problems.hpp"
#include "viscofe/shell_exact.hpp"

namespace viscofe::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, std::string_view header) : path_(path), out_(path) {
    if (!out_) raise(ErrorKind::Io, "cannot write '" + path.string() + "'");
    out_ << header << '\n';
  }
  template <class... T>
  void row(const T&... cols) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << cell(cols)), ...);
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) raise(ErrorKind::Io, "failed writing '" + path_.string() + "'");
  }

 private:
  static std::string cell(double x) { return num(x); }
  static std::string cell(int x) { return std::to_string(x); }
  fs::path path_;
  std::ofstream out_;
};

// Output instants: multiples of the interval, every knot time and the end.
std::vector<double> output_grid(const LoadingBlock& l, double interval) {
  const double t_end = l.end_time();
  std::vector<double> grid;
  for (const auto& k : l.knots)
    if (k.first > 0.0) grid.push_back(k.first);
  if (interval > 0.0)
    for (long k = 1; k * interval < t_end; ++k) grid.push_back(k * interval);
  std::sort(grid.begin(), grid.end());
  // Drop near-duplicates left by the interval arithmetic.
  std::vector<double> out;
  for (double t : grid)
    if (out.empty() || t - out.back() > 1e-9 * t_end) out.push_back(t);
  out.back() = t_end;
  return out;
}

SolverOptions solver_options(const NumericBlock& n, int threads) {
  SolverOptions o;
  o.tol1 = n.tol1;
  o.tol2 = n.tol2;
  o.max_staggered = n.max_staggered;
  o.max_halvings = n.max_halvings;
  o.adaptive = n.adaptive;
  o.limits.safety = n.safety;
  o.dt_max = n.dt_max;
  o.threads = threads;
  return o;
}

ShellGeometry shell_geometry(const LoadingBlock& l) {
  ShellGeometry g;
  g.A = l.A;
  g.B = l.B;
  g.b_knots.clear();
  for (const auto& [t, s] : l.knots) g.b_knots.emplace_back(t, s * l.B);
  g.validate();
  return g;
}

json run_matpoint(const RunConfig& c, const fs::path& dir, std::vector<fs::path>& files) {
  MatpointOptions o;
  o.dt_max = c.numeric.dt_max;
  o.output_interval = c.output.interval;
  o.adaptive = c.numeric.adaptive;
  o.limits.safety = c.numeric.safety;
  o.tol1 = c.numeric.tol1;
  o.tol2 = c.numeric.tol2;
  o.max_halvings = c.numeric.max_halvings;
  o.max_staggered = c.numeric.max_staggered;
  const bool uniaxial = c.loading.control == "uniaxial-stress";
  const PointTrajectory tr = uniaxial ? run_uniaxial_stress(LoadProgram::uniaxial(c.loading.knots), c.material, o)
                                      : run_prescribed_F(LoadProgram::isochoric(c.loading.knots), c.material, o);
  files.push_back(dir / "matpoint.csv");
  Csv csv(files.back(), kMatpointHeader);
  for (const auto& s : tr.samples) csv.row(s.t, s.F(2, 2), s.F(0, 0), s.q, s.S(2, 2), s.T(2, 2), s.dissipation);
  csv.close();
  return {{"samples", tr.samples.size()},
          {"steps", tr.steps},
          {"rk_steps", tr.rk_steps},
          {"max_staggered_iterations", tr.max_staggered_iterations},
          {"max_det_error", tr.max_det_error}};
}

json run_shell_exact(const RunConfig& c, const fs::path& dir, std::vector<fs::path>& files, int threads) {
  const ShellGeometry g = shell_geometry(c.loading);
  ShellExact exact(g, c.material, c.numeric.n_gauss, DtLimits{c.numeric.safety, 1e-12, 1e30}, c.numeric.dt_max);
  files.push_back(dir / "shell.csv");
  Csv csv(files.back(), kShellHeader);
  csv.row(0.0, exact.b(), exact.outer_pressure());
  for (double t : output_grid(c.loading, c.output.interval)) {
    exact.advance_to(t, threads);
    csv.row(t, exact.b(), exact.outer_pressure());
  }
  csv.close();
  return {{"rk_steps", exact.rk_steps()}, {"n_gauss", c.numeric.n_gauss}};
}

json run_patch(const RunConfig& c, const fs::path& dir, std::vector<fs::path>& files, int threads) {
  const Mesh mesh = generate_cube_mesh(c.numeric.cube_n, c.numeric.distortion, static_cast<unsigned>(c.numeric.seed));
  const BVPConfig bvp = patch_test_config(c.material, LoadProgram::uniaxial(c.loading.knots),
                                          output_grid(c.loading, c.output.interval), solver_options(c.numeric, threads));
  const auto samples = run_patch_test(mesh, bvp);
  files.push_back(dir / "patch_test.csv");
  Csv csv(files.back(), kMatpointHeader);
  double spread = 0.0;
  for (const auto& s : samples) {
    csv.row(s.t, s.F33, s.lambda_lat, s.q, s.S33, s.T33, s.dissipation);
    spread = std::max(spread, s.F_spread);
  }
  csv.close();
  return {{"elements", mesh.n_elements()},
          {"free_dofs", DofMap(mesh, bvp.dirichlet).n_free()},
          {"max_F_spread", spread},
          {"max_det_error", samples.back().det_error}};
}

json run_shell_fem(const RunConfig& c, const fs::path& dir, std::vector<fs::path>& files, int threads) {
  const ShellGeometry g = shell_geometry(c.loading);
  const Mesh mesh = generate_shell_mesh(c.numeric.nr, c.numeric.ntheta, g.A, g.B);
  FESolver solver(mesh, shell_fe_config(c.material, g, output_grid(c.loading, c.output.interval),
                                        solver_options(c.numeric, threads)));
  files.push_back(dir / "shell.csv");
  Csv csv(files.back(), kShellHeader);
  csv.row(0.0, g.b_at(0.0), outer_pressure_fe(solver));
  solver.run([&](const FESolver& s) { csv.row(s.time(), g.b_at(s.time()), outer_pressure_fe(s)); });
  csv.close();
  return {{"elements", mesh.n_elements()},
          {"free_dofs", solver.dofs().n_free()},
          {"steps", solver.steps()},
          {"rk_calls", solver.rk_calls()},
          {"max_staggered_iterations", solver.max_staggered_iterations()},
          {"max_det_error", solver.max_det_error()},
          {"max_pressure_patch_volume_error", max_pressure_patch_volume_error(solver)}};
}

json run_convergence(const RunConfig& c, const fs::path& dir, std::vector<fs::path>& files, int threads) {
  const ShellGeometry g = shell_geometry(c.loading);
  const double t_eval = c.loading.end_time();
  ShellExact exact(g, c.material, c.numeric.n_gauss, DtLimits{c.numeric.exact_safety, 1e-12, 1e30});
  exact.advance_to(t_eval, threads);
  const double P = exact.outer_pressure();
  const auto rows = convergence_study(c.numeric.levels, c.material, g, t_eval, P, solver_options(c.numeric, threads));
  files.push_back(dir / "convergence.csv");
  Csv csv(files.back(), kConvergenceHeader);
  json levels = json::array();
  for (const auto& r : rows) {
    csv.row(r.level, r.h, r.n_dof, r.eps_P, r.wall_s);
    levels.push_back({{"level", r.level}, {"nr", r.nr}, {"ntheta", r.ntheta}, {"P_h", r.P_h}, {"steps", r.steps}});
  }
  csv.close();
  return {{"t_eval", t_eval}, {"P_exact", P}, {"levels", levels}};
}

json material_json(const MaterialParams& m) {
  auto v = [](double x) { return std::isinf(x) ? json("inf") : json(x); };
  return {{"mu1", m.mu1},   {"mu2", m.mu2},     {"alpha1", m.alpha1}, {"alpha2", m.alpha2}, {"m1", m.m1},
          {"m2", m.m2},     {"a1", m.a1},       {"a2", m.a2},         {"kappa", v(m.kappa)}, {"eta0", m.eta0},
          {"etaInf", m.etaInf}, {"K1", m.K1},   {"K2", m.K2},         {"beta1", m.beta1},   {"beta2", m.beta2}};
}

json numeric_json(const NumericBlock& n) {
  json levels = json::array();
  for (const auto& [a, b] : n.levels) levels.push_back({a, b});
  return {{"tol1", n.tol1},
          {"tol2", n.tol2},
          {"safety", n.safety},
          {"dt_max", std::isinf(n.dt_max) ? json("inf") : json(n.dt_max)},
          {"adaptive", n.adaptive},
          {"max_staggered", n.max_staggered},
          {"max_halvings", n.max_halvings},
          {"n_gauss", n.n_gauss},
          {"exact_safety", n.exact_safety},
          {"cube_n", n.cube_n},
          {"distortion", n.distortion},
          {"seed", n.seed},
          {"nr", n.nr},
          {"ntheta", n.ntheta},
          {"levels", levels}};
}

}  // namespace

std::vector<fs::path> run(const RunConfig& cfg, const RunOptions& opt) {
  const fs::path dir = opt.out_dir.empty() ? fs::path(cfg.output.dir) : opt.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorKind::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
  if (opt.threads < 1) raise(ErrorKind::Parameter, "threads must be >= 1");

  const auto start = std::chrono::steady_clock::now();
  std::vector<fs::path> files;
  json stats;
  switch (cfg.command) {
    case Command::Matpoint: stats = run_matpoint(cfg, dir, files); break;
    case Command::ShellExact: stats = run_shell_exact(cfg, dir, files, opt.threads); break;
    case Command::PatchTest: stats = run_patch(cfg, dir, files, opt.threads); break;
    case Command::ShellFem: stats = run_shell_fem(cfg, dir, files, opt.threads); break;
    case Command::Convergence: stats = run_convergence(cfg, dir, files, opt.threads); break;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json outputs = json::array();
  for (const auto& f : files) outputs.push_back(f.filename().string());
  json knots = json::array();
  for (const auto& [t, s] : cfg.loading.knots) knots.push_back({t, s});
  const json manifest = {
      {"tool", "viscofe"},
      {"version", VISCOFE_VERSION},
      {"command", std::string(to_string(cfg.command))},
      {"threads", opt.threads},
      {"wall_s", wall},
      {"outputs", outputs},
      {"effective",
       {{"material", material_json(cfg.material)},
        {"loading", {{"control", cfg.loading.control}, {"knots", knots}, {"A", cfg.loading.A}, {"B", cfg.loading.B}}},
        {"numeric", numeric_json(cfg.numeric)},
        {"output", {{"dir", dir.string()}, {"interval", cfg.output.interval}}}}},
      {"config", serialize_config(cfg)},
      {"stats", stats},
      {"build",
       {{"compiler", __VERSION__},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                     "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  files.push_back(dir / "manifest.json");
  std::ofstream m(files.back());
  m << manifest.dump(2) << '\n';
  m.close();
  if (!m) raise(ErrorKind::Io, "failed writing '" + files.back().string() + "'");
  return files;
}

}  // namespace viscofe::cli
