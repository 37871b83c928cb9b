#include "viscofe/problems.hpp"

#include <algorithm>
#include <chrono>

#include "viscofe/constitutive.hpp"
#include "viscofe/errors.hpp"
#include "viscofe/quadrature.hpp"

namespace viscofe {

BVPConfig patch_test_config(const MaterialParams& p, const LoadProgram& program, std::vector<double> time_grid,
                            const SolverOptions& opt) {
  BVPConfig cfg;
  cfg.materials = {p};
  cfg.time_grid = std::move(time_grid);
  cfg.solver = opt;
  cfg.dirichlet.push_back({"z0", {false, false, true}, Mat3::Identity(), {}});
  cfg.dirichlet.push_back({"z1", {false, false, true}, Mat3::Identity(),
                           [program](double t, const Vec3&) { return Vec3(0.0, 0.0, program.F33_at(t) - 1.0); }});
  cfg.dirichlet.push_back({"x0", {true, false, false}, Mat3::Identity(), {}});
  cfg.dirichlet.push_back({"y0", {false, true, false}, Mat3::Identity(), {}});
  return cfg;
}

namespace {

PatchSample sample_patch(const FESolver& s) {
  const auto& rule = tet_rule_deg5();
  PatchSample out;
  out.t = s.time();
  Mat3 Fm = Mat3::Zero();
  double vol = 0.0, S33 = 0.0, T33 = 0.0, D = 0.0, q = 0.0;
  const std::size_t ne = s.mesh().n_elements();
  std::vector<double> s33(s.n_qp());
  // Volume weights from the reference Jacobian.
  std::vector<double> w(s.n_qp());
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& el = s.mesh().elements[e];
    for (int g = 0; g < FESolver::kQpPerElement; ++g) {
      Eigen::Matrix<double, 10, 1> N;
      Eigen::Matrix<double, 10, 3> dN;
      tet10_shape(rule[g].L, N, dN);
      Mat3 J0 = Mat3::Zero();
      for (int a = 0; a < 10; ++a) J0 += s.mesh().X[el[a]] * dN.row(a);
      const std::size_t k = e * FESolver::kQpPerElement + g;
      w[k] = rule[g].w * J0.determinant();
      const QPState& st = s.qp(static_cast<int>(e), g);
      s33[k] = piola_stress_hybrid(st.F, st.Dv, st.q, s.material(static_cast<int>(e)))(2, 2);
      Fm += w[k] * st.F;
      S33 += w[k] * s33[k];
      const MaterialParams& p = s.material(static_cast<int>(e));
      T33 += w[k] * cauchy_stress(st.F, st.Dv, st.q, p).T(2, 2);
      D += w[k] * dissipation_rate(st.F, st.Dv, p);
      q += w[k] * st.q;
      vol += w[k];
    }
  }
  Fm /= vol;
  out.S33 = S33 / vol;
  out.T33 = T33 / vol;
  out.dissipation = D / vol;
  out.q = q / vol;
  out.F33 = Fm(2, 2);
  out.lambda_lat = Fm(0, 0);
  for (std::size_t k = 0; k < s.n_qp(); ++k) {
    out.F_spread = std::max(out.F_spread, (s.qp_states()[k].F - Fm).cwiseAbs().maxCoeff());
    if (out.S33 != 0.0) out.S33_spread = std::max(out.S33_spread, std::abs(s33[k] - out.S33) / std::abs(out.S33));
  }
  out.det_error = s.max_det_error();
  return out;
}

}  // namespace

std::vector<PatchSample> run_patch_test(const Mesh& mesh, const BVPConfig& cfg) {
  FESolver solver(mesh, cfg);
  std::vector<PatchSample> out{sample_patch(solver)};
  solver.run([&](const FESolver& s) { out.push_back(sample_patch(s)); });
  return out;
}

BVPConfig shell_fe_config(const MaterialParams& p, const ShellGeometry& g, std::vector<double> time_grid,
                          const SolverOptions& opt, const Mat3& rotation) {
  g.validate();
  BVPConfig cfg;
  cfg.materials = {p};
  cfg.time_grid = std::move(time_grid);
  cfg.solver = opt;
  const Mat3 Q = rotation;
  // Local components of u' = Q (X + u) - X in the frame Q are u + X - Q^T X.
  auto rotated = [Q](const Vec3& u, const Vec3& X) -> Vec3 { return u + X - Q.transpose() * X; };
  cfg.dirichlet.push_back({"outer", {true, true, true}, Q, [g, rotated](double t, const Vec3& X) {
                             return rotated((g.b_at(t) / g.B - 1.0) * X, X);
                           }});
  const char* planes[3] = {"sym_x", "sym_y", "sym_z"};
  for (int d = 0; d < 3; ++d) {
    std::array<bool, 3> fixed{false, false, false};
    fixed[d] = true;
    cfg.dirichlet.push_back({planes[d], fixed, Q, [rotated](double, const Vec3& X) { return rotated(Vec3::Zero(), X); }});
  }
  // The outer condition wins on the shared edges: it is listed first, so move it last.
  std::rotate(cfg.dirichlet.begin(), cfg.dirichlet.begin() + 1, cfg.dirichlet.end());
  return cfg;
}

FESolver make_shell_solver(const Mesh& mesh, const BVPConfig& cfg, const Mat3& rotation) {
  FESolver solver(mesh, cfg);
  if (!rotation.isIdentity(0.0)) solver.set_initial_displacement([&](const Vec3& X) -> Vec3 { return rotation * X - X; });
  return solver;
}

std::vector<ShellSample> run_shell_fe(const Mesh& mesh, const BVPConfig& cfg, const ShellGeometry& g,
                                      const Mat3& rotation) {
  FESolver solver = make_shell_solver(mesh, cfg, rotation);
  std::vector<ShellSample> out{{0.0, g.b_at(0.0), outer_pressure_fe(solver, "outer", rotation)}};
  solver.run([&](const FESolver& s) { out.push_back({s.time(), g.b_at(s.time()), outer_pressure_fe(s, "outer", rotation)}); });
  return out;
}

double max_element_volume_error(const FESolver& solver) {
  const auto& rule = tet_rule_deg5();
  double worst = 0.0;
  for (std::size_t e = 0; e < solver.mesh().n_elements(); ++e) {
    const auto& el = solver.mesh().elements[e];
    double vol = 0.0, err = 0.0;
    for (int g = 0; g < FESolver::kQpPerElement; ++g) {
      Eigen::Matrix<double, 10, 1> N;
      Eigen::Matrix<double, 10, 3> dN;
      tet10_shape(rule[g].L, N, dN);
      Mat3 J0 = Mat3::Zero();
      for (int a = 0; a < 10; ++a) J0 += solver.mesh().X[el[a]] * dN.row(a);
      const double w = rule[g].w * J0.determinant();
      err += w * (solver.qp(static_cast<int>(e), g).F.determinant() - 1.0);
      vol += w;
    }
    worst = std::max(worst, std::abs(err / vol));
  }
  return worst;
}

double max_pressure_patch_volume_error(const FESolver& solver) {
  const auto& rule = tet_rule_deg5();
  const Mesh& m = solver.mesh();
  std::vector<double> num(m.n_pressure, 0.0), den(m.n_pressure, 0.0);
  for (std::size_t e = 0; e < m.n_elements(); ++e) {
    const auto& el = m.elements[e];
    for (int g = 0; g < FESolver::kQpPerElement; ++g) {
      Eigen::Matrix<double, 10, 1> N;
      Eigen::Matrix<double, 10, 3> dN;
      tet10_shape(rule[g].L, N, dN);
      Mat3 J0 = Mat3::Zero();
      for (int a = 0; a < 10; ++a) J0 += m.X[el[a]] * dN.row(a);
      const double w = rule[g].w * J0.determinant();
      const double c = solver.qp(static_cast<int>(e), g).F.determinant() - 1.0;
      for (int v = 0; v < 4; ++v) {
        num[m.pressure_index[el[v]]] += w * rule[g].L[v] * c;
        den[m.pressure_index[el[v]]] += w * rule[g].L[v];
      }
    }
  }
  double worst = 0.0;
  for (int v = 0; v < m.n_pressure; ++v) worst = std::max(worst, std::abs(num[v] / den[v]));
  return worst;
}

double exact_shell_pressure(const MaterialParams& p, const ShellGeometry& g, double t, int n) {
  ShellExact exact(g, p, n, DtLimits{0.01, 1e-12, 1e30});
  exact.advance_to(t);
  return exact.outer_pressure();
}

std::vector<ConvergenceRow> convergence_study(const std::vector<std::pair<int, int>>& levels, const MaterialParams& p,
                                              const ShellGeometry& g, double t_eval, double P_exact,
                                              const SolverOptions& opt) {
  std::vector<ConvergenceRow> rows;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto [nr, nt] = levels[i];
    ConvergenceRow row;
    row.level = static_cast<int>(i);
    row.nr = nr;
    row.ntheta = nt;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Mesh mesh = generate_shell_mesh(nr, nt, g.A, g.B);
      row.h = mesh.mean_size();
      FESolver solver(mesh, shell_fe_config(p, g, {t_eval}, opt));
      row.n_dof = solver.dofs().n_free();
      solver.advance_to(t_eval);
      row.P_h = outer_pressure_fe(solver);
      row.steps = solver.steps();
    } catch (const Error& e) {
      raise(e.kind(), "level " + std::to_string(i) + " (nr = " + std::to_string(nr) + ", ntheta = " +
                          std::to_string(nt) + "): " + e.what());
    }
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.P_exact = P_exact;
    row.eps_P = std::abs(P_exact - row.P_h) / std::abs(P_exact);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace viscofe
