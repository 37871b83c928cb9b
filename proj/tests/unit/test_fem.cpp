#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <Eigen/Geometry>

#include "random_states.hpp"
#include "viscofe/constitutive.hpp"
#include "viscofe/errors.hpp"
#include "viscofe/fem.hpp"
#include "viscofe/matpoint.hpp"
#include "viscofe/problems.hpp"

using namespace viscofe;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Contract;
}

std::set<int> boundary_nodes(const Mesh& m) {
  std::set<int> out;
  for (const auto& [name, facets] : m.facet_sets)
    for (int n : m.set_nodes(name)) out.insert(n);
  return out;
}

// Free-free tangent against central differences of the residual.
double tangent_fd_error(const FESolver& s, const Eigen::VectorXd& x, const std::vector<Sym3>& Dv) {
  const Assembly a = s.assemble(x, 0.0, true, &Dv);
  const Eigen::MatrixXd K(a.tangent);
  const DofMap& d = s.dofs();
  double worst = 0.0;
  const double scale = K.cwiseAbs().maxCoeff();
  for (int col = 0; col < d.n_dofs(); ++col) {
    const int c = d.equation(col);
    if (c < 0) continue;
    const double h = 1e-6;
    Eigen::VectorXd xp = x, xm = x;
    xp[col] += h;
    xm[col] -= h;
    const Eigen::VectorXd dr = (s.assemble(xp, 0.0, false, &Dv).residual - s.assemble(xm, 0.0, false, &Dv).residual) / (2 * h);
    for (int row = 0; row < d.n_dofs(); ++row) {
      const int r = d.equation(row);
      if (r < 0) continue;
      worst = std::max(worst, std::abs(dr[row] - K(r, c)) / scale);
    }
  }
  return worst;
}

Eigen::VectorXd random_state(const FESolver& s, oracle::StateSampler& rng, double amp, double qamp) {
  Eigen::VectorXd x(s.dofs().n_dofs());
  for (int i = 0; i < 3 * s.dofs().n_nodes(); ++i) x[i] = rng.uniform(-amp, amp);
  for (int i = 3 * s.dofs().n_nodes(); i < x.size(); ++i) x[i] = rng.uniform(-qamp, qamp);
  return x;
}

SolverOptions fixed_steps(double dt, double tol1 = 1e-8) {
  SolverOptions o;
  o.adaptive = false;
  o.dt_max = dt;
  o.tol1 = tol1;
  return o;
}

}  // namespace

TEST(DofMap, NumbersFreeDofsAndLetsLaterConditionsWin) {
  const Mesh m = generate_cube_mesh(1);
  const Mat3 R = Eigen::AngleAxisd(0.3, Vec3::UnitZ()).toRotationMatrix();
  std::vector<DirichletBC> bcs{{"z0", {true, true, true}, Mat3::Identity(), {}},
                               {"z0", {false, false, true}, Mat3::Identity(), {}},
                               {"z1", {true, false, false}, R, {}}};
  const DofMap d(m, bcs);
  EXPECT_EQ(d.n_dofs(), 3 * 27 + 8);
  EXPECT_EQ(static_cast<int>(d.constraints().size()), 3 * 9 + 9);
  EXPECT_EQ(d.n_free(), d.n_dofs() - static_cast<int>(d.constraints().size()));
  EXPECT_TRUE(d.has_rotated_frames());
  for (const auto& c : d.constraints())
    if (c.dof / 3 == m.set_nodes("z0")[0] && c.component == 2) EXPECT_EQ(c.bc, 1);
  // x1 shares an edge with z0, where the frames would differ.
  bcs[2].set = "x1";
  EXPECT_EQ(kind_of([&] { DofMap(m, bcs); }), ErrorKind::Contract);
}

TEST(BVPConfig, RejectsInconsistentInput) {
  const Mesh m = generate_cube_mesh(1);
  BVPConfig cfg = patch_test_config(vhb4910().with_kappa(14.62), LoadProgram::uniaxial({{0, 1}, {10, 1.5}}), {1, 2});
  EXPECT_NO_THROW(cfg.validate(m));
  auto bad = cfg;
  bad.time_grid = {2, 1};
  EXPECT_EQ(kind_of([&] { bad.validate(m); }), ErrorKind::Contract);
  bad = cfg;
  bad.dirichlet[0].set = "nowhere";
  EXPECT_EQ(kind_of([&] { bad.validate(m); }), ErrorKind::Contract);
  bad = cfg;
  bad.dirichlet[0].frame = 2.0 * Mat3::Identity();
  EXPECT_EQ(kind_of([&] { bad.validate(m); }), ErrorKind::Contract);
  bad = cfg;
  bad.materials[0].mu1 = -1.0;
  EXPECT_EQ(kind_of([&] { bad.validate(m); }), ErrorKind::Parameter);
  bad = cfg;
  bad.solver.tol1 = 0.0;
  EXPECT_EQ(kind_of([&] { bad.validate(m); }), ErrorKind::Parameter);
  bad = cfg;
  bad.dirichlet.clear();
  FESolver s(m, bad);
  EXPECT_EQ(kind_of([&] { s.solve_step(1.0); }), ErrorKind::Contract);
}

TEST(Assembly, ReferenceStateIsEquilibrated) {
  FESolver s(generate_cube_mesh(2, 0.2, 3), patch_test_config(vhb4910().with_kappa(14.62), LoadProgram::uniaxial({{0, 1}, {1, 1.05}}), {1}));
  const Assembly a = s.assemble(s.state(), 0.0, true);
  EXPECT_LT(a.residual.cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_EQ(a.tangent.rows(), s.dofs().n_free());
}

class TangentFD : public ::testing::TestWithParam<double> {};

TEST_P(TangentFD, MatchesCentralDifferences) {
  const double kappa = GetParam();
  const Mesh m = generate_cube_mesh(1, 0.0);
  BVPConfig cfg;
  cfg.materials = {vhb4910().with_kappa(kappa)};
  // Rotated but unconstrained frames on one face exercise the frame transform.
  cfg.dirichlet.push_back({"x1", {false, false, false}, oracle::StateSampler(7).rotation(), {}});
  FESolver s(m, cfg);
  oracle::StateSampler rng(11);
  std::vector<Sym3> Dv(s.n_qp());
  for (auto& d : Dv) d = rng.viscous_state(0.7, 1.4);
  const Eigen::VectorXd x = random_state(s, rng, 0.06, 5.0);
  EXPECT_LT(tangent_fd_error(s, x, Dv), 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Kappa, TangentFD, ::testing::Values(14.62, kInfiniteKappa));

TEST(Assembly, HomogeneousFieldHasZeroInteriorResidual) {
  const Mesh m = generate_cube_mesh(3, 0.3, 5);
  const MaterialParams p = vhb4910().with_kappa(14.62);
  BVPConfig cfg;
  cfg.materials = {p};
  FESolver s(m, cfg);
  oracle::StateSampler rng(3);
  const Mat3 F = rng.deformation(0.8, 1.3);
  const Sym3 dv = rng.viscous_state(0.7, 1.4);
  const std::vector<Sym3> Dv(s.n_qp(), dv);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.dofs().n_dofs());
  for (int n = 0; n < s.dofs().n_nodes(); ++n) x.segment<3>(3 * n) = (F - Mat3::Identity()) * m.X[n];
  const double q = p.kappa * (F.determinant() - 1.0);
  x.tail(s.dofs().n_pressure()).setConstant(q);
  const Assembly a = s.assemble(x, 0.0, false, &Dv);
  const double scale = p.shear_modulus_eq();
  const auto bnd = boundary_nodes(m);
  double worst = 0.0;
  for (int n = 0; n < s.dofs().n_nodes(); ++n)
    if (!bnd.count(n)) worst = std::max(worst, a.residual.segment<3>(3 * n).cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 1e-10 * scale);
  EXPECT_LT(a.residual.tail(s.dofs().n_pressure()).cwiseAbs().maxCoeff(), 1e-13);
  // Boundary nodal forces sum to zero as well.
  Vec3 total = Vec3::Zero();
  for (int n = 0; n < s.dofs().n_nodes(); ++n) total += a.residual.segment<3>(3 * n);
  EXPECT_LT(total.norm(), 1e-10 * scale);
}

TEST(Solver, ZeroIncrementLeavesStateUnchanged) {
  FESolver s(generate_cube_mesh(1), patch_test_config(vhb4910().with_kappa(14.62), LoadProgram::uniaxial({{0, 1}, {10, 1.5}}), {10}));
  const StepReport rep = s.solve_step(0.0);
  EXPECT_EQ(rep.iterations, 1);
  EXPECT_EQ(rep.newton, 0);
  EXPECT_EQ(s.state().norm(), 0.0);
  for (const auto& st : s.qp_states()) EXPECT_EQ((st.Dv.matrix() - Mat3::Identity()).norm(), 0.0);
}

TEST(Solver, ShortPatchTestMatchesMaterialPoint) {
  const MaterialParams p = vhb4910().with_kappa(14.62);
  const LoadProgram prog = LoadProgram::uniaxial({{0, 1}, {40, 3}, {80, 1}});
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i);
  const auto fe = run_patch_test(generate_cube_mesh(1), patch_test_config(p, prog, grid, fixed_steps(1.0, 1e-11)));
  MatpointOptions mo;
  mo.adaptive = false;
  mo.dt_max = 1.0;
  mo.output_interval = 1.0;
  mo.tol1 = 1e-11;
  const auto mp = run_uniaxial_stress(prog, p, mo);
  ASSERT_EQ(fe.size(), 11u);
  for (std::size_t i = 1; i < fe.size(); ++i) {
    ASSERT_DOUBLE_EQ(fe[i].t, mp.samples[i].t);
    EXPECT_NEAR(fe[i].S33, mp.samples[i].S(2, 2), 1e-8 * std::abs(mp.samples[i].S(2, 2)));
    EXPECT_NEAR(fe[i].lambda_lat, mp.samples[i].F(0, 0), 1e-8);
    EXPECT_LT(fe[i].F_spread, 1e-8);
  }
  EXPECT_LE(fe.back().det_error, 1e-11);
}

TEST(Solver, ReactionBalancesAppliedLoad) {
  const Mesh m = generate_cube_mesh(1, 0.0);
  BVPConfig cfg;
  cfg.materials = {vhb4910().with_kappa(14.62)};
  cfg.dirichlet.push_back({"z0", {true, true, true}, Mat3::Identity(), {}});
  cfg.neumann.push_back({"z1", [](double t, const Vec3&) -> Vec3 { return Vec3(0.2, -0.1, 1.0) * std::min(t, 1.0); }});
  cfg.body_force = [](double, const Vec3& X) -> Vec3 { return Vec3(0.0, 0.0, -0.5 * (1.0 + X.x())); };
  cfg.time_grid = {1.0, 2.0};
  cfg.solver = fixed_steps(0.5, 1e-12);
  FESolver s(m, cfg);
  s.run({});
  const Vec3 load = s.applied_load();
  EXPECT_NEAR(load.z(), 1.0 - 0.75, 1e-13);
  EXPECT_LT((s.reaction("z0") + load).norm(), 1e-8 * load.norm());
}

TEST(Solver, StepExhaustionIsReported) {
  SolverOptions o = fixed_steps(5.0);
  o.max_staggered = 1;
  o.max_halvings = 2;
  FESolver s(generate_cube_mesh(1), patch_test_config(vhb4910().with_kappa(14.62), LoadProgram::uniaxial({{0, 1}, {10, 1.5}}), {10}, o));
  try {
    s.advance_to(10.0);
    FAIL() << "expected StepTooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StepTooLarge);
    EXPECT_NE(std::string(e.what()).find("exhausted"), std::string::npos);
  }
  EXPECT_EQ(s.time(), 0.0);
  EXPECT_EQ(s.steps(), 0);
}

TEST(Solver, AdaptiveStepsFollowSuggestion) {
  SolverOptions o;
  o.limits.safety = 0.5;
  FESolver s(generate_cube_mesh(1), patch_test_config(vhb4910().with_kappa(14.62), LoadProgram::uniaxial({{0, 1}, {40, 3}}), {4}, o));
  double prev = 0.0;
  s.advance_to(4.0, [&](const FESolver& sv, const StepReport& rep) {
    EXPECT_NEAR(rep.t, prev + rep.dt, 1e-12);
    EXPECT_GT(rep.dt, 0.0);
    prev = sv.time();
  });
  EXPECT_EQ(s.time(), 4.0);
  EXPECT_GT(s.steps(), 1);
}

TEST(Facets, HydrostaticAverageOnSphere) {
  const double sigma = -3.7;
  double prev = std::numeric_limits<double>::infinity();
  for (int nt : {2, 4, 8}) {
    const Mesh m = generate_shell_mesh(1, nt);
    auto along = [&](const Vec3& d, const Vec3& N) { return (sigma * N).dot(d); };
    EXPECT_NEAR(facet_average(m, "outer", [&](int, const std::array<double, 4>&, const Vec3&, const Vec3& N) {
                  return along(N, N);
                }),
                sigma, 1e-14);
    EXPECT_NEAR(facet_average(m, "sym_z", [](int, const std::array<double, 4>&, const Vec3&, const Vec3& N) { return N.z(); }),
                -1.0, 1e-14);
    // With the radial direction X / R the only error is the facet geometry.
    const double err = std::abs(facet_average(m, "outer", [&](int, const std::array<double, 4>&, const Vec3& X, const Vec3& N) {
                                  return along(X / X.norm(), N);
                                }) - sigma);
    EXPECT_LT(err, 1e-2 * std::abs(sigma));
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(Facets, OuterPressureOfHomogeneousState) {
  const MaterialParams p = vhb4910().with_kappa(14.62);
  const ShellGeometry g = ShellGeometry::ramp(0.9, 1.0, 0.05, 10.0);
  const Mat3 F = oracle::StateSampler(5).deformation(0.9, 1.1);
  const Mat3 S = piola_stress_hybrid(F, Sym3::identity(), 0.0, p);
  // Octant means of n_i n_j over the unit sphere: 1/3 on the diagonal, 2 / (3 pi) off it.
  double expected = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) expected += S(i, j) * (i == j ? 1.0 / 3.0 : 2.0 / (3.0 * M_PI));
  double prev = std::numeric_limits<double>::infinity();
  for (int nt : {2, 4, 8}) {
    FESolver s(generate_shell_mesh(1, nt, g.A, g.B), shell_fe_config(p, g, {1.0}));
    EXPECT_EQ(outer_pressure_fe(s), 0.0);
    s.set_initial_displacement([&](const Vec3& X) -> Vec3 { return (F - Mat3::Identity()) * X; });
    const double err = std::abs(outer_pressure_fe(s) - expected) / std::abs(expected);
    EXPECT_LT(err, 2e-2);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(Shell, ObjectiveUnderSuperposedRotation) {
  const MaterialParams p = vhb4910();
  const ShellGeometry g = ShellGeometry::ramp(0.9, 1.0, 0.05, 10.0);
  const Mesh m = generate_shell_mesh(1, 2, g.A, g.B);
  const SolverOptions o = fixed_steps(1.0, 1e-11);
  const Mat3 Q = oracle::StateSampler(21).rotation();
  const auto ref = run_shell_fe(m, shell_fe_config(p, g, {1.0, 2.0, 3.0}, o), g);

  FESolver rot = make_shell_solver(m, shell_fe_config(p, g, {1.0, 2.0, 3.0}, o, Q), Q);
  std::vector<double> P;
  rot.run([&](const FESolver& s) { P.push_back(outer_pressure_fe(s, "outer", Q)); });
  ASSERT_EQ(P.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(P[i], ref[i + 1].P, 1e-9 * std::abs(ref[i + 1].P));
  EXPECT_LE(rot.max_det_error(), 1e-11);
  EXPECT_LE(max_pressure_patch_volume_error(rot), 1e-6);
  // Viscous states are referential, so they agree without rotation.
  FESolver plain(m, shell_fe_config(p, g, {3.0}, o));
  plain.advance_to(3.0);
  double dv = 0.0;
  for (std::size_t k = 0; k < plain.n_qp(); ++k)
    dv = std::max(dv, (plain.qp_states()[k].Dv.matrix() - rot.qp_states()[k].Dv.matrix()).cwiseAbs().maxCoeff());
  EXPECT_LT(dv, 1e-9);
}

TEST(Shell, IncompressibleConstraintHolds) {
  const ShellGeometry g = ShellGeometry::ramp(0.9, 1.0, 0.05, 10.0);
  for (auto [nr, nt] : {std::pair{1, 2}, std::pair{2, 4}}) {
    FESolver s(generate_shell_mesh(nr, nt, g.A, g.B), shell_fe_config(vhb4910(), g, {4.0}));
    s.advance_to(4.0);
    EXPECT_LE(max_pressure_patch_volume_error(s), 1e-6);
    // Tet-wise means only carry the discretization error of the P1 pressure space.
    EXPECT_LT(max_element_volume_error(s), 1e-2);
    EXPECT_LE(s.max_det_error(), 1e-11);
    EXPECT_GT(outer_pressure_fe(s), 0.0);
  }
}

TEST(Shell, ThreadCountDoesNotChangeResults) {
  const ShellGeometry g = ShellGeometry::ramp(0.9, 1.0, 0.05, 10.0);
  const Mesh m = generate_shell_mesh(2, 4, g.A, g.B);
  Eigen::VectorXd xs[2];
  std::vector<QPState> qs[2];
  const int threads[2] = {1, 4};
  for (int i = 0; i < 2; ++i) {
    SolverOptions o = fixed_steps(1.0);
    o.threads = threads[i];
    FESolver s(m, shell_fe_config(vhb4910(), g, {2.0}, o));
    s.advance_to(2.0);
    xs[i] = s.state();
    qs[i] = s.qp_states();
  }
  EXPECT_EQ((xs[0] - xs[1]).cwiseAbs().maxCoeff(), 0.0);
  for (std::size_t k = 0; k < qs[0].size(); ++k) ASSERT_EQ((qs[0][k].Dv.matrix() - qs[1][k].Dv.matrix()).norm(), 0.0);
}
