// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: viscofe_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "direct_inversion.hpp"
#include "random_states.hpp"
#include "reference_odes.hpp"
#include "viscofe/constitutive.hpp"
#include "viscofe/errors.hpp"
#include "viscofe/evolution.hpp"
#include "viscofe/fem.hpp"
#include "viscofe/matpoint.hpp"
#include "viscofe/problems.hpp"
#include "viscofe/shell_exact.hpp"

using namespace viscofe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mat_rel(const Mat3& a, const Mat3& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

const std::vector<std::pair<double, double>> kCycle{{0.0, 1.0}, {40.0, 3.0}, {80.0, 1.0}};

MaterialParams near_incompressible() {
  const MaterialParams p = vhb4910();
  return p.with_kappa(1e4 * (p.mu1 + p.mu2));
}

// 1. Determinant preservation over the loading/unloading cycle.
Outcome det_preservation() {
  const MaterialParams p = vhb4910();
  const LoadProgram prog = LoadProgram::isochoric(kCycle);
  const int n = 20000;
  const double dt = prog.end_time() / n;
  Sym3 Dv = Sym3::identity();
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    Dv = rk5_step({prog.F_at(k * dt), prog.F_at((k + 1) * dt), Dv, dt}, p);
    worst = std::max(worst, std::abs(Dv.det() - 1.0));
  }
  MatpointOptions opt;
  opt.limits.safety = 0.005;
  const PointTrajectory tr = run_uniaxial_stress(LoadProgram::uniaxial(kCycle), p, opt);
  const bool pass = worst <= 1e-12 && tr.max_det_error <= 1e-12 && tr.rk_steps >= 10000;
  return {pass, fmt("consecutive rk5_step: max|det Dv - 1| = %.2e over %d steps; uniaxial driver: %.2e over %ld RK "
                    "steps (bound 1e-12, >= 1e4 steps)",
                    worst, n, tr.max_det_error, tr.rk_steps)};
}

// 2. Self-convergence order of rk5_step on a ramp linear in F from an unrelaxed start.
Mat3 ramp_F(double t) {
  Mat3 F = Mat3::Zero();
  F(0, 0) = F(1, 1) = 1.0 / std::sqrt(1.5) - 0.001 * t;
  F(2, 2) = 1.5 + 0.05 * t;
  return F;
}

Sym3 integrate_ramp(double t_end, int steps, const MaterialParams& p) {
  Sym3 Dv = Sym3::identity();
  const double dt = t_end / steps;
  for (int k = 0; k < steps; ++k) Dv = rk5_step({ramp_F(k * dt), ramp_F((k + 1) * dt), Dv, dt}, p);
  return Dv;
}

Outcome integrator_order() {
  const MaterialParams p = vhb4910();
  const double tau = time_scale(Mat3::Identity(), Sym3::identity(), p);
  const double t_end = tau / 10.0;
  const Sym3 ref = integrate_ramp(t_end, 1280, p);
  std::vector<double> err;
  for (int steps : {10, 20, 40, 80}) err.push_back((integrate_ramp(t_end, steps, p) - ref).norm());
  bool pass = true;
  std::string orders;
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double order = std::log2(err[i - 1] / err[i]);
    pass = pass && order >= 4.5 && order <= 5.5;
    orders += fmt("%s%.3f", i > 1 ? ", " : "", order);
  }
  return {pass, "orders over dt = tau/100..tau/800: " + orders + " (bound [4.5, 5.5])"};
}

// 3. Tangent moduli against central differences of the Kirchhoff deviator.
Outcome tangent_consistency() {
  const MaterialParams p = vhb4910().with_kappa(14.62);
  oracle::StateSampler gen(31);
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const Mat3 F = gen.deformation(0.7, 1.6);
    const Sym3 Dv = gen.viscous_state(0.6, 1.6);
    const StressTangent st = tangent_moduli(F, Dv, F.determinant(), p);
    const auto Lfd = oracle::tangent_fd(F, Dv.matrix().inverse(), p.kappa, p);
    worst = std::max(worst, (st.L - Lfd).cwiseAbs().maxCoeff() / Lfd.cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, fmt("max relative error %.2e at 100 states (bound 1e-6)", worst)};
}

// 4. Limiting cases of the viscosity scale.
Outcome limiting_cases() {
  double relaxed = 0.0, frozen = 0.0;
  {
    const MaterialParams p = vhb4910().with_viscosity_scaled(1e-8);
    MatpointOptions opt;
    opt.output_interval = 0.5;
    // Explicit stability holds up to dt ~ 5 tau here.
    opt.limits.safety = 300.0;
    const PointTrajectory tr = run_uniaxial_stress(LoadProgram::uniaxial({{0.0, 1.0}, {4.0, 1.2}}), p, opt);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
      const auto& s = tr.samples[i];
      const double ref = oracle::hyperelastic_uniaxial_S33(s.F(2, 2), p, false);
      relaxed = std::max(relaxed, std::abs(s.S(2, 2) - ref) / std::abs(ref));
    }
  }
  {
    const MaterialParams p = vhb4910().with_viscosity_scaled(1e8);
    MatpointOptions opt;
    opt.output_interval = 1.0;
    const PointTrajectory tr = run_uniaxial_stress(LoadProgram::uniaxial({{0.0, 1.0}, {40.0, 3.0}}), p, opt);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
      const auto& s = tr.samples[i];
      const double ref = oracle::hyperelastic_uniaxial_S33(s.F(2, 2), p, true);
      frozen = std::max(frozen, std::abs(s.S(2, 2) - ref) / std::abs(ref));
    }
  }
  return {relaxed <= 1e-4 && frozen <= 1e-4,
          fmt("eta x 1e-8 vs Psi^Eq: %.2e; eta x 1e8 vs Psi^Eq + Psi^NEq: %.2e (bound 1e-4)", relaxed, frozen)};
}

// 5. Material point against the monolithic DAE oracle, and the hysteresis loop.
Outcome matpoint_oracle() {
  const MaterialParams p = near_incompressible();
  MatpointOptions opt;
  opt.output_interval = 1.0;
  opt.limits.safety = 0.01;
  const PointTrajectory tr = run_uniaxial_stress(LoadProgram::uniaxial(kCycle), p, opt);
  std::vector<double> times;
  for (const auto& s : tr.samples) times.push_back(s.t);
  const auto ref = oracle::uniaxial_dae(p, kCycle, times, 1e-11);
  double worst = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i)
    worst = std::max(worst, std::abs(tr.samples[i].S(2, 2) - ref[i].S33) / std::abs(ref[i].S33));
  double work = 0.0;
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    const auto& a = tr.samples[i - 1];
    const auto& b = tr.samples[i];
    work += 0.5 * ((a.S + b.S).cwiseProduct(b.F - a.F)).sum();
  }
  // Loading branch above the unloading branch at the same stretch.
  auto at = [&](double t) {
    for (const auto& s : tr.samples)
      if (std::abs(s.t - t) < 1e-9) return s.S(2, 2);
    return std::numeric_limits<double>::quiet_NaN();
  };
  const double gap = at(20.0) - at(60.0);
  const bool pass = worst <= 1e-5 && work >= 0.0 && gap > 0.0;
  return {pass, fmt("max relative S33 error %.2e at %zu times (bound 1e-5); loop work %.4f kPa, S33 gap at F33 = 2: "
                    "%.4f kPa",
                    worst, times.size() - 1, work, gap)};
}

// 6. Patch test on a regular and a distorted cube.
Outcome patch_test() {
  std::vector<double> grid;
  for (int i = 1; i <= 80; ++i) grid.push_back(i);
  const LoadProgram prog = LoadProgram::uniaxial(kCycle);
  bool pass = true;
  std::string detail;
  for (double kappa : {14.62, 146200.0}) {
    const MaterialParams p = vhb4910().with_kappa(kappa);
    const double bound = kappa < 100.0 ? 1e-8 : 1e-7;
    MatpointOptions mo;
    mo.adaptive = false;
    mo.dt_max = 1.0;
    mo.output_interval = 1.0;
    mo.tol1 = 1e-11;
    const PointTrajectory mp = run_uniaxial_stress(prog, p, mo);
    for (auto [n, distortion] : {std::pair{1, 0.0}, std::pair{2, 0.25}}) {
      SolverOptions so;
      so.adaptive = false;
      so.dt_max = 1.0;
      so.tol1 = 1e-11;
      const auto fe = run_patch_test(generate_cube_mesh(n, distortion), patch_test_config(p, prog, grid, so));
      double s33 = 0.0, spread = 0.0;
      for (std::size_t i = 1; i < fe.size(); ++i) {
        const double ref = mp.samples[i].S(2, 2);
        s33 = std::max(s33, std::abs(fe[i].S33 - ref) / std::abs(ref));
        spread = std::max(spread, fe[i].F_spread);
      }
      const bool ok = fe.size() == mp.samples.size() && s33 <= bound && spread <= 1e-8;
      pass = pass && ok;
      detail += fmt("%s[kappa %g, n %d, distortion %.2f: S33 %.1e (bound %.0e), F spread %.1e]",
                    detail.empty() ? "" : " ", kappa, n, distortion, s33, bound, spread);
    }
  }
  return {pass, detail + " (F bound 1e-8)"};
}

// 7. Exact shell: quadrature self-convergence and viscous stretch against a dense reference.
Outcome shell_exact() {
  const MaterialParams p = vhb4910();
  const ShellGeometry g = ShellGeometry::ramp(0.9, 1.0, 0.05, 10.0);
  auto pressure = [&](int n) {
    ShellExact shell(g, p, n);
    shell.advance_to(10.0);
    return shell.outer_pressure();
  };
  const double P100 = pressure(100), P400 = pressure(400);
  const double dP = std::abs(P100 - P400) / std::abs(P400);

  const GaussGrid grid = make_gauss_grid(0.9, 1.0, 8);
  std::vector<double> times;
  for (int i = 1; i <= 10; ++i) times.push_back(i);
  const auto hist = evolve_shell_state(grid, times, g, p, {0.01, 1e-12, 1e30});
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.R.size(); ++i) {
    const auto ref = oracle::radial_lv(p, [&](double t) { return lambda_field(grid.R[i], t, g); }, times);
    for (std::size_t k = 0; k < times.size(); ++k)
      worst = std::max(worst, std::abs(hist[k][i] - ref[k]) / ref[k]);
  }
  return {dP < 1e-8 && worst <= 1e-9,
          fmt("P(10 s) = %.12f; |P100 - P400| / P400 = %.2e (bound 1e-8); lambda_v error %.2e over 8 radii x 10 "
              "times (bound 1e-9)",
              P400, dP, worst)};
}

// 8. Finite-element convergence to the exact shell pressure.
Outcome fe_convergence() {
  const MaterialParams p = vhb4910();
  const ShellGeometry g = ShellGeometry::ramp(0.9, 1.0, 0.05, 10.0);
  const double P_exact = exact_shell_pressure(p, g, 10.0, 100);
  const auto rows = convergence_study({{1, 2}, {2, 4}, {2, 8}, {3, 12}}, p, g, 10.0, P_exact);
  bool decreasing = true;
  std::string detail = fmt("P_exact %.10f;", P_exact);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) decreasing = decreasing && rows[i].eps_P < rows[i - 1].eps_P;
    detail += fmt(" (%d,%d) %d dofs eps_P %.3e;", rows[i].nr, rows[i].ntheta, rows[i].n_dof, rows[i].eps_P);
  }
  const auto& fine = rows.back();
  const bool pass = rows.size() >= 3 && decreasing && fine.eps_P < 1e-2 && fine.n_dof <= 50000;
  return {pass, detail + " strictly decreasing, finest < 1e-2 with <= 50000 dofs"};
}

// 9. Invariants at random states.
Outcome invariants() {
  const MaterialParams inc = vhb4910();
  const MaterialParams comp = inc.with_kappa(14.62);
  MaterialParams eq_only = inc;
  eq_only.m1 = eq_only.m2 = 0.0;
  oracle::StateSampler gen(2024);
  double frame = 0.0, iso = 0.0, ang = 0.0, relax = 0.0;
  double min_diss = std::numeric_limits<double>::infinity();
  int non_monotone = 0;
  long hold_steps = 0;
  for (int n = 0; n < 1000; ++n) {
    const Mat3 F = gen.deformation(0.6, 1.8);
    const Sym3 Dv = gen.viscous_state();
    const double q = gen.uniform(-20.0, 20.0);
    const Mat3 Q = gen.rotation();
    const Sym3 DvQ = Sym3::from_matrix(Q.transpose() * Dv.matrix() * Q);

    const Mat3 Sc = piola_stress_compressible(F, Dv, comp);
    const Mat3 Sh = piola_stress_hybrid(F, Dv, q, inc);
    frame = std::max({frame, mat_rel(piola_stress_compressible(Q * F, Dv, comp), Q * Sc),
                      mat_rel(piola_stress_hybrid(Q * F, Dv, q, inc), Q * Sh)});
    iso = std::max({iso, mat_rel(piola_stress_compressible(F * Q, DvQ, comp), Sc * Q),
                    mat_rel(piola_stress_hybrid(F * Q, DvQ, q, inc), Sh * Q)});
    for (const Mat3& S : {Sc, Sh}) {
      const Mat3 SFt = S * F.transpose();
      ang = std::max(ang, (SFt - SFt.transpose()).cwiseAbs().maxCoeff() / SFt.cwiseAbs().maxCoeff());
    }
    min_diss = std::min(min_diss, dissipation_rate(F, Dv, inc));

    // Hold an isochoric F for 20 tau of the relaxed state.
    const Mat3 Fi = F / std::cbrt(F.determinant());
    const Sym3 Dv_relaxed = Sym3::from_matrix((Fi.transpose() * Fi).inverse());
    const double t_hold = 20.0 * time_scale(Fi, Dv_relaxed, inc);
    Sym3 D = Dv;
    double t = 0.0, prev = cauchy_stress(Fi, D, 0.0, inc).devTNEq.norm();
    while (t < t_hold) {
      const double dt = std::min(suggest_dt(Fi, D, inc), t_hold - t);
      D = advance_viscous_state({Fi, Fi, D, dt}, inc);
      t += dt;
      ++hold_steps;
      const double now = cauchy_stress(Fi, D, 0.0, inc).devTNEq.norm();
      if (now > prev * (1.0 + 1e-12)) ++non_monotone;
      prev = now;
    }
    relax = std::max(relax, mat_rel(piola_stress_hybrid(Fi, D, 0.0, inc), piola_stress_hybrid(Fi, D, 0.0, eq_only)));
  }
  const bool pass = frame <= 1e-12 && iso <= 1e-12 && ang <= 1e-12 && min_diss >= 0.0 && non_monotone == 0 &&
                    relax < 1e-3;
  return {pass, fmt("1000 states: frame %.1e, isotropy %.1e, S F^T skew %.1e (bounds 1e-12); min dissipation %.1e "
                    "(>= 0); hold: %d non-monotone of %ld steps, deviation from Psi^Eq after 20 tau %.1e (bound 1e-3)",
                    frame, iso, ang, min_diss, non_monotone, hold_steps, relax)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "determinant preservation", 5.0, det_preservation},
      {2, "integrator order", 10.0, integrator_order},
      {3, "tangent consistency", 5.0, tangent_consistency},
      {4, "limiting cases", 10.0, limiting_cases},
      {5, "material-point oracle", 30.0, matpoint_oracle},
      {6, "patch test", 120.0, patch_test},
      {7, "exact shell consistency", 10.0, shell_exact},
      {8, "FE convergence", 1800.0, fe_convergence},
      {9, "physics invariants", 30.0, invariants},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = wall <= c.time_limit_s;
    const bool pass = out.pass && in_time;
    if (!pass) ++failed;
    std::printf("criterion %d %s: %s | %s | %.2f s (limit %.0f s)\n", c.id, c.name, pass ? "PASS" : "FAIL",
                out.detail.c_str(), wall, c.time_limit_s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
