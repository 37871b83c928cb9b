#include "viscofe/matpoint.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "viscofe/constitutive.hpp"
#include "viscofe/errors.hpp"

namespace viscofe {
namespace {

constexpr double kTimeSnap = 1e-12;

Mat3 isochoric_uniaxial(double l) {
  Mat3 F = Mat3::Zero();
  F(0, 0) = F(1, 1) = 1.0 / std::sqrt(l);
  F(2, 2) = l;
  return F;
}

Mat3 axial_only(double l) {
  Mat3 F = Mat3::Identity();
  F(2, 2) = l;
  return F;
}

LoadProgram from_knots(ControlMode mode, const std::vector<std::pair<double, double>>& knots, Mat3 (*make)(double)) {
  if (knots.empty() || knots.front().first != 0.0 || knots.front().second != 1.0)
    raise(ErrorKind::Contract, "load program must start at (t = 0, F33 = 1)");
  LoadProgram prog(mode);
  for (std::size_t i = 1; i < knots.size(); ++i)
    prog.add_segment(knots[i].first - knots[i - 1].first, make(knots[i].second));
  return prog;
}

// Drives a generic step function over the program with breakpoint and output
// snapping, halving the step after StepTooLarge or NonConvergence.
template <class StepFn, class SampleFn>
void march(const LoadProgram& program, const MatpointOptions& opt, PointTrajectory& traj, StepFn&& try_step,
           SampleFn&& record, std::function<double()> suggest) {
  const double t_end = program.end_time();
  const auto& bps = program.breakpoints();
  double t = 0.0;
  long n_out = 0;
  record();
  while (t < t_end - kTimeSnap * std::max(1.0, t_end)) {
    double target = t_end;
    for (double b : bps)
      if (b > t + kTimeSnap) {
        target = std::min(target, b);
        break;
      }
    if (opt.output_interval > 0.0)
      target = std::min(target, static_cast<double>(n_out + 1) * opt.output_interval);
    double dt = std::min(opt.dt_max, target - t);
    if (opt.adaptive) dt = std::min(dt, suggest());
    if (t + dt > target - kTimeSnap * std::max(1.0, target)) dt = target - t;

    double accepted = 0.0;
    for (int h = 0;; ++h) {
      try {
        const double t_next = (dt == target - t) ? target : t + dt;
        try_step(t, t_next);
        accepted = t_next;
        break;
      } catch (const Error& e) {
        const bool retry = e.kind() == ErrorKind::StepTooLarge || e.kind() == ErrorKind::NonConvergence;
        if (!retry) throw;
        if (h >= opt.max_halvings)
          raise(e.kind(), "step at t = " + std::to_string(t) + " failed after " + std::to_string(opt.max_halvings) +
                              " halvings: " + e.what());
        dt *= 0.5;
      }
    }
    t = accepted;
    ++traj.steps;
    bool output_due = false;
    if (opt.output_interval > 0.0) {
      const double next_out = static_cast<double>(n_out + 1) * opt.output_interval;
      if (std::abs(t - next_out) <= kTimeSnap * std::max(1.0, t)) {
        ++n_out;
        output_due = true;
      }
    } else {
      output_due = true;
    }
    const bool at_end = t >= t_end - kTimeSnap * std::max(1.0, t_end);
    if (at_end) t = t_end;
    if (output_due || at_end) {
      if (traj.samples.empty() || traj.samples.back().t < t) record();
    }
  }
}

double rel_change(const Sym3& a, const Sym3& b) { return (a - b).norm() / b.norm(); }

}  // namespace

LoadProgram LoadProgram::uniaxial(const std::vector<std::pair<double, double>>& knots) {
  return from_knots(ControlMode::UniaxialStress, knots, &axial_only);
}

LoadProgram LoadProgram::isochoric(const std::vector<std::pair<double, double>>& knots) {
  LoadProgram prog = from_knots(ControlMode::PrescribedF, knots, &isochoric_uniaxial);
  prog.isochoric_ = true;
  return prog;
}

void LoadProgram::add_segment(double duration, const Mat3& F_end) {
  if (!(duration > 0.0)) raise(ErrorKind::Contract, "load segment duration must be positive");
  if (mode_ == ControlMode::PrescribedF && !(F_end.determinant() > 0.0))
    raise(ErrorKind::InvalidDeformation, "load segment end F must have positive determinant");
  if (mode_ == ControlMode::UniaxialStress && !(F_end(2, 2) > 0.0))
    raise(ErrorKind::InvalidDeformation, "load segment end F33 must be positive");
  if (isochoric_ && (F_end - isochoric_uniaxial(F_end(2, 2))).norm() > 1e-12)
    raise(ErrorKind::Contract, "isochoric program segments must end at diag(l^-1/2, l^-1/2, l)");
  times_.push_back(times_.back() + duration);
  F_.push_back(F_end);
}

Mat3 LoadProgram::F_at(double t) const {
  if (t <= 0.0) return F_.front();
  if (t >= times_.back()) return F_.back();
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin());
  const double s = (t - times_[i - 1]) / (times_[i] - times_[i - 1]);
  if (isochoric_) return isochoric_uniaxial((1.0 - s) * F_[i - 1](2, 2) + s * F_[i](2, 2));
  return (1.0 - s) * F_[i - 1] + s * F_[i];
}

PointTrajectory run_prescribed_F(const LoadProgram& program, const MaterialParams& p, const MatpointOptions& opt) {
  if (program.mode() != ControlMode::PrescribedF)
    raise(ErrorKind::Contract, "run_prescribed_F needs a prescribed-F program");
  p.validate();
  PointTrajectory traj;
  double t_cur = 0.0;
  Sym3 Dv = Sym3::identity();

  auto record = [&] {
    PointSample s;
    s.t = t_cur;
    s.F = program.F_at(t_cur);
    s.Dv = Dv;
    const double J = s.F.determinant();
    if (p.incompressible()) {
      if (std::abs(J - 1.0) > 1e-10)
        raise(ErrorKind::InvalidDeformation, "kappa = inf needs det F = 1, got " + std::to_string(J));
      s.q = 0.0;
      s.S = piola_stress_hybrid(s.F, Dv, 0.0, p);
    } else {
      s.q = p.kappa * (J - 1.0);
      s.S = piola_stress_compressible(s.F, Dv, p);
    }
    s.T = cauchy_stress(s.F, Dv, s.q, p).T;
    s.dissipation = dissipation_rate(s.F, Dv, p);
    traj.samples.push_back(s);
  };
  auto step = [&](double t0, double t1) {
    RKStepInput in{program.F_at(t0), program.F_at(t1), Dv, t1 - t0};
    const Sym3 next = rk5_step(in, p);
    Dv = next;
    t_cur = t1;
    ++traj.rk_steps;
    traj.max_det_error = std::max(traj.max_det_error, std::abs(Dv.det() - 1.0));
  };
  auto suggest = [&] { return suggest_dt(program.F_at(t_cur), Dv, p, opt.limits); };
  march(program, opt, traj, step, record, suggest);
  return traj;
}

PointSample sample_uniaxial(const UniaxialState& st, const MaterialParams& p) {
  PointSample s;
  s.t = st.t;
  s.F = st.F();
  s.Dv = st.Dv;
  s.q = st.q;
  s.S = piola_stress_hybrid(s.F, st.Dv, st.q, p);
  s.T = cauchy_stress(s.F, st.Dv, st.q, p).T;
  s.dissipation = dissipation_rate(s.F, st.Dv, p);
  return s;
}

UniaxialState staggered_step(const UniaxialState& prev, double lambda3, double dt, const MaterialParams& p,
                             const MatpointOptions& opt, StaggeredReport* report) {
  const bool incompressible = p.incompressible();
  const double scale = p.shear_modulus_eq();

  UniaxialState cur = prev;
  cur.t = prev.t + dt;
  cur.lambda3 = lambda3;
  if (incompressible) {
    cur.lambda1 = cur.lambda2 = 1.0 / std::sqrt(lambda3);
  } else {
    const double f = std::sqrt(prev.lambda3 / lambda3);
    cur.lambda1 = prev.lambda1 * f;
    cur.lambda2 = prev.lambda2 * f;
  }

  // Unknowns: (lambda1, lambda2) for finite kappa, q for kappa = inf.
  using Vec = Eigen::VectorXd;
  const int n = incompressible ? 1 : 2;
  auto unpack = [&](const Vec& z, UniaxialState& s) {
    if (incompressible) {
      s.q = z[0];
    } else {
      s.lambda1 = z[0];
      s.lambda2 = z[1];
      s.q = p.kappa * (z[0] * z[1] * s.lambda3 - 1.0);
    }
  };
  auto pack = [&](const UniaxialState& s) {
    Vec z(n);
    if (incompressible) {
      z[0] = s.q;
    } else {
      z[0] = s.lambda1;
      z[1] = s.lambda2;
    }
    return z;
  };
  auto residual = [&](const Vec& z, const Sym3& Dv) {
    UniaxialState s = cur;
    unpack(z, s);
    const Mat3 S = piola_stress_hybrid(s.F(), Dv, s.q, p);
    Vec r(n);
    if (incompressible) {
      r[0] = 0.5 * (S(0, 0) + S(1, 1));
    } else {
      r[0] = S(0, 0);
      r[1] = S(1, 1);
    }
    return r;
  };

  Vec z = pack(cur);
  Sym3 Dv = prev.Dv;
  const double r0 = residual(z, Dv).norm();
  // q = kappa (J - 1) carries roundoff of order kappa * eps, which bounds the
  // attainable residual for stiff bulk moduli.
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor_abs = 1e-13 * scale + (incompressible ? 0.0 : 16.0 * eps * p.kappa);
  const double thr = r0 > 0.0 ? std::max(opt.tol1 * r0, floor_abs) : 1e-10 * scale;

  Mat3 F_last_rk;
  bool have_rk = false;
  int newton = 0, rk_calls = 0;
  std::vector<double> history{r0};
  for (int it = 1;; ++it) {
    const Vec r = residual(z, Dv);
    if (r.norm() > thr) {
      if (++newton > opt.max_newton)
        raise(ErrorKind::NonConvergence, "uniaxial Newton exceeded " + std::to_string(opt.max_newton) + " iterations");
      Eigen::MatrixXd Jac(n, n);
      for (int j = 0; j < n; ++j) {
        const double h = incompressible ? 1e-6 * std::max(scale, std::abs(z[j])) : 1e-7 * std::max(1.0, std::abs(z[j]));
        Vec zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        Jac.col(j) = (residual(zp, Dv) - residual(zm, Dv)) / (2.0 * h);
      }
      const Vec dz = Jac.fullPivLu().solve(-r);
      if (!dz.allFinite()) raise(ErrorKind::NonConvergence, "uniaxial Newton produced a non-finite update");
      z += dz;
    }
    unpack(z, cur);
    const Mat3 F = cur.F();
    if (!(F.determinant() > 0.0)) raise(ErrorKind::StepTooLarge, "lateral stretch iterate lost positivity");

    double dDv = 0.0;
    if (!have_rk || F != F_last_rk) {
      const Sym3 next = rk5_step({prev.F(), F, prev.Dv, dt}, p);
      dDv = rel_change(next, Dv);
      Dv = next;
      F_last_rk = F;
      have_rk = true;
      ++rk_calls;
    }
    const double rn = residual(z, Dv).norm();
    history.push_back(rn);
    if (rn <= thr && dDv <= opt.tol2) {
      cur.Dv = Dv;
      if (report) {
        report->iterations = it;
        report->rk_calls = rk_calls;
        report->residual_history = history;
      }
      return cur;
    }
    if (it >= opt.max_staggered) {
      std::string msg = "staggered scheme did not converge in " + std::to_string(opt.max_staggered) +
                        " iterations; residual history:";
      for (double h : history) msg += " " + std::to_string(h);
      raise(ErrorKind::NonConvergence, msg);
    }
  }
}

PointTrajectory run_uniaxial_stress(const LoadProgram& program, const MaterialParams& p, const MatpointOptions& opt) {
  if (program.mode() != ControlMode::UniaxialStress)
    raise(ErrorKind::Contract, "run_uniaxial_stress needs a uniaxial-stress program");
  p.validate();
  PointTrajectory traj;
  UniaxialState state;

  auto record = [&] { traj.samples.push_back(sample_uniaxial(state, p)); };
  auto step = [&](double t0, double t1) {
    StaggeredReport rep;
    const UniaxialState next = staggered_step(state, program.F33_at(t1), t1 - t0, p, opt, &rep);
    state = next;
    state.t = t1;
    traj.rk_steps += rep.rk_calls;
    traj.max_staggered_iterations = std::max(traj.max_staggered_iterations, rep.iterations);
    traj.max_det_error = std::max(traj.max_det_error, std::abs(state.Dv.det() - 1.0));
  };
  auto suggest = [&] { return suggest_dt(state.F(), state.Dv, p, opt.limits); };
  march(program, opt, traj, step, record, suggest);
  return traj;
}

}  // namespace viscofe
