#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "viscofe/evolution.hpp"
#include "viscofe/material.hpp"
#include "viscofe/tensor.hpp"

namespace viscofe {

enum class ControlMode { PrescribedF, UniaxialStress };

/// Piecewise-linear history of the deformation gradient, starting at F = I, t = 0.
/// In uniaxial-stress mode only F33 is read; the lateral stretches are unknowns.
class LoadProgram {
 public:
  LoadProgram() = default;
  explicit LoadProgram(ControlMode mode) : mode_(mode) {}

  /// Uniaxial-stress program from (t, F33) knots; the first knot must be (0, 1).
  static LoadProgram uniaxial(const std::vector<std::pair<double, double>>& knots);

  /// Prescribed isochoric uniaxial program F = diag(l^-1/2, l^-1/2, l) from (t, l)
  /// knots. l is interpolated linearly, so F stays isochoric between knots.
  static LoadProgram isochoric(const std::vector<std::pair<double, double>>& knots);

  /// Appends a segment of the given duration ending at F_end.
  void add_segment(double duration, const Mat3& F_end);

  ControlMode mode() const { return mode_; }
  double end_time() const { return times_.back(); }
  /// Segment boundaries including 0 and end_time().
  const std::vector<double>& breakpoints() const { return times_; }

  /// Held constant after end_time().
  Mat3 F_at(double t) const;
  double F33_at(double t) const { return F_at(t)(2, 2); }

 private:
  ControlMode mode_ = ControlMode::PrescribedF;
  bool isochoric_ = false;
  std::vector<double> times_{0.0};
  std::vector<Mat3> F_{Mat3::Identity()};
};

struct PointSample {
  double t = 0.0;
  Mat3 F = Mat3::Identity();
  double q = 0.0;
  Sym3 Dv = Sym3::identity();
  Mat3 S = Mat3::Zero();
  Sym3 T;
  double dissipation = 0.0;
};

struct PointTrajectory {
  std::vector<PointSample> samples;
  long steps = 0;
  long rk_steps = 0;
  int max_staggered_iterations = 0;
  double max_det_error = 0.0;  // max |det Dv - 1| over accepted steps
};

struct MatpointOptions {
  double dt_max = std::numeric_limits<double>::infinity();
  /// 0 records every accepted step.
  double output_interval = 0.0;
  /// When false the step is min(dt_max, breakpoints, outputs) without the tau bound.
  bool adaptive = true;
  DtLimits limits;
  /// Equilibrium tolerance relative to the residual at the start of the step;
  /// 1e-10 (mu1 + mu2) absolute when that residual is zero.
  double tol1 = 1e-8;
  double tol2 = 1e-9;
  int max_halvings = 10;
  int max_newton = 50;
  int max_staggered = 100;
};

/// Converged state at one instant of a uniaxial-stress run.
struct UniaxialState {
  double t = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double q = 0.0;
  Sym3 Dv = Sym3::identity();

  Mat3 F() const {
    Mat3 f = Mat3::Zero();
    f(0, 0) = lambda1;
    f(1, 1) = lambda2;
    f(2, 2) = lambda3;
    return f;
  }
};

struct StaggeredReport {
  int iterations = 0;
  int rk_calls = 0;
  std::vector<double> residual_history;
};

/// Drives Dv along a fully prescribed F(t) history. Stress uses the compressible
/// form for finite kappa and the hybrid form with q = 0 for kappa = inf (which
/// then requires det F = 1).
PointTrajectory run_prescribed_F(const LoadProgram& program, const MaterialParams& p,
                                 const MatpointOptions& opt = {});

/// Uniaxial stress along e3 with traction-free lateral faces (S11 = S22 = 0).
PointTrajectory run_uniaxial_stress(const LoadProgram& program, const MaterialParams& p,
                                    const MatpointOptions& opt = {});

/// One time step of the staggered scheme from a converged state to time
/// prev.t + dt with prescribed lambda3. Throws NonConvergence after
/// opt.max_staggered iterations or opt.max_newton Newton updates.
UniaxialState staggered_step(const UniaxialState& prev, double lambda3, double dt, const MaterialParams& p,
                             const MatpointOptions& opt, StaggeredReport* report = nullptr);

/// Sample (stress, dissipation) at a uniaxial state.
PointSample sample_uniaxial(const UniaxialState& s, const MaterialParams& p);

}  // namespace viscofe
