#pragma once

#include <functional>
#include <limits>

#include "viscofe/material.hpp"
#include "viscofe/tensor.hpp"

namespace viscofe {

struct RKStepInput {
  Mat3 F_prev = Mat3::Identity();
  Mat3 F_curr = Mat3::Identity();
  Sym3 Dv_prev = Sym3::identity();
  double dt = 0.0;  // s
};

/// Bounds applied by suggest_dt: dt = safety * 1e-2 * tau, clipped to [min_dt, max_dt].
struct DtLimits {
  double safety = 1.0;
  double min_dt = 1e-12;
  double max_dt = 1e30;
};

/// Six-stage explicit fifth-order Runge-Kutta increment shared by the tensor and
/// scalar integrators. rate(c, y) evaluates the right-hand side at the stage
/// fraction c in [0, 1] of the step; the return value is the unnormalized
/// update y0 + dt/90 (7 G1 + 32 G3 + 12 G4 + 32 G5 + 7 G6).
template <class State, class Rate>
State lawson_rk5_update(const State& y0, double dt, Rate&& rate) {
  const State g1 = rate(0.0, y0);
  const State g2 = rate(0.5, y0 + g1 * (dt / 2.0));
  const State g3 = rate(0.25, y0 + (g1 * 3.0 + g2) * (dt / 16.0));
  const State g4 = rate(0.5, y0 + g3 * (dt / 2.0));
  const State g5 = rate(0.75, y0 + (g2 * -1.0 + g3 * 2.0 + g4 * 3.0) * (3.0 * dt / 16.0));
  const State g6 = rate(1.0, y0 + (g1 + g2 * 4.0 + g3 * 6.0 + g4 * -12.0 + g5 * 8.0) * (dt / 7.0));
  return y0 + (g1 * 7.0 + g3 * 32.0 + g4 * 12.0 + g5 * 32.0 + g6 * 7.0) * (dt / 90.0);
}

/// One determinant-preserving step of the viscous state. The deformation
/// gradient is interpolated linearly between F_prev and F_curr at the stage
/// fractions. Throws StepTooLarge if the update loses positive definiteness.
Sym3 rk5_step(const RKStepInput& in, const MaterialParams& p);

/// rk5_step with sub-stepping: the interval is retried as 2, 4, ... equal
/// substeps (F interpolated linearly) whenever a step is rejected.
/// Throws StepTooLarge after max_halvings halvings.
Sym3 advance_viscous_state(const RKStepInput& in, const MaterialParams& p, int max_halvings = 10);

/// safety * 1e-2 * tau at the given state.
double suggest_dt(const Mat3& F, const Sym3& Dv, const MaterialParams& p, const DtLimits& limits = {});

// Radially symmetric incompressible deformation: hoop stretch lambda, viscous
// hoop stretch lambda_v, with Cv = diag(lambda_v^-4, lambda_v^2, lambda_v^2)
// in the (radial, hoop, hoop) frame.

/// Right-hand side d(lambda_v)/dt of the radial evolution law.
double radial_viscous_rate(double lambda, double lv, const MaterialParams& p);

/// Material time scale for the radial state.
double radial_time_scale(double lambda, double lv, const MaterialParams& p);

double suggest_dt_radial(double lambda, double lv, const MaterialParams& p, const DtLimits& limits = {});

/// Scalar step with lambda interpolated linearly between lambda_prev and lambda_curr.
double rk5_scalar_step(double lambda_prev, double lambda_curr, double lv_prev, double dt, const MaterialParams& p);

/// Scalar step with lambda given at each stage fraction c in [0, 1].
double rk5_scalar_step(const std::function<double(double)>& lambda_at, double lv_prev, double dt,
                       const MaterialParams& p);

}  // namespace viscofe
