#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "viscofe/evolution.hpp"
#include "viscofe/material.hpp"

// Radially symmetric motion y = lambda(R, t) X of an incompressible spherical
// shell A <= R <= B whose outer radius follows a prescribed history b(t).

namespace viscofe {

struct ShellGeometry {
  double A = 0.9;  // m
  double B = 1.0;  // m
  /// Piecewise-linear (t, b) knots; held constant after the last knot.
  std::vector<std::pair<double, double>> b_knots{{0.0, 1.0}};

  /// b(t) = B (1 + rate t) on [0, t_end].
  static ShellGeometry ramp(double A, double B, double rate, double t_end);

  double b_at(double t) const;
  double end_time() const { return b_knots.back().first; }
  std::vector<double> breakpoints() const;
  void validate() const;
};

/// lambda = (1 + (b^3 - B^3) / R^3)^(1/3). Throws Geometry if the argument is <= 0.
double lambda_field(double R, double b, double B);
double lambda_field(double R, double t, const ShellGeometry& g);

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

struct GaussGrid {
  std::vector<double> R;
  std::vector<double> w;
  std::vector<double> lv;  // viscous hoop stretch per point
};

GaussGrid make_gauss_grid(double a, double b, int n);

/// dW^Eq/dlambda and dW^NEq/dlambda at fixed lambda_v for the radial state.
double shell_dWeq(double lambda, const MaterialParams& p);
double shell_dWneq(double lambda, double lv, const MaterialParams& p);

class ShellExact {
 public:
  ShellExact(ShellGeometry geometry, MaterialParams params, int n_gauss = 100, DtLimits limits = {},
             double dt_max = std::numeric_limits<double>::infinity());

  /// Registers a radius for stress_fields(). Only allowed at t = 0.
  void add_probe(double R);

  /// Advances every point to time t (>= time()). Points are independent and
  /// are split over `threads` workers.
  void advance_to(double t, int threads = 1);

  double time() const { return t_; }
  double b() const { return geom_.b_at(t_); }

  /// Outer nominal pressure P(t) = s1(B, t), kPa.
  double outer_pressure() const;

  /// (s1, s2) at a registered probe radius, kPa.
  std::pair<double, double> stress_fields(double R) const;

  const GaussGrid& grid() const { return grid_; }
  const ShellGeometry& geometry() const { return geom_; }
  const MaterialParams& params() const { return params_; }
  long rk_steps() const { return rk_steps_; }

 private:
  struct Probe {
    double R;
    GaussGrid grid;  // Gauss points on [A, R]
    double lv = 1.0;
  };

  /// Integrates one point from t0 to t1, returns the number of RK steps.
  long advance_point(double R, double& lv, double t0, double t1) const;
  double weighted_integral(const GaussGrid& g, double t) const;

  ShellGeometry geom_;
  MaterialParams params_;
  DtLimits limits_;
  double dt_max_;
  GaussGrid grid_;
  std::vector<Probe> probes_;
  double t_ = 0.0;
  long rk_steps_ = 0;
};

/// lambda_v at every grid point and every time in `times` (rows follow times).
std::vector<std::vector<double>> evolve_shell_state(const GaussGrid& grid, const std::vector<double>& times,
                                                    const ShellGeometry& g, const MaterialParams& p,
                                                    const DtLimits& limits = {});

}  // namespace viscofe
