#pragma once

#include <utility>
#include <vector>

#include "viscofe/fem.hpp"
#include "viscofe/matpoint.hpp"
#include "viscofe/shell_exact.hpp"

// Boundary-value problems used for verification: the unit-cube uniaxial
// patch test and the octant of a spherical shell with prescribed outer radius.

namespace viscofe {

/// Unit cube in uniaxial tension along e3: u3 = 0 on z0, u3 = F33(t) - 1 on
/// z1, u1 = 0 on x0 and u2 = 0 on y0 (rigid modes only); lateral faces free.
BVPConfig patch_test_config(const MaterialParams& p, const LoadProgram& program, std::vector<double> time_grid,
                            const SolverOptions& opt = {});

struct PatchSample {
  double t = 0.0;
  double F33 = 1.0;
  double lambda_lat = 1.0;  // volume mean of F11
  double q = 0.0;           // volume mean
  double S33 = 0.0;         // volume mean, kPa
  double T33 = 0.0;         // volume mean of the Cauchy stress, kPa
  double dissipation = 0.0; // volume mean rate, kPa/s
  /// max over quadrature points of |F - F_mean| (max norm).
  double F_spread = 0.0;
  /// max over quadrature points of |S33 - mean| / |mean|.
  double S33_spread = 0.0;
  /// max |det Dv - 1| over points and steps so far.
  double det_error = 0.0;
};

/// Runs the configuration over its time grid; one sample per grid time plus t = 0.
std::vector<PatchSample> run_patch_test(const Mesh& mesh, const BVPConfig& cfg);

/// Octant shell driven by y = (b(t) / B) X on the outer surface with rollers on
/// the symmetry planes and a free inner surface. A rotation Q is superposed on
/// all boundary data (and on the initial state) when given.
BVPConfig shell_fe_config(const MaterialParams& p, const ShellGeometry& g, std::vector<double> time_grid,
                          const SolverOptions& opt = {}, const Mat3& rotation = Mat3::Identity());

/// Builds the solver for shell_fe_config, including the rotated initial state.
FESolver make_shell_solver(const Mesh& mesh, const BVPConfig& cfg, const Mat3& rotation = Mat3::Identity());

struct ShellSample {
  double t = 0.0;
  double b = 1.0;
  double P = 0.0;  // outer nominal pressure, kPa
};

std::vector<ShellSample> run_shell_fe(const Mesh& mesh, const BVPConfig& cfg, const ShellGeometry& g,
                                      const Mat3& rotation = Mat3::Identity());

/// Element-averaged |det F - 1| maximised over elements.
double max_element_volume_error(const FESolver& solver);
/// |det F - 1| averaged against each vertex pressure basis function, maximised
/// over vertices. This is the volume constraint the mixed pair enforces.
double max_pressure_patch_volume_error(const FESolver& solver);

/// Exact-solution pressure at time t with n Gauss points and a fine step.
double exact_shell_pressure(const MaterialParams& p, const ShellGeometry& g, double t, int n = 100);

struct ConvergenceRow {
  int level = 0;
  int nr = 0;
  int ntheta = 0;
  double h = 0.0;  // mean circumscribed-sphere diameter, m
  int n_dof = 0;
  double P_h = 0.0;
  double P_exact = 0.0;
  double eps_P = 0.0;
  double wall_s = 0.0;
  long steps = 0;
};

/// Solves the shell on each (nr, ntheta) octant mesh up to t_eval and compares
/// with P_exact. Solver errors are rethrown with the level prefixed.
std::vector<ConvergenceRow> convergence_study(const std::vector<std::pair<int, int>>& levels, const MaterialParams& p,
                                              const ShellGeometry& g, double t_eval, double P_exact,
                                              const SolverOptions& opt = {});

}  // namespace viscofe
