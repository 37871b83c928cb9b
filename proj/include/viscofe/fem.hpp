#pragma once

#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "viscofe/evolution.hpp"
#include "viscofe/material.hpp"
#include "viscofe/mesh.hpp"
#include "viscofe/tensor.hpp"

// Mixed displacement / pressure (P2 / P1 Taylor-Hood) solver for the hybrid
// formulation. Unknowns are the nodal displacements and the vertex pressures q;
// the viscous state lives at the 14 volume quadrature points of every element.

namespace viscofe {

using SpaceTimeField = std::function<Vec3(double t, const Vec3& X)>;

/// Prescribed displacement components on the nodes of a facet set. Components
/// refer to the orthonormal frame whose columns are the local axes; value()
/// returns the three local components (unused entries are ignored). A null
/// value means zero.
struct DirichletBC {
  std::string set;
  std::array<bool, 3> fixed{true, true, true};
  Mat3 frame = Mat3::Identity();
  SpaceTimeField value;
};

/// Dead-load nominal traction per unit reference area, kPa.
struct NeumannBC {
  std::string set;
  SpaceTimeField traction;
};

struct SolverOptions {
  /// Equilibrium tolerance relative to the residual at the start of the step,
  /// checked separately on the momentum and constraint blocks.
  double tol1 = 1e-8;
  /// Largest relative change of Dv at any quadrature point between two staggered iterations.
  double tol2 = 1e-9;
  int max_staggered = 100;
  int max_halvings = 10;
  /// When false the step is min(dt_max, next output time).
  bool adaptive = true;
  DtLimits limits;
  double dt_max = std::numeric_limits<double>::infinity();
  int threads = 1;
};

struct BVPConfig {
  /// One entry per material; element_material picks one per element (empty = all use entry 0).
  std::vector<MaterialParams> materials;
  std::vector<int> element_material;
  std::vector<DirichletBC> dirichlet;
  std::vector<NeumannBC> neumann;
  /// Body force per unit reference volume, kN/m^3. Null means zero.
  SpaceTimeField body_force;
  /// Output instants, strictly increasing and positive.
  std::vector<double> time_grid;
  SolverOptions solver;

  /// Throws Parameter / Contract / Geometry on an inconsistent configuration.
  void validate(const Mesh& mesh) const;
};

/// Global numbering: 3 displacement dofs per node followed by one pressure dof
/// per vertex. Constrained dofs get no equation.
class DofMap {
 public:
  DofMap(const Mesh& mesh, const std::vector<DirichletBC>& bcs);

  struct Constraint {
    int dof;
    int bc;         // index into the DirichletBC list
    int component;  // local axis
  };

  int n_nodes() const { return n_nodes_; }
  int n_pressure() const { return n_pressure_; }
  int n_dofs() const { return 3 * n_nodes_ + n_pressure_; }
  int n_free() const { return n_free_; }
  int u_dof(int node, int comp) const { return 3 * node + comp; }
  int q_dof(int vertex_index) const { return 3 * n_nodes_ + vertex_index; }
  /// Equation number of a dof, -1 when constrained.
  int equation(int dof) const { return eq_[dof]; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  /// Local frame of a node's displacement components.
  const Mat3& frame(int node) const { return frames_[node]; }
  bool has_rotated_frames() const { return rotated_; }

 private:
  int n_nodes_ = 0;
  int n_pressure_ = 0;
  int n_free_ = 0;
  std::vector<int> eq_;
  std::vector<Constraint> constraints_;
  std::vector<Mat3> frames_;
  bool rotated_ = false;
};

/// Converged data at one volume quadrature point.
struct QPState {
  Sym3 Dv = Sym3::identity();
  Mat3 F = Mat3::Identity();
  double q = 0.0;
};

struct StepReport {
  double t = 0.0;
  double dt = 0.0;
  int iterations = 0;  // staggered iterations
  int newton = 0;      // linear solves
  long rk_calls = 0;   // quadrature-point updates
  std::vector<double> residual_history;  // momentum residual norm per iteration
};

/// Residual over all dofs (in nodal frames) and the tangent restricted to the free dofs.
struct Assembly {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> tangent;
  /// Sum of absolute element contributions per block (momentum, constraint),
  /// used for the roundoff floor of the convergence test.
  double abs_u = 0.0;
  double abs_q = 0.0;
};

class FESolver {
 public:
  FESolver(Mesh mesh, BVPConfig config);
  ~FESolver();
  FESolver(FESolver&&) noexcept;
  FESolver& operator=(FESolver&&) noexcept;

  const Mesh& mesh() const { return mesh_; }
  const BVPConfig& config() const { return cfg_; }
  const DofMap& dofs() const { return dofs_; }
  double time() const { return t_; }

  /// Full dof vector (displacements in nodal frames, then pressures).
  const Eigen::VectorXd& state() const { return x_; }
  /// Replaces the displacement field at t = 0, e.g. with a rigid motion; F at
  /// the quadrature points follows. Only allowed before the first step.
  void set_initial_displacement(const std::function<Vec3(const Vec3& X)>& u0);

  /// Residual (and tangent) at an arbitrary dof vector and time with the
  /// given viscous states (converged ones when null).
  Assembly assemble(const Eigen::VectorXd& x, double t, bool with_tangent,
                    const std::vector<Sym3>* Dv = nullptr) const;

  /// One staggered step to t_new >= time(). On failure the solver state is
  /// left unchanged and the error propagates.
  StepReport solve_step(double t_new);
  /// Adaptive stepping to t_end with halving on failure; on_step runs after
  /// every accepted step.
  void advance_to(double t_end, const std::function<void(const FESolver&, const StepReport&)>& on_step = {});
  /// Marches through config().time_grid, calling on_output at every grid time.
  void run(const std::function<void(const FESolver&)>& on_output);

  /// min over quadrature points of suggest_dt at the converged state.
  double suggest_dt() const;

  std::size_t n_qp() const { return qp_.size(); }
  static constexpr int kQpPerElement = 14;
  const QPState& qp(int element, int point) const { return qp_[element * kQpPerElement + point]; }
  const std::vector<QPState>& qp_states() const { return qp_; }
  /// Overwrites converged viscous states (test and restart hook).
  void set_viscous_states(const std::vector<Sym3>& Dv);

  const MaterialParams& material(int element) const;
  /// Displacement of a node in global axes.
  Vec3 displacement(int node) const;
  /// Deformation gradient, pressure and Dv at barycentric point L of an
  /// element. Dv is the linear least-squares fit of the quadrature values,
  /// scaled back to unit determinant.
  Mat3 deformation_gradient_at(int element, const std::array<double, 4>& L) const;
  double pressure_at(int element, const std::array<double, 4>& L) const;
  Sym3 viscous_state_at(int element, const std::array<double, 4>& L) const;
  Mat3 piola_stress_at(int element, const std::array<double, 4>& L) const;

  /// Sum of the nodal force residual over the nodes of a set, global axes.
  /// At convergence this is the internal minus external force, i.e. the
  /// reaction exerted by the supports with the opposite sign.
  Vec3 reaction(const std::string& set) const;
  /// Total applied Neumann plus body load at the current time, global axes.
  Vec3 applied_load() const;

  long steps() const { return steps_; }
  long rk_calls() const { return rk_calls_; }
  int max_staggered_iterations() const { return max_iterations_; }
  /// max |det Dv - 1| over all quadrature points and accepted steps.
  double max_det_error() const { return max_det_error_; }
  const StepReport& last_report() const { return last_; }

 private:
  struct Impl;
  void predict(double t_new, Eigen::VectorXd& x) const;
  void apply_dirichlet(double t, Eigen::VectorXd& x) const;
  /// F and q at every quadrature point for a dof vector.
  void qp_kinematics(const Eigen::VectorXd& x, std::vector<Mat3>& F, std::vector<double>& q) const;
  Eigen::VectorXd external_forces(double t) const;

  Mesh mesh_;
  BVPConfig cfg_;
  DofMap dofs_;
  std::unique_ptr<Impl> impl_;
  std::vector<QPState> qp_;
  Eigen::VectorXd x_;
  Eigen::VectorXd x_old_;  // state before the last accepted step, for the predictor
  double t_ = 0.0;
  double dt_last_ = 0.0;
  long steps_ = 0;
  long rk_calls_ = 0;
  int max_iterations_ = 0;
  double max_det_error_ = 0.0;
  StepReport last_;
};

/// Integrand evaluated at a facet quadrature point: owning element, its
/// barycentric coordinates, reference position and unit outward normal.
using FacetIntegrand = std::function<double(int element, const std::array<double, 4>& L, const Vec3& X, const Vec3& N)>;

/// (integral of f dA) / (integral of dA) over a facet set of the reference
/// configuration with the 6-point triangle rule.
double facet_average(const Mesh& mesh, const std::string& set, const FacetIntegrand& f);

/// Outer nominal pressure: average of (S N) . (frame X / R) over the facet set.
/// The frame undoes a rigid rotation superposed on the boundary data.
double outer_pressure_fe(const FESolver& solver, const std::string& set = "outer",
                         const Mat3& frame = Mat3::Identity());

}  // namespace viscofe
