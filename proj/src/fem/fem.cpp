#include "viscofe/fem.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#ifdef VISCOFE_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/SparseLU>
#endif

#include "viscofe/constitutive.hpp"
#include "viscofe/errors.hpp"
#include "viscofe/parallel.hpp"
#include "viscofe/quadrature.hpp"

namespace viscofe {

namespace {

constexpr int kQp = FESolver::kQpPerElement;
constexpr int kEdofs = 34;  // 10 nodes x 3 + 4 vertex pressures
constexpr std::size_t kBlock = 256;  // elements per ordered assembly block

using ElemVec = Eigen::Matrix<double, kEdofs, 1>;
using ElemMat = Eigen::Matrix<double, kEdofs, kEdofs>;
using Grad = Eigen::Matrix<double, 10, 3>;

bool is_orthonormal(const Mat3& R) { return (R.transpose() * R - Mat3::Identity()).norm() < 1e-12; }

double rel_change(const Sym3& a, const Sym3& b) { return (a - b).norm() / b.norm(); }

// Weights w(L) such that sum_g w_g v_g is the linear least-squares fit of
// quadrature values v_g evaluated at barycentric point L.
Eigen::Matrix<double, 14, 1> fit_weights(const std::array<double, 4>& L) {
  static const Eigen::Matrix<double, 4, 14> pinv = [] {
    Eigen::Matrix<double, 14, 4> A;
    const auto& rule = tet_rule_deg5();
    for (int g = 0; g < kQp; ++g)
      for (int i = 0; i < 4; ++i) A(g, i) = rule[g].L[i];
    return Eigen::Matrix<double, 4, 14>((A.transpose() * A).inverse() * A.transpose());
  }();
  const Eigen::Vector4d l(L[0], L[1], L[2], L[3]);
  return pinv.transpose() * l;
}

}  // namespace

void BVPConfig::validate(const Mesh& mesh) const {
  if (materials.empty()) raise(ErrorKind::Parameter, "BVPConfig needs at least one material");
  for (const auto& m : materials) m.validate();
  if (!element_material.empty()) {
    if (element_material.size() != mesh.n_elements())
      raise(ErrorKind::Contract, "element_material needs one entry per element");
    for (int id : element_material)
      if (id < 0 || id >= static_cast<int>(materials.size())) raise(ErrorKind::Contract, "material index out of range");
  }
  double prev = 0.0;
  for (double t : time_grid) {
    if (!(t > prev)) raise(ErrorKind::Contract, "time grid must be positive and strictly increasing");
    prev = t;
  }
  for (const auto& bc : dirichlet) {
    mesh.facets(bc.set);
    if (!is_orthonormal(bc.frame)) raise(ErrorKind::Contract, "Dirichlet frame on '" + bc.set + "' is not orthonormal");
  }
  for (const auto& bc : neumann) {
    mesh.facets(bc.set);
    if (!bc.traction) raise(ErrorKind::Contract, "Neumann condition on '" + bc.set + "' has no traction");
  }
  if (!(solver.tol1 > 0.0) || !(solver.tol2 > 0.0)) raise(ErrorKind::Parameter, "tolerances must be positive");
  if (solver.max_staggered < 1 || solver.max_halvings < 0) raise(ErrorKind::Parameter, "bad iteration limits");
  if (!(solver.dt_max > 0.0)) raise(ErrorKind::Parameter, "dt_max must be positive");
  if (!solver.adaptive && std::isinf(solver.dt_max) && time_grid.empty())
    raise(ErrorKind::Parameter, "fixed stepping needs dt_max or a time grid");
}

DofMap::DofMap(const Mesh& mesh, const std::vector<DirichletBC>& bcs)
    : n_nodes_(static_cast<int>(mesh.n_nodes())), n_pressure_(mesh.n_pressure) {
  frames_.assign(n_nodes_, Mat3::Identity());
  std::vector<int> frame_owner(n_nodes_, -1);
  std::vector<int> which(3 * n_nodes_, -1);  // constraint slot per displacement dof
  std::vector<Constraint> list;
  for (int b = 0; b < static_cast<int>(bcs.size()); ++b) {
    const auto& bc = bcs[b];
    for (int n : mesh.set_nodes(bc.set)) {
      if (frame_owner[n] >= 0 && (frames_[n] - bc.frame).norm() > 1e-14)
        raise(ErrorKind::Contract, "node " + std::to_string(n) + " has Dirichlet conditions in two different frames");
      frames_[n] = bc.frame;
      frame_owner[n] = b;
      for (int c = 0; c < 3; ++c) {
        if (!bc.fixed[c]) continue;
        const int dof = 3 * n + c;
        // A later condition on the same dof replaces the earlier one.
        if (which[dof] >= 0) {
          list[which[dof]] = {dof, b, c};
        } else {
          which[dof] = static_cast<int>(list.size());
          list.push_back({dof, b, c});
        }
      }
    }
    if (!bc.frame.isIdentity(0.0)) rotated_ = true;
  }
  std::sort(list.begin(), list.end(), [](const Constraint& a, const Constraint& b) { return a.dof < b.dof; });
  constraints_ = std::move(list);
  eq_.assign(n_dofs(), 0);
  for (const auto& c : constraints_) eq_[c.dof] = -1;
  for (int d = 0; d < n_dofs(); ++d)
    if (eq_[d] == 0) eq_[d] = n_free_++;
    else eq_[d] = -1;
}

struct FESolver::Impl {
  // Reference geometry at the volume quadrature points.
  std::vector<Grad> G;     // dN/dX
  std::vector<double> dV;  // weight * det J0
  std::vector<Vec3> Xq;    // position
  std::array<Eigen::Matrix<double, 10, 1>, kQp> N;
  std::array<Eigen::Vector4d, kQp> M;

  // Element dofs and their slots in the free-free sparse pattern.
  std::vector<std::array<int, kEdofs>> edofs;
  std::vector<int> slots;  // n_elements * 34 * 34, -1 where a dof is constrained
  Eigen::SparseMatrix<double> pattern;
  double scale_u = 1.0;  // (mu1 + mu2) * V^(2/3), kPa m^2
  double scale_q = 1.0;  // V, m^3

#ifdef VISCOFE_HAVE_UMFPACK
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
#else
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
#endif
  bool analyzed = false;
};

FESolver::~FESolver() = default;
FESolver::FESolver(FESolver&&) noexcept = default;
FESolver& FESolver::operator=(FESolver&&) noexcept = default;

FESolver::FESolver(Mesh mesh, BVPConfig config)
    : mesh_(std::move(mesh)), cfg_(std::move(config)), dofs_(mesh_, cfg_.dirichlet), impl_(std::make_unique<Impl>()) {
  cfg_.validate(mesh_);
  const auto& rule = tet_rule_deg5();
  const std::size_t ne = mesh_.n_elements();
  auto& im = *impl_;
  for (int g = 0; g < kQp; ++g) {
    Eigen::Matrix<double, 10, 3> dN;
    tet10_shape(rule[g].L, im.N[g], dN);
    im.M[g] = Eigen::Vector4d(rule[g].L[0], rule[g].L[1], rule[g].L[2], rule[g].L[3]);
  }
  im.G.resize(ne * kQp);
  im.dV.resize(ne * kQp);
  im.Xq.resize(ne * kQp);
  double volume = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& el = mesh_.elements[e];
    for (int g = 0; g < kQp; ++g) {
      Eigen::Matrix<double, 10, 1> N;
      Eigen::Matrix<double, 10, 3> dN;
      tet10_shape(rule[g].L, N, dN);
      Mat3 J0 = Mat3::Zero();
      Vec3 X = Vec3::Zero();
      for (int a = 0; a < 10; ++a) {
        J0 += mesh_.X[el[a]] * dN.row(a);
        X += N[a] * mesh_.X[el[a]];
      }
      const double det = J0.determinant();
      if (!(det > 0.0)) raise(ErrorKind::Geometry, "element " + std::to_string(e) + " has a non-positive Jacobian");
      const std::size_t k = e * kQp + g;
      im.G[k] = dN * J0.inverse();
      im.dV[k] = rule[g].w * det;
      im.Xq[k] = X;
      volume += im.dV[k];
    }
  }
  im.scale_q = volume;
  double mu = 0.0;
  for (const auto& m : cfg_.materials) mu = std::max(mu, m.shear_modulus_eq());
  im.scale_u = mu * std::pow(volume, 2.0 / 3.0);

  // Sparsity pattern of the free-free block.
  im.edofs.resize(ne);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(ne * kEdofs * kEdofs);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& el = mesh_.elements[e];
    auto& d = im.edofs[e];
    for (int a = 0; a < 10; ++a)
      for (int i = 0; i < 3; ++i) d[3 * a + i] = dofs_.u_dof(el[a], i);
    for (int c = 0; c < 4; ++c) d[30 + c] = dofs_.q_dof(mesh_.pressure_index[el[c]]);
    for (int r = 0; r < kEdofs; ++r)
      for (int s = 0; s < kEdofs; ++s) {
        const int er = dofs_.equation(d[r]), es = dofs_.equation(d[s]);
        if (er >= 0 && es >= 0) trip.emplace_back(er, es, 0.0);
      }
  }
  im.pattern.resize(dofs_.n_free(), dofs_.n_free());
  im.pattern.setFromTriplets(trip.begin(), trip.end());
  im.pattern.makeCompressed();
  im.slots.assign(ne * kEdofs * kEdofs, -1);
  const int* outer = im.pattern.outerIndexPtr();
  const int* inner = im.pattern.innerIndexPtr();
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& d = im.edofs[e];
    for (int s = 0; s < kEdofs; ++s) {
      const int col = dofs_.equation(d[s]);
      if (col < 0) continue;
      for (int r = 0; r < kEdofs; ++r) {
        const int row = dofs_.equation(d[r]);
        if (row < 0) continue;
        const int* pos = std::lower_bound(inner + outer[col], inner + outer[col + 1], row);
        im.slots[(e * kEdofs + r) * kEdofs + s] = static_cast<int>(pos - inner);
      }
    }
  }

  qp_.assign(ne * kQp, QPState{});
  x_ = Eigen::VectorXd::Zero(dofs_.n_dofs());
  x_old_ = x_;
}

const MaterialParams& FESolver::material(int element) const {
  return cfg_.materials[cfg_.element_material.empty() ? 0 : cfg_.element_material[element]];
}

Vec3 FESolver::displacement(int node) const { return dofs_.frame(node) * x_.segment<3>(3 * node); }

void FESolver::set_initial_displacement(const std::function<Vec3(const Vec3& X)>& u0) {
  if (steps_ > 0) raise(ErrorKind::Contract, "initial displacement can only be set before the first step");
  for (int n = 0; n < dofs_.n_nodes(); ++n) x_.segment<3>(3 * n) = dofs_.frame(n).transpose() * u0(mesh_.X[n]);
  x_old_ = x_;
  std::vector<Mat3> F;
  std::vector<double> q;
  qp_kinematics(x_, F, q);
  for (std::size_t k = 0; k < qp_.size(); ++k) {
    if (!(F[k].determinant() > 0.0)) raise(ErrorKind::InvalidDeformation, "initial displacement inverts an element");
    qp_[k].F = F[k];
    qp_[k].q = q[k];
  }
}

void FESolver::set_viscous_states(const std::vector<Sym3>& Dv) {
  if (Dv.size() != qp_.size()) raise(ErrorKind::Contract, "one viscous state per quadrature point expected");
  for (std::size_t k = 0; k < qp_.size(); ++k) {
    if (!Dv[k].is_spd()) raise(ErrorKind::Contract, "viscous state must be SPD");
    qp_[k].Dv = Dv[k];
  }
}

void FESolver::qp_kinematics(const Eigen::VectorXd& x, std::vector<Mat3>& F, std::vector<double>& q) const {
  const auto& im = *impl_;
  const std::size_t ne = mesh_.n_elements();
  F.resize(ne * kQp);
  q.resize(ne * kQp);
  parallel_chunks(ne, cfg_.solver.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) {
      const auto& el = mesh_.elements[e];
      Eigen::Matrix<double, 10, 3> U;
      for (int a = 0; a < 10; ++a) U.row(a) = (dofs_.frame(el[a]) * x.segment<3>(3 * el[a])).transpose();
      Eigen::Vector4d qe;
      for (int c = 0; c < 4; ++c) qe[c] = x[im.edofs[e][30 + c]];
      for (int g = 0; g < kQp; ++g) {
        const std::size_t k = e * kQp + g;
        F[k] = Mat3::Identity() + U.transpose() * im.G[k];
        q[k] = im.M[g].dot(qe);
      }
    }
  });
}

Eigen::VectorXd FESolver::external_forces(double t) const {
  const auto& im = *impl_;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dofs_.n_dofs());
  if (cfg_.body_force) {
    for (std::size_t e = 0; e < mesh_.n_elements(); ++e) {
      const auto& el = mesh_.elements[e];
      for (int g = 0; g < kQp; ++g) {
        const std::size_t k = e * kQp + g;
        const Vec3 b = cfg_.body_force(t, im.Xq[k]) * im.dV[k];
        for (int a = 0; a < 10; ++a) f.segment<3>(3 * el[a]) += im.N[g][a] * b;
      }
    }
  }
  for (const auto& bc : cfg_.neumann) {
    for (const auto& fc : mesh_.facets(bc.set)) {
      for (const auto& qp : tri_rule_deg4()) {
        Eigen::Matrix<double, 6, 1> N;
        Eigen::Matrix<double, 6, 2> dN;
        tri6_shape(qp.L, N, dN);
        Vec3 X = Vec3::Zero(), t1 = Vec3::Zero(), t2 = Vec3::Zero();
        for (int i = 0; i < 6; ++i) {
          const Vec3& Xi = mesh_.X[fc.nodes[i]];
          X += N[i] * Xi;
          t1 += dN(i, 0) * Xi;
          t2 += dN(i, 1) * Xi;
        }
        const Vec3 tr = bc.traction(t, X) * (qp.w * t1.cross(t2).norm());
        for (int i = 0; i < 6; ++i) f.segment<3>(3 * fc.nodes[i]) += N[i] * tr;
      }
    }
  }
  // Into nodal frames.
  if (dofs_.has_rotated_frames())
    for (int n = 0; n < dofs_.n_nodes(); ++n) f.segment<3>(3 * n) = dofs_.frame(n).transpose() * f.segment<3>(3 * n);
  return f;
}

Assembly FESolver::assemble(const Eigen::VectorXd& x, double t, bool with_tangent, const std::vector<Sym3>* Dv) const {
  if (x.size() != dofs_.n_dofs()) raise(ErrorKind::Contract, "dof vector has the wrong size");
  if (Dv && Dv->size() != qp_.size()) raise(ErrorKind::Contract, "one viscous state per quadrature point expected");
  const auto& im = *impl_;
  const std::size_t ne = mesh_.n_elements();
  const bool rotated = dofs_.has_rotated_frames();

  Assembly out;
  out.residual = -external_forces(t);
  std::vector<double> values;
  if (with_tangent) values.assign(im.pattern.nonZeros(), 0.0);

  struct ElemOut {
    ElemVec r;
    ElemMat K;
    double abs_u, abs_q;
  };
  std::vector<ElemOut> buf(std::min(kBlock, ne));

  auto element = [&](std::size_t e, ElemOut& o) {
    const auto& el = mesh_.elements[e];
    const MaterialParams& p = material(static_cast<int>(e));
    const double inv_kappa = p.incompressible() ? 0.0 : 1.0 / p.kappa;
    const double kappa_abs = p.incompressible() ? 0.0 : p.kappa;
    Eigen::Matrix<double, 10, 3> U;
    for (int a = 0; a < 10; ++a) U.row(a) = (dofs_.frame(el[a]) * x.segment<3>(3 * el[a])).transpose();
    Eigen::Vector4d qe;
    for (int c = 0; c < 4; ++c) qe[c] = x[im.edofs[e][30 + c]];

    o.r.setZero();
    if (with_tangent) o.K.setZero();
    o.abs_u = o.abs_q = 0.0;
    for (int g = 0; g < kQp; ++g) {
      const std::size_t k = e * kQp + g;
      const Grad& G = im.G[k];
      const double dV = im.dV[k];
      const Eigen::Vector4d& M = im.M[g];
      const Mat3 F = Mat3::Identity() + U.transpose() * G;
      const double J = F.determinant();
      if (!(J > 0.0))
        raise(ErrorKind::InvalidDeformation, "non-positive det F = " + std::to_string(J) + " in element " + std::to_string(e));
      const double q = M.dot(qe);
      const Sym3& dv = Dv ? (*Dv)[k] : qp_[k].Dv;
      const Mat3 S = piola_stress_hybrid(F, dv, q, p);

      const Eigen::Matrix<double, 10, 3> f = dV * G * S.transpose();
      for (int a = 0; a < 10; ++a) o.r.segment<3>(3 * a) += f.row(a).transpose();
      const double c = J - 1.0 - q * inv_kappa;
      o.r.segment<4>(30) += (dV * c) * M;
      o.abs_u += dV * (G.cwiseAbs() * (S.cwiseAbs().array() + kappa_abs).matrix().transpose()).sum();
      o.abs_q += dV * (J + 1.0 + std::abs(q) * inv_kappa) * M.sum();

      if (!with_tangent) continue;
      const Eigen::Matrix<double, 9, 9> A = piola_tangent_hybrid(F, dv, q, p);
      // B maps element displacements to vec(Grad u) with index 3 i + J.
      Eigen::Matrix<double, 9, 30> B = Eigen::Matrix<double, 9, 30>::Zero();
      for (int a = 0; a < 10; ++a)
        for (int i = 0; i < 3; ++i)
          for (int Jx = 0; Jx < 3; ++Jx) B(3 * i + Jx, 3 * a + i) = G(a, Jx);
      o.K.topLeftCorner<30, 30>() += dV * B.transpose() * A * B;
      const Mat3 cof = J * F.inverse().transpose();
      Eigen::Matrix<double, 9, 1> vcof;
      for (int i = 0; i < 3; ++i)
        for (int Jx = 0; Jx < 3; ++Jx) vcof[3 * i + Jx] = cof(i, Jx);
      const Eigen::Matrix<double, 30, 1> bu = B.transpose() * vcof;
      o.K.topRightCorner<30, 4>() += dV * bu * M.transpose();
      o.K.bottomLeftCorner<4, 30>() += dV * M * bu.transpose();
      o.K.bottomRightCorner<4, 4>() -= (dV * inv_kappa) * M * M.transpose();
    }
    if (rotated) {
      for (int a = 0; a < 10; ++a) {
        const Mat3& R = dofs_.frame(el[a]);
        if (R.isIdentity(0.0)) continue;
        o.r.segment<3>(3 * a) = R.transpose() * o.r.segment<3>(3 * a).eval();
        if (with_tangent) {
          o.K.middleRows<3>(3 * a) = (R.transpose() * o.K.middleRows<3>(3 * a)).eval();
          o.K.middleCols<3>(3 * a) = (o.K.middleCols<3>(3 * a) * R).eval();
        }
      }
    }
  };

  // Blocks of elements are evaluated in parallel and scattered in element
  // order, so the sums do not depend on the worker count.
  for (std::size_t b0 = 0; b0 < ne; b0 += kBlock) {
    const std::size_t nb = std::min(kBlock, ne - b0);
    parallel_chunks(nb, cfg_.solver.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) element(b0 + i, buf[i]);
    });
    for (std::size_t i = 0; i < nb; ++i) {
      const std::size_t e = b0 + i;
      const auto& d = im.edofs[e];
      for (int r = 0; r < kEdofs; ++r) out.residual[d[r]] += buf[i].r[r];
      out.abs_u += buf[i].abs_u;
      out.abs_q += buf[i].abs_q;
      if (!with_tangent) continue;
      const int* slot = &im.slots[e * kEdofs * kEdofs];
      for (int r = 0; r < kEdofs; ++r)
        for (int s = 0; s < kEdofs; ++s) {
          const int sl = slot[r * kEdofs + s];
          if (sl >= 0) values[sl] += buf[i].K(r, s);
        }
    }
  }
  if (with_tangent) {
    out.tangent = im.pattern;
    std::copy(values.begin(), values.end(), out.tangent.valuePtr());
  }
  return out;
}

void FESolver::apply_dirichlet(double t, Eigen::VectorXd& x) const {
  for (const auto& c : dofs_.constraints()) {
    const auto& bc = cfg_.dirichlet[c.bc];
    x[c.dof] = bc.value ? bc.value(t, mesh_.X[c.dof / 3])[c.component] : 0.0;
  }
}

void FESolver::predict(double t_new, Eigen::VectorXd& x) const {
  x = x_;
  if (steps_ > 0 && dt_last_ > 0.0) x += ((t_new - t_) / dt_last_) * (x_ - x_old_);
  apply_dirichlet(t_new, x);
}

StepReport FESolver::solve_step(double t_new) {
  const double dt = t_new - t_;
  if (!(dt >= 0.0)) raise(ErrorKind::Contract, "solve_step cannot go backwards in time");
  if (dofs_.constraints().empty()) raise(ErrorKind::Contract, "no Dirichlet dofs; the system is singular");
  auto& im = *impl_;
  const auto& opt = cfg_.solver;
  const std::size_t nq = qp_.size();
  const int nu_dofs = 3 * dofs_.n_nodes();

  Eigen::VectorXd x;
  predict(t_new, x);
  std::vector<Sym3> Dv(nq);
  for (std::size_t k = 0; k < nq; ++k) Dv[k] = qp_[k].Dv;

  auto free_norms = [&](const Eigen::VectorXd& r) {
    double su = 0.0, sq = 0.0;
    for (int d = 0; d < dofs_.n_dofs(); ++d) {
      if (dofs_.equation(d) < 0) continue;
      (d < nu_dofs ? su : sq) += r[d] * r[d];
    }
    return std::pair{std::sqrt(su), std::sqrt(sq)};
  };

  StepReport rep;
  rep.t = t_new;
  rep.dt = dt;
  Assembly a = assemble(x, t_new, true, &Dv);
  const auto [r0u, r0q] = free_norms(a.residual);
  const double eps = std::numeric_limits<double>::epsilon();
  auto threshold = [&](double r0, double abs_sum, double scale) {
    const double floor = std::max(16.0 * eps * abs_sum, 1e-13 * scale);
    return r0 > 0.0 ? std::max(opt.tol1 * r0, floor) : std::max(1e-10 * scale, floor);
  };
  const double thr_u = threshold(r0u, a.abs_u, im.scale_u);
  const double thr_q = threshold(r0q, a.abs_q, im.scale_q);
  double ru = r0u, rq = r0q;
  rep.residual_history.push_back(ru);

  std::vector<Mat3> F;
  std::vector<double> q;
  bool have_rk = false;
  for (int it = 1;; ++it) {
    bool moved = false;
    if (ru > thr_u || rq > thr_q) {
      Eigen::VectorXd rhs(dofs_.n_free());
      for (int d = 0; d < dofs_.n_dofs(); ++d)
        if (dofs_.equation(d) >= 0) rhs[dofs_.equation(d)] = -a.residual[d];
      if (!im.analyzed) {
        im.lu.analyzePattern(a.tangent);
        im.analyzed = true;
      }
      im.lu.factorize(a.tangent);
      if (im.lu.info() != Eigen::Success) raise(ErrorKind::SingularSystem, "sparse factorization failed at t = " + std::to_string(t_new));
      const Eigen::VectorXd du = im.lu.solve(rhs);
      if (im.lu.info() != Eigen::Success || !du.allFinite())
        raise(ErrorKind::SingularSystem, "sparse solve failed at t = " + std::to_string(t_new));
      for (int d = 0; d < dofs_.n_dofs(); ++d)
        if (dofs_.equation(d) >= 0) x[d] += du[dofs_.equation(d)];
      ++rep.newton;
      moved = true;
    }

    double dDv = 0.0;
    if (!have_rk || moved) {
      qp_kinematics(x, F, q);
      std::vector<double> change(mesh_.n_elements(), 0.0);
      parallel_chunks(mesh_.n_elements(), opt.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t e = begin; e < end; ++e) {
          const MaterialParams& p = material(static_cast<int>(e));
          for (int g = 0; g < kQp; ++g) {
            const std::size_t k = e * kQp + g;
            if (!(F[k].determinant() > 0.0))
              raise(ErrorKind::InvalidDeformation, "non-positive det F in element " + std::to_string(e));
            const Sym3 next = dt > 0.0 ? rk5_step({qp_[k].F, F[k], qp_[k].Dv, dt}, p) : qp_[k].Dv;
            change[e] = std::max(change[e], rel_change(next, Dv[k]));
            Dv[k] = next;
          }
        }
      });
      dDv = *std::max_element(change.begin(), change.end());
      rep.rk_calls += static_cast<long>(nq);
      have_rk = true;
    }

    a = assemble(x, t_new, true, &Dv);
    std::tie(ru, rq) = free_norms(a.residual);
    rep.residual_history.push_back(ru);
    if (ru <= thr_u && rq <= thr_q && dDv <= opt.tol2) {
      rep.iterations = it;
      break;
    }
    if (it >= opt.max_staggered) {
      std::string msg = "staggered scheme did not converge in " + std::to_string(opt.max_staggered) +
                        " iterations at t = " + std::to_string(t_new) + "; residual history:";
      for (double h : rep.residual_history) msg += " " + std::to_string(h);
      raise(ErrorKind::NonConvergence, msg);
    }
  }

  // Accept.
  qp_kinematics(x, F, q);
  for (std::size_t k = 0; k < nq; ++k) {
    qp_[k] = {Dv[k], F[k], q[k]};
    max_det_error_ = std::max(max_det_error_, std::abs(Dv[k].det() - 1.0));
  }
  x_old_ = x_;
  x_ = x;
  if (dt > 0.0) dt_last_ = dt;
  t_ = t_new;
  ++steps_;
  rk_calls_ += rep.rk_calls;
  max_iterations_ = std::max(max_iterations_, rep.iterations);
  last_ = rep;
  return rep;
}

double FESolver::suggest_dt() const {
  double dt = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < mesh_.n_elements(); ++e) {
    const MaterialParams& p = material(static_cast<int>(e));
    for (int g = 0; g < kQp; ++g) {
      const QPState& s = qp_[e * kQp + g];
      dt = std::min(dt, viscofe::suggest_dt(s.F, s.Dv, p, cfg_.solver.limits));
    }
  }
  return dt;
}

void FESolver::advance_to(double t_end, const std::function<void(const FESolver&, const StepReport&)>& on_step) {
  if (t_end < t_) raise(ErrorKind::Contract, "advance_to cannot go backwards in time");
  const auto& opt = cfg_.solver;
  while (t_ < t_end) {
    double dt = opt.dt_max;
    if (opt.adaptive) dt = std::min(dt, suggest_dt());
    // Land exactly on t_end instead of leaving a sliver.
    if (t_ + dt >= t_end || t_end - (t_ + dt) < 1e-9 * dt) dt = t_end - t_;
    for (int halving = 0;; ++halving) {
      const double t_new = (dt == t_end - t_) ? t_end : t_ + dt;
      try {
        const StepReport rep = solve_step(t_new);
        if (on_step) on_step(*this, rep);
        break;
      } catch (const Error& e) {
        const bool retry = e.kind() == ErrorKind::StepTooLarge || e.kind() == ErrorKind::NonConvergence ||
                           e.kind() == ErrorKind::InvalidDeformation || e.kind() == ErrorKind::SingularSystem;
        if (!retry) throw;
        if (halving >= opt.max_halvings)
          raise(ErrorKind::StepTooLarge, "step size exhausted after " + std::to_string(opt.max_halvings) +
                                             " halvings at t = " + std::to_string(t_) + ": " + e.what());
        dt *= 0.5;
      }
    }
  }
}

void FESolver::run(const std::function<void(const FESolver&)>& on_output) {
  for (double t : cfg_.time_grid) {
    advance_to(t);
    if (on_output) on_output(*this);
  }
}

Mat3 FESolver::deformation_gradient_at(int element, const std::array<double, 4>& L) const {
  const auto& el = mesh_.elements[element];
  Eigen::Matrix<double, 10, 1> N;
  Eigen::Matrix<double, 10, 3> dN;
  tet10_shape(L, N, dN);
  Mat3 J0 = Mat3::Zero();
  Mat3 dU = Mat3::Zero();
  for (int a = 0; a < 10; ++a) {
    J0 += mesh_.X[el[a]] * dN.row(a);
    dU += displacement(el[a]) * dN.row(a);
  }
  return Mat3::Identity() + dU * J0.inverse();
}

double FESolver::pressure_at(int element, const std::array<double, 4>& L) const {
  const auto& d = impl_->edofs[element];
  double q = 0.0;
  for (int c = 0; c < 4; ++c) q += L[c] * x_[d[30 + c]];
  return q;
}

Sym3 FESolver::viscous_state_at(int element, const std::array<double, 4>& L) const {
  const auto w = fit_weights(L);
  Sym3 Dv = Sym3::zero();
  for (int g = 0; g < kQp; ++g) Dv += w[g] * qp_[element * kQp + g].Dv;
  const double det = Dv.det();
  if (!(det > 0.0) || !Dv.is_spd()) raise(ErrorKind::InvalidDeformation, "fitted viscous state is not SPD");
  return Dv * std::pow(det, -1.0 / 3.0);
}

Mat3 FESolver::piola_stress_at(int element, const std::array<double, 4>& L) const {
  return piola_stress_hybrid(deformation_gradient_at(element, L), viscous_state_at(element, L),
                             pressure_at(element, L), material(element));
}

Vec3 FESolver::reaction(const std::string& set) const {
  const Assembly a = assemble(x_, t_, false);
  Vec3 sum = Vec3::Zero();
  for (int n : mesh_.set_nodes(set)) sum += dofs_.frame(n) * a.residual.segment<3>(3 * n);
  return sum;
}

Vec3 FESolver::applied_load() const {
  const Eigen::VectorXd f = external_forces(t_);
  Vec3 sum = Vec3::Zero();
  for (int n = 0; n < dofs_.n_nodes(); ++n) sum += dofs_.frame(n) * f.segment<3>(3 * n);
  return sum;
}

double facet_average(const Mesh& mesh, const std::string& set, const FacetIntegrand& f) {
  double num = 0.0, area = 0.0;
  for (const auto& fc : mesh.facets(set)) {
    const auto& face = kTetFaces[fc.face];
    for (const auto& qp : tri_rule_deg4()) {
      Eigen::Matrix<double, 6, 1> N;
      Eigen::Matrix<double, 6, 2> dN;
      tri6_shape(qp.L, N, dN);
      Vec3 X = Vec3::Zero(), t1 = Vec3::Zero(), t2 = Vec3::Zero();
      for (int i = 0; i < 6; ++i) {
        const Vec3& Xi = mesh.X[fc.nodes[i]];
        X += N[i] * Xi;
        t1 += dN(i, 0) * Xi;
        t2 += dN(i, 1) * Xi;
      }
      const Vec3 n = t1.cross(t2);
      const double dA = qp.w * n.norm();
      std::array<double, 4> L{0.0, 0.0, 0.0, 0.0};
      for (int i = 0; i < 3; ++i) L[face[i]] = qp.L[i];
      num += dA * f(fc.element, L, X, n.normalized());
      area += dA;
    }
  }
  if (!(area > 0.0)) raise(ErrorKind::Geometry, "facet set '" + set + "' has no area");
  return num / area;
}

double outer_pressure_fe(const FESolver& solver, const std::string& set, const Mat3& frame) {
  return facet_average(solver.mesh(), set, [&](int e, const std::array<double, 4>& L, const Vec3& X, const Vec3& N) {
    const Mat3 S = solver.piola_stress_at(e, L);
    return (S * N).dot(frame * X / X.norm());
  });
}

}  // namespace viscofe
