#include "viscofe/constitutive.hpp"

#include <cmath>
#include <string>

#include "viscofe/errors.hpp"

namespace viscofe {
namespace {

constexpr double kInvariantSlack = 1e-12;

double clamp_isochoric(double value) {
  // Sub-3 values within roundoff of the reference state are snapped back.
  if (value < 3.0 && value >= 3.0 - kInvariantSlack) return 3.0;
  return value;
}

// Two-term energy sum_r 3^(1-e_r)/(2 e_r) g_r (x^e_r - 3^e_r).
EnergyDerivs two_term_energy(double x, double g1, double e1, double g2, double e2) {
  if (!(x > 0.0)) raise(ErrorKind::InvalidDeformation, "energy argument must be positive, got " + std::to_string(x));
  if (e1 == 0.0 || e2 == 0.0) raise(ErrorKind::Parameter, "energy exponent must be nonzero");
  EnergyDerivs out;
  for (auto [g, e] : {std::pair{g1, e1}, std::pair{g2, e2}}) {
    if (g == 0.0) continue;
    const double c = std::pow(3.0, 1.0 - e) * g / (2.0 * e);
    const double xe = std::pow(x, e);
    out.value += c * (xe - std::pow(3.0, e));
    out.d1 += c * e * xe / x;
    out.d2 += c * e * (e - 1.0) * xe / (x * x);
  }
  return out;
}

struct Kernel {
  double J;
  double jm23;  // J^(-2/3)
  Mat3 FinvT;
  Sym3 C;
  InvariantSet inv;
  EnergyDerivs eq;
  EnergyDerivs neq;
};

Kernel evaluate(const Mat3& F, const Sym3& Dv, const MaterialParams& p) {
  Kernel k;
  k.inv = compute_invariants(F, Dv);
  k.J = k.inv.J;
  k.jm23 = std::pow(k.J, -2.0 / 3.0);
  k.FinvT = F.inverse().transpose();
  k.C = Sym3::from_matrix(F.transpose() * F);
  k.eq = psi_eq(k.inv.I1bar, p);
  k.neq = psi_neq(k.inv.I1ebar, p);
  return k;
}

Mat3 piola_deviatoric(const Mat3& F, const Sym3& Dv, const Kernel& k) {
  return 2.0 * k.jm23 * k.eq.d1 * F + 2.0 * k.jm23 * k.neq.d1 * F * Dv.matrix() -
         (2.0 / 3.0) * k.jm23 * (k.inv.I1 * k.eq.d1 + k.inv.I1e * k.neq.d1) * k.FinvT;
}

// Spatial block 1/J [4 d2 (B - I/3 d)(B - I/3 d) + 2 d1 (...)] for one branch.
void add_branch_moduli(Tangent6& L, const Sym3& Bbar, double Ibar, double d1, double d2, double inv_J) {
  auto delta = [](int i, int j) { return i == j ? 1.0 : 0.0; };
  for (int a = 0; a < 6; ++a) {
    const int i = kSymPairs[a][0], j = kSymPairs[a][1];
    const double dev_ij = Bbar(i, j) - Ibar / 3.0 * delta(i, j);
    for (int b = 0; b < 6; ++b) {
      const int kk = kSymPairs[b][0], l = kSymPairs[b][1];
      const double dev_kl = Bbar(kk, l) - Ibar / 3.0 * delta(kk, l);
      const double sym4 = 0.5 * (delta(i, kk) * Bbar(j, l) + delta(j, kk) * Bbar(i, l) + delta(i, l) * Bbar(j, kk) +
                                 delta(j, l) * Bbar(i, kk));
      const double bracket = sym4 - (2.0 / 3.0) * (Bbar(i, j) * delta(kk, l) + delta(i, j) * Bbar(kk, l)) +
                             (2.0 / 9.0) * Ibar * delta(i, j) * delta(kk, l);
      L(a, b) += inv_J * (4.0 * d2 * dev_ij * dev_kl + 2.0 * d1 * bracket);
    }
  }
}

Sym3 kirchhoff_deviator_from(const Mat3& F, const Sym3& Dv, const Kernel& k) {
  const Sym3 Bbar = push_forward(F, Sym3::identity()) * k.jm23;
  const Sym3 Bebar = push_forward(F, Dv) * k.jm23;
  return 2.0 * k.eq.d1 * (Bbar - (k.inv.I1bar / 3.0) * Sym3::identity()) +
         2.0 * k.neq.d1 * (Bebar - (k.inv.I1ebar / 3.0) * Sym3::identity());
}

void require_finite_kappa(const MaterialParams& p, const char* op) {
  if (p.incompressible())
    raise(ErrorKind::Contract, std::string(op) + " needs finite kappa; use the pressure-based form for kappa = inf");
}

}  // namespace

InvariantSet compute_invariants(const Mat3& F, const Sym3& Dv) {
  const double J = F.determinant();
  if (!(J > 0.0)) raise(ErrorKind::InvalidDeformation, "det F must be positive, got " + std::to_string(J));
  if (!Dv.is_spd()) raise(ErrorKind::InvalidDeformation, "viscous state Dv is not SPD");

  const Mat3 Cm = F.transpose() * F;
  const Mat3 Dm = Dv.matrix();
  const Mat3 M = Cm * Dm;  // C Cv^-1

  InvariantSet inv;
  inv.J = J;
  inv.I1 = Cm.trace();
  const double jm23 = std::pow(J, -2.0 / 3.0);
  inv.I1bar = clamp_isochoric(jm23 * inv.I1);

  // tr(Cv) = tr(adj Dv) / det Dv, no inversion needed.
  const double trD = Dv.trace();
  inv.I1v = 0.5 * (trD * trD - Dv.dot(Dv)) / Dv.det();

  inv.I1e = M.trace();
  const double trM2 = (M * M).trace();
  inv.I2e = 0.5 * (inv.I1e * inv.I1e - trM2);
  inv.I1ebar = clamp_isochoric(jm23 * inv.I1e);
  inv.I2ebar = jm23 * jm23 * inv.I2e;
  return inv;
}

EnergyDerivs psi_eq(double I1bar, const MaterialParams& p) {
  return two_term_energy(I1bar, p.mu1, p.alpha1, p.mu2, p.alpha2);
}

EnergyDerivs psi_neq(double I1ebar, const MaterialParams& p) {
  return two_term_energy(I1ebar, p.m1, p.a1, p.m2, p.a2);
}

double j2_neq(const InvariantSet& inv, double dpsi_neq) {
  const double j2 =
      4.0 / (inv.J * inv.J) * (inv.I1ebar * inv.I1ebar / 3.0 - inv.I2ebar) * dpsi_neq * dpsi_neq;
  return j2 > 0.0 ? j2 : 0.0;
}

double viscosity(const InvariantSet& inv, const MaterialParams& p) {
  const double dpsi = psi_neq(inv.I1ebar, p).d1;
  const double j2 = j2_neq(inv, dpsi);
  const double hardening = p.K1 * (std::pow(inv.I1v, p.beta1) - std::pow(3.0, p.beta1));
  const double thinning = 1.0 + std::pow(p.K2 * j2, p.beta2);
  return p.etaInf + (p.eta0 - p.etaInf + hardening) / thinning;
}

Mat3 piola_stress_compressible(const Mat3& F, const Sym3& Dv, const MaterialParams& p) {
  require_finite_kappa(p, "piola_stress_compressible");
  const Kernel k = evaluate(F, Dv, p);
  return piola_deviatoric(F, Dv, k) + p.kappa * (k.J - 1.0) * k.J * k.FinvT;
}

Mat3 piola_stress_hybrid(const Mat3& F, const Sym3& Dv, double q, const MaterialParams& p) {
  const Kernel k = evaluate(F, Dv, p);
  return piola_deviatoric(F, Dv, k) + q * k.J * k.FinvT;
}

Sym3 kirchhoff_deviator(const Mat3& F, const Sym3& Dv, const MaterialParams& p) {
  return kirchhoff_deviator_from(F, Dv, evaluate(F, Dv, p));
}

CauchyStress cauchy_stress(const Mat3& F, const Sym3& Dv, double q, const MaterialParams& p) {
  const Kernel k = evaluate(F, Dv, p);
  const Sym3 Bebar = push_forward(F, Dv) * k.jm23;
  CauchyStress out;
  out.devTNEq = (2.0 * k.neq.d1 / k.J) * (Bebar - (k.inv.I1ebar / 3.0) * Sym3::identity());
  out.T = (1.0 / k.J) * kirchhoff_deviator_from(F, Dv, k) + q * Sym3::identity();
  return out;
}

CauchyStress cauchy_stress_umat(const Mat3& F, const Sym3& Dv, double Jhat, const MaterialParams& p) {
  require_finite_kappa(p, "cauchy_stress_umat");
  if (!(Jhat > 0.0)) raise(ErrorKind::InvalidDeformation, "Jhat must be positive");
  return cauchy_stress(F, Dv, p.kappa * (Jhat - 1.0), p);
}

Tangent6 deviatoric_moduli(const Mat3& F, const Sym3& Dv, const MaterialParams& p) {
  const Kernel k = evaluate(F, Dv, p);
  const Sym3 Bbar = push_forward(F, Sym3::identity()) * k.jm23;
  const Sym3 Bebar = push_forward(F, Dv) * k.jm23;
  Tangent6 L = Tangent6::Zero();
  add_branch_moduli(L, Bbar, k.inv.I1bar, k.eq.d1, k.eq.d2, 1.0 / k.J);
  add_branch_moduli(L, Bebar, k.inv.I1ebar, k.neq.d1, k.neq.d2, 1.0 / k.J);
  return L;
}

StressTangent tangent_moduli(const Mat3& F, const Sym3& Dv, double Jhat, const MaterialParams& p) {
  require_finite_kappa(p, "tangent_moduli");
  const double q = p.kappa * (Jhat - 1.0);
  const CauchyStress cs = cauchy_stress_umat(F, Dv, Jhat, p);
  StressTangent st;
  st.cauchy = cs.T;
  st.devTauNEq = F.determinant() * cs.devTNEq;
  st.piola = piola_stress_hybrid(F, Dv, q, p);
  const double J = F.determinant();
  st.L = deviatoric_moduli(F, Dv, p);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) st.L(a, b) += p.kappa * J;
  st.Khat = p.kappa * J;
  st.dKhat_dJhat = 0.0;
  return st;
}

Eigen::Matrix<double, 9, 9> piola_tangent_hybrid(const Mat3& F, const Sym3& Dv, double q, const MaterialParams& p) {
  const Kernel k = evaluate(F, Dv, p);
  const Mat3 Finv = F.inverse();
  const Mat3& FinvT = k.FinvT;
  const Sym3 tau = kirchhoff_deviator_from(F, Dv, k);
  const Mat3 tau_m = tau.matrix();

  // c = J * L_dev relates the Kirchhoff deviator increment to the stretching.
  Tangent6 c = deviatoric_moduli(F, Dv, p) * k.J;

  Eigen::Matrix<double, 9, 9> A;
  for (int kk = 0; kk < 3; ++kk) {
    for (int l = 0; l < 3; ++l) {
      Mat3 dF = Mat3::Zero();
      dF(kk, l) = 1.0;
      const Mat3 dl = dF * Finv;
      const Sym3 D = Sym3::from_matrix(dl);
      const Mat3 W = 0.5 * (dl - dl.transpose());
      const Mat3 dtau = contract(c, D).matrix() + W * tau_m - tau_m * W;
      const Mat3 dFinvT = -FinvT * dF.transpose() * FinvT;
      const Mat3 dS = dtau * FinvT + tau_m * dFinvT + q * k.J * (dl.trace() * FinvT + dFinvT);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) A(3 * i + j, 3 * kk + l) = dS(i, j);
    }
  }
  return A;
}

Sym3 flow_rate(const Mat3& F, const Sym3& Dv, const MaterialParams& p) {
  const InvariantSet inv = compute_invariants(F, Dv);
  const double eta = viscosity(inv, p);
  if (!(eta > 0.0) || !std::isfinite(eta))
    raise(ErrorKind::DivisionByZero, "viscosity must be positive and finite, got " + std::to_string(eta));
  const double dpsi = psi_neq(inv.I1ebar, p).d1;
  const double rate = 2.0 * std::pow(inv.J, -2.0 / 3.0) * dpsi / eta;
  const Sym3 C = Sym3::from_matrix(F.transpose() * F);
  return -rate * (sandwich(Dv, C) - (C.dot(Dv) / 3.0) * Dv);
}

double time_scale(const Mat3& F, const Sym3& Dv, const MaterialParams& p) {
  const InvariantSet inv = compute_invariants(F, Dv);
  const double dpsi = psi_neq(inv.I1ebar, p).d1;
  if (!(dpsi > 0.0)) return std::numeric_limits<double>::infinity();
  return viscosity(inv, p) / (2.0 * dpsi);
}

double dissipation_rate(const Mat3& F, const Sym3& Dv, const MaterialParams& p) {
  const InvariantSet inv = compute_invariants(F, Dv);
  const double dpsi = psi_neq(inv.I1ebar, p).d1;
  if (dpsi == 0.0) return 0.0;
  const Sym3 C = Sym3::from_matrix(F.transpose() * F);
  return -dpsi * std::pow(inv.J, -2.0 / 3.0) * C.dot(flow_rate(F, Dv, p));
}

}  // namespace viscofe
