#pragma once

#include "viscofe/material.hpp"
#include "viscofe/tensor.hpp"

// Constitutive kernel of the equilibrium / non-equilibrium viscoelastic model.
//
// The internal variable is carried as Dv = inverse(Cv), a unit-determinant SPD
// tensor. Every function here is pure and works directly with Dv, so Cv is
// never formed.

namespace viscofe {

struct InvariantSet {
  double I1 = 3.0;
  double J = 1.0;
  double I1bar = 3.0;
  double I1v = 3.0;
  double I1e = 3.0;
  double I2e = 3.0;
  double I1ebar = 3.0;
  double I2ebar = 3.0;
};

/// Value, first and second derivative of a scalar energy in its argument.
struct EnergyDerivs {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

struct CauchyStress {
  Sym3 T;        // kPa
  Sym3 devTNEq;  // deviatoric non-equilibrium part of T, kPa
};

/// Stress and tangent data in the layout expected by a UMAT-style caller.
struct StressTangent {
  Sym3 cauchy;
  Mat3 piola;
  Sym3 devTauNEq;  // J * dev T^NEq
  Tangent6 L;      // includes the kappa*J bulk block
  double Khat = 0.0;
  double dKhat_dJhat = 0.0;
};

InvariantSet compute_invariants(const Mat3& F, const Sym3& Dv);

EnergyDerivs psi_eq(double I1bar, const MaterialParams& p);
EnergyDerivs psi_neq(double I1ebar, const MaterialParams& p);

/// Second invariant of dev T^NEq, J2 = 1/2 dev T^NEq : dev T^NEq.
double j2_neq(const InvariantSet& inv, double dpsi_neq);

/// Shear-thinning viscosity, kPa s.
double viscosity(const InvariantSet& inv, const MaterialParams& p);

/// First Piola-Kirchhoff stress with the kappa (J-1) J F^-T volumetric term.
Mat3 piola_stress_compressible(const Mat3& F, const Sym3& Dv, const MaterialParams& p);

/// First Piola-Kirchhoff stress of the pressure-based (hybrid) form.
Mat3 piola_stress_hybrid(const Mat3& F, const Sym3& Dv, double q, const MaterialParams& p);

/// Cauchy stress with the volumetric part given by the pressure q.
CauchyStress cauchy_stress(const Mat3& F, const Sym3& Dv, double q, const MaterialParams& p);

/// Cauchy stress with the volumetric part kappa (Jhat - 1); needs finite kappa.
CauchyStress cauchy_stress_umat(const Mat3& F, const Sym3& Dv, double Jhat, const MaterialParams& p);

/// Deviatoric part of the spatial tangent (everything but kappa J delta x delta).
Tangent6 deviatoric_moduli(const Mat3& F, const Sym3& Dv, const MaterialParams& p);

/// Full UMAT contract: stress, tangent L, Khat = kappa J and dKhat/dJhat = 0.
/// Needs finite kappa.
StressTangent tangent_moduli(const Mat3& F, const Sym3& Dv, double Jhat, const MaterialParams& p);

/// dS/dF at frozen Dv for the hybrid stress, as a 9x9 matrix with row index
/// 3*i + J and column index 3*k + L (S_iJ, F_kL). Built from the deviatoric
/// spatial moduli plus the spin, geometric and pressure terms.
Eigen::Matrix<double, 9, 9> piola_tangent_hybrid(const Mat3& F, const Sym3& Dv, double q, const MaterialParams& p);

/// d(Dv)/dt of the evolution law, evaluated without inverting Dv.
Sym3 flow_rate(const Mat3& F, const Sym3& Dv, const MaterialParams& p);

/// Material time scale eta / (2 dPsiNEq/dI1ebar). +inf when the derivative is 0.
double time_scale(const Mat3& F, const Sym3& Dv, const MaterialParams& p);

/// Dissipation rate -d(psi)/d(Cv) : dCv/dt, kPa/s. Non-negative by construction.
double dissipation_rate(const Mat3& F, const Sym3& Dv, const MaterialParams& p);

/// Deviatoric Kirchhoff stress J dev T at frozen Dv.
Sym3 kirchhoff_deviator(const Mat3& F, const Sym3& Dv, const MaterialParams& p);

}  // namespace viscofe
