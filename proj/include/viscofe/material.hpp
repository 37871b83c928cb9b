#pragma once

#include <cmath>
#include <limits>

namespace viscofe {

/// Constants of the two-term equilibrium/non-equilibrium energies, the
/// shear-thinning viscosity and the bulk response. Units: kPa, s.
struct MaterialParams {
  double mu1 = 0.0;     // kPa
  double mu2 = 0.0;     // kPa
  double alpha1 = 1.0;  // -
  double alpha2 = 1.0;  // -
  double m1 = 0.0;      // kPa
  double m2 = 0.0;      // kPa
  double a1 = 1.0;      // -
  double a2 = 1.0;      // -
  double kappa = std::numeric_limits<double>::infinity();  // kPa, +inf means incompressible
  double eta0 = 0.0;    // kPa s
  double etaInf = 0.0;  // kPa s
  double K1 = 0.0;      // kPa s
  double K2 = 0.0;      // 1/kPa^2
  double beta1 = 1.0;   // -
  double beta2 = 1.0;   // -

  bool incompressible() const { return std::isinf(kappa); }
  double shear_modulus_eq() const { return mu1 + mu2; }
  double shear_modulus_neq() const { return m1 + m2; }

  /// Throws Error(Parameter) when an invariant is violated.
  void validate() const;

  /// Returns a copy with eta0, etaInf and K1 multiplied by factor.
  MaterialParams with_viscosity_scaled(double factor) const;
  MaterialParams with_kappa(double k) const;

  friend bool operator==(const MaterialParams&, const MaterialParams&) = default;
};

/// Acrylic elastomer VHB 4910, bulk modulus left incompressible.
MaterialParams vhb4910();

inline constexpr double kInfiniteKappa = std::numeric_limits<double>::infinity();

}  // namespace viscofe
