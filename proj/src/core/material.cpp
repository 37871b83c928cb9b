#include "viscofe/material.hpp"

#include <string>

#include "viscofe/errors.hpp"

namespace viscofe {

void MaterialParams::validate() const {
  auto fail = [](const std::string& msg) { raise(ErrorKind::Parameter, "material: " + msg); };
  if (mu1 < 0.0 || mu2 < 0.0) fail("mu1, mu2 must be >= 0");
  if (m1 < 0.0 || m2 < 0.0) fail("m1, m2 must be >= 0");
  if (!(mu1 + mu2 > 0.0)) fail("mu1 + mu2 must be > 0");
  if (alpha1 == 0.0 || alpha2 == 0.0 || a1 == 0.0 || a2 == 0.0)
    fail("exponents alpha_r and a_r must be nonzero");
  if (!(kappa > 0.0)) fail("kappa must be > 0 or inf");
  if (etaInf < 0.0 || eta0 < etaInf) fail("need eta0 >= etaInf >= 0");
  if (K1 < 0.0 || K2 < 0.0) fail("K1, K2 must be >= 0");
}

MaterialParams MaterialParams::with_viscosity_scaled(double factor) const {
  MaterialParams out = *this;
  out.eta0 *= factor;
  out.etaInf *= factor;
  out.K1 *= factor;
  return out;
}

MaterialParams MaterialParams::with_kappa(double k) const {
  MaterialParams out = *this;
  out.kappa = k;
  return out;
}

MaterialParams vhb4910() {
  MaterialParams p;
  p.mu1 = 13.54;
  p.mu2 = 1.08;
  p.alpha1 = 1.0;
  p.alpha2 = -2.474;
  p.m1 = 5.42;
  p.m2 = 20.78;
  p.a1 = -10.0;
  p.a2 = 1.948;
  p.eta0 = 7014.0;
  p.etaInf = 0.1;
  p.K1 = 3507.0;
  p.K2 = 1.0;
  p.beta1 = 1.852;
  p.beta2 = 0.26;
  p.kappa = kInfiniteKappa;
  return p;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidDeformation: return "invalid-deformation";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::DivisionByZero: return "division-by-zero";
    case ErrorKind::StepTooLarge: return "step-too-large";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

}  // namespace viscofe
