#include "viscofe/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "viscofe/constitutive.hpp"
#include "viscofe/errors.hpp"

namespace viscofe {
namespace {

InvariantSet radial_invariants(double lambda, double lv) {
  const double l2 = lambda * lambda, v2 = lv * lv;
  const double l4 = l2 * l2, v4 = v2 * v2;
  InvariantSet inv;
  inv.J = 1.0;
  inv.I1 = inv.I1bar = 1.0 / l4 + 2.0 * l2;
  inv.I1e = inv.I1ebar = 2.0 * l2 / v2 + v4 / l4;
  inv.I2e = inv.I2ebar = l4 / v4 + 2.0 * v2 / l2;
  inv.I1v = 1.0 / v4 + 2.0 * v2;
  return inv;
}

}  // namespace

Sym3 rk5_step(const RKStepInput& in, const MaterialParams& p) {
  if (!(in.dt > 0.0)) raise(ErrorKind::Contract, "rk5_step: dt must be positive");
  auto rate = [&](double c, const Sym3& Dv) {
    if (!Dv.all_finite() || !Dv.is_spd())
      raise(ErrorKind::StepTooLarge, "rk5_step: stage state lost positive definiteness");
    const Mat3 F = (1.0 - c) * in.F_prev + c * in.F_curr;
    if (c == 0.0) return flow_rate(F, Dv, p);
    // Intermediate stages are not normalized; I1v < 3 there can drive eta
    // negative, which only an oversized step produces.
    try {
      return flow_rate(F, Dv, p);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DivisionByZero) throw;
      raise(ErrorKind::StepTooLarge, std::string("rk5_step: stage ") + e.what());
    }
  };
  const Sym3 A = lawson_rk5_update(in.Dv_prev, in.dt, rate);
  const double detA = A.det();
  if (!(detA > 0.0) || !A.all_finite())
    raise(ErrorKind::StepTooLarge, "rk5_step: det A = " + std::to_string(detA) + " <= 0");
  const Sym3 Dv = A * (1.0 / std::cbrt(detA));
  if (!Dv.is_spd()) raise(ErrorKind::StepTooLarge, "rk5_step: updated state is not SPD");
  return Dv;
}

Sym3 advance_viscous_state(const RKStepInput& in, const MaterialParams& p, int max_halvings) {
  for (int halving = 0;; ++halving) {
    const int pieces = 1 << halving;
    try {
      Sym3 Dv = in.Dv_prev;
      for (int s = 0; s < pieces; ++s) {
        const double c0 = static_cast<double>(s) / pieces;
        const double c1 = static_cast<double>(s + 1) / pieces;
        RKStepInput sub;
        sub.F_prev = (1.0 - c0) * in.F_prev + c0 * in.F_curr;
        sub.F_curr = (1.0 - c1) * in.F_prev + c1 * in.F_curr;
        sub.Dv_prev = Dv;
        sub.dt = in.dt / pieces;
        Dv = rk5_step(sub, p);
      }
      return Dv;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::StepTooLarge) throw;
      if (halving >= max_halvings)
        raise(ErrorKind::StepTooLarge,
              "viscous update rejected after " + std::to_string(max_halvings) + " halvings: " + e.what());
    }
  }
}

double suggest_dt(const Mat3& F, const Sym3& Dv, const MaterialParams& p, const DtLimits& limits) {
  const double tau = time_scale(F, Dv, p);
  if (std::isinf(tau)) return limits.max_dt;
  return std::clamp(limits.safety * 1e-2 * tau, limits.min_dt, limits.max_dt);
}

double radial_viscous_rate(double lambda, double lv, const MaterialParams& p) {
  if (!(lambda > 0.0) || !(lv > 0.0))
    raise(ErrorKind::StepTooLarge, "radial stretch or viscous stretch became nonpositive");
  const InvariantSet inv = radial_invariants(lambda, lv);
  const double dpsi = psi_neq(inv.I1ebar, p).d1;
  if (dpsi == 0.0) return 0.0;
  const double eta = viscosity(inv, p);
  if (!(eta > 0.0)) raise(ErrorKind::DivisionByZero, "viscosity must be positive");
  const double ratio = lambda / lv;
  const double r2 = ratio * ratio;
  const double r4 = r2 * r2;
  return dpsi * lv * (r4 * r2 - 1.0) / (3.0 * eta * r4);
}

double radial_time_scale(double lambda, double lv, const MaterialParams& p) {
  const InvariantSet inv = radial_invariants(lambda, lv);
  const double dpsi = psi_neq(inv.I1ebar, p).d1;
  if (!(dpsi > 0.0)) return std::numeric_limits<double>::infinity();
  return viscosity(inv, p) / (2.0 * dpsi);
}

double suggest_dt_radial(double lambda, double lv, const MaterialParams& p, const DtLimits& limits) {
  const double tau = radial_time_scale(lambda, lv, p);
  if (std::isinf(tau)) return limits.max_dt;
  return std::clamp(limits.safety * 1e-2 * tau, limits.min_dt, limits.max_dt);
}

double rk5_scalar_step(const std::function<double(double)>& lambda_at, double lv_prev, double dt,
                       const MaterialParams& p) {
  if (!(dt > 0.0)) raise(ErrorKind::Contract, "rk5_scalar_step: dt must be positive");
  if (!(lv_prev > 0.0)) raise(ErrorKind::Contract, "rk5_scalar_step: lambda_v must be positive");
  auto rate = [&](double c, double lv) {
    if (!(lv > 0.0) || !std::isfinite(lv))
      raise(ErrorKind::StepTooLarge, "rk5_scalar_step: stage lambda_v is nonpositive");
    return radial_viscous_rate(lambda_at(c), lv, p);
  };
  const double lv = lawson_rk5_update(lv_prev, dt, rate);
  if (!(lv > 0.0) || !std::isfinite(lv)) raise(ErrorKind::StepTooLarge, "rk5_scalar_step: lambda_v is nonpositive");
  return lv;
}

double rk5_scalar_step(double lambda_prev, double lambda_curr, double lv_prev, double dt, const MaterialParams& p) {
  return rk5_scalar_step([&](double c) { return (1.0 - c) * lambda_prev + c * lambda_curr; }, lv_prev, dt, p);
}

}  // namespace viscofe
