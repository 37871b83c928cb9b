#include "reference_odes.hpp"

#include <cmath>
#include <stdexcept>

#include "direct_inversion.hpp"
#include "dopri5.hpp"

namespace oracle {
namespace {

M3 unpack(const Eigen::VectorXd& y) {
  M3 m;
  m << y[0], y[3], y[4], y[3], y[1], y[5], y[4], y[5], y[2];
  return m;
}

Eigen::VectorXd pack(const M3& m) {
  Eigen::VectorXd y(6);
  y << m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(1, 2) + m(2, 1));
  return y;
}

double f33_at(const std::vector<std::pair<double, double>>& knots, double t) {
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (t <= knots[i].first) {
      const double s = (t - knots[i - 1].first) / (knots[i].first - knots[i - 1].first);
      return (1.0 - s) * knots[i - 1].second + s * knots[i].second;
    }
  return knots.back().second;
}

M3 diag(double a, double b, double c) {
  M3 F = M3::Zero();
  F(0, 0) = a;
  F(1, 1) = b;
  F(2, 2) = c;
  return F;
}

// Solves S11 = 0 for the lateral stretch by safeguarded secant/Newton.
double solve_lateral(double l3, const M3& Cv, const viscofe::MaterialParams& p, double guess) {
  auto s11 = [&](double l) {
    const M3 F = diag(l, l, l3);
    const double J = F.determinant();
    return piola_cv(F, Cv, p.kappa * (J - 1.0), p)(0, 0);
  };
  double l = guess;
  for (int it = 0; it < 100; ++it) {
    const double r = s11(l);
    const double h = 1e-7 * l;
    const double d = (s11(l + h) - s11(l - h)) / (2.0 * h);
    double dl = -r / d;
    if (std::abs(dl) > 0.2 * l) dl = std::copysign(0.2 * l, dl);
    l += dl;
    if (std::abs(dl) < 1e-15 * l) return l;
  }
  throw std::runtime_error("oracle lateral solve did not converge");
}

}  // namespace

std::vector<UniaxialRef> uniaxial_dae(const viscofe::MaterialParams& p,
                                      const std::vector<std::pair<double, double>>& knots,
                                      const std::vector<double>& out_times, double rtol) {
  double guess = 1.0;
  auto rhs = [&](double t, const Eigen::VectorXd& y) {
    const M3 Cv = unpack(y);
    const double l3 = f33_at(knots, t);
    guess = solve_lateral(l3, Cv, p, guess);
    return pack(cv_rate(diag(guess, guess, l3), Cv, p));
  };
  Eigen::VectorXd y = pack(M3::Identity());
  std::vector<UniaxialRef> out;
  double t = 0.0;
  for (double to : out_times) {
    // Integrate segment by segment so the F33 kinks are hit exactly.
    while (t < to) {
      double stop = to;
      for (const auto& k : knots)
        if (k.first > t && k.first < stop) stop = k.first;
      y = dopri5(rhs, t, y, stop, rtol, rtol * 1e-3, 1e-3);
      t = stop;
    }
    const M3 Cv = unpack(y);
    const double l3 = f33_at(knots, t);
    const double l = solve_lateral(l3, Cv, p, guess);
    const M3 F = diag(l, l, l3);
    out.push_back({t, l, piola_cv(F, Cv, p.kappa * (F.determinant() - 1.0), p)(2, 2)});
  }
  return out;
}

std::vector<double> radial_lv(const viscofe::MaterialParams& p, const std::function<double(double)>& lambda,
                              const std::vector<double>& out_times, double rtol) {
  auto rhs = [&](double t, const Eigen::VectorXd& y) {
    const double l = lambda(t), v = y[0];
    // Radial frame: F = diag(l^-2, l, l), Cv = diag(v^-4, v^2, v^2).
    const M3 F = diag(1.0 / (l * l), l, l);
    const M3 Cv = diag(1.0 / std::pow(v, 4), v * v, v * v);
    const Invariants inv = invariants_cv(F, Cv);
    const double dn = energy_hp(inv.I1ebar, p.m1, p.a1, p.m2, p.a2).d1;
    const double eta = viscosity_cv(F, Cv, p);
    Eigen::VectorXd d(1);
    d[0] = dn * v * (std::pow(l / v, 6) - 1.0) / (3.0 * eta * std::pow(l / v, 4));
    return d;
  };
  Eigen::VectorXd y(1);
  y[0] = 1.0;
  std::vector<double> out;
  double t = 0.0;
  for (double to : out_times) {
    if (to > t) y = dopri5(rhs, t, y, to, rtol, rtol * 1e-3, 1e-3);
    t = to;
    out.push_back(y[0]);
  }
  return out;
}

}  // namespace oracle
