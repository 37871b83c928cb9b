#include "viscofe/shell_exact.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "viscofe/constitutive.hpp"
#include "viscofe/errors.hpp"
#include "viscofe/parallel.hpp"

namespace viscofe {
namespace {

constexpr double kTimeSnap = 1e-12;

long integrate_point(double R, double& lv, double t0, double t1, const ShellGeometry& g, const MaterialParams& p,
                     const DtLimits& limits, double dt_max) {
  long steps = 0;
  const std::vector<double> bps = g.breakpoints();
  double t = t0;
  while (t < t1 - kTimeSnap * std::max(1.0, t1)) {
    double target = t1;
    for (double b : bps)
      if (b > t + kTimeSnap) {
        target = std::min(target, b);
        break;
      }
    const double lam = lambda_field(R, t, g);
    double dt = std::min({dt_max, target - t, suggest_dt_radial(lam, lv, p, limits)});
    if (t + dt > target - kTimeSnap * std::max(1.0, target)) dt = target - t;
    for (int h = 0;; ++h) {
      try {
        const double t_next = (dt == target - t) ? target : t + dt;
        const double tt = t, step = t_next - t;
        lv = rk5_scalar_step([&](double c) { return lambda_field(R, tt + c * step, g); }, lv, step, p);
        t = t_next;
        break;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::StepTooLarge) throw;
        if (h >= 10)
          raise(ErrorKind::StepTooLarge, "shell point R = " + std::to_string(R) + " at t = " + std::to_string(t) +
                                             ": " + e.what());
        dt *= 0.5;
      }
    }
    ++steps;
  }
  return steps;
}

}  // namespace

ShellGeometry ShellGeometry::ramp(double A, double B, double rate, double t_end) {
  ShellGeometry g;
  g.A = A;
  g.B = B;
  g.b_knots = {{0.0, B}, {t_end, B * (1.0 + rate * t_end)}};
  return g;
}

double ShellGeometry::b_at(double t) const {
  if (t <= b_knots.front().first) return b_knots.front().second;
  for (std::size_t i = 1; i < b_knots.size(); ++i) {
    if (t <= b_knots[i].first) {
      const auto [t0, b0] = b_knots[i - 1];
      const auto [t1, b1] = b_knots[i];
      const double s = (t - t0) / (t1 - t0);
      return (1.0 - s) * b0 + s * b1;
    }
  }
  return b_knots.back().second;
}

std::vector<double> ShellGeometry::breakpoints() const {
  std::vector<double> out;
  for (const auto& k : b_knots) out.push_back(k.first);
  return out;
}

void ShellGeometry::validate() const {
  if (!(A > 0.0 && A < B)) raise(ErrorKind::Geometry, "shell needs 0 < A < B");
  if (b_knots.empty() || b_knots.front().first != 0.0 || b_knots.front().second != B)
    raise(ErrorKind::Geometry, "b history must start at (0, B)");
  const double b_min = std::cbrt(B * B * B - A * A * A);
  for (std::size_t i = 0; i < b_knots.size(); ++i) {
    if (i > 0 && !(b_knots[i].first > b_knots[i - 1].first))
      raise(ErrorKind::Geometry, "b history times must increase");
    if (!(b_knots[i].second > b_min))
      raise(ErrorKind::Geometry, "b = " + std::to_string(b_knots[i].second) + " closes the inner cavity");
  }
}

double lambda_field(double R, double b, double B) {
  const double arg = 1.0 + (b * b * b - B * B * B) / (R * R * R);
  if (!(arg > 0.0)) raise(ErrorKind::Geometry, "lambda^3 <= 0 at R = " + std::to_string(R));
  return std::cbrt(arg);
}

double lambda_field(double R, double t, const ShellGeometry& g) { return lambda_field(R, g.b_at(t), g.B); }

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) raise(ErrorKind::Contract, "gauss_legendre needs n >= 1");
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

GaussGrid make_gauss_grid(double a, double b, int n) {
  std::vector<double> x, w;
  gauss_legendre(n, x, w);
  GaussGrid g;
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    g.R.push_back(mid + half * x[i]);
    g.w.push_back(half * w[i]);
  }
  g.lv.assign(n, 1.0);
  return g;
}

double shell_dWeq(double lambda, const MaterialParams& p) {
  const double l5 = std::pow(lambda, 5);
  const double I1 = 1.0 / (lambda * lambda * lambda * lambda) + 2.0 * lambda * lambda;
  return psi_eq(I1, p).d1 * (4.0 * lambda - 4.0 / l5);
}

double shell_dWneq(double lambda, double lv, const MaterialParams& p) {
  const double l2 = lambda * lambda, v2 = lv * lv;
  const double I1e = 2.0 * l2 / v2 + v2 * v2 / (l2 * l2);
  return psi_neq(I1e, p).d1 * (4.0 * lambda / v2 - 4.0 * v2 * v2 / (l2 * l2 * lambda));
}

ShellExact::ShellExact(ShellGeometry geometry, MaterialParams params, int n_gauss, DtLimits limits, double dt_max)
    : geom_(std::move(geometry)), params_(params), limits_(limits), dt_max_(dt_max) {
  geom_.validate();
  params_.validate();
  if (!params_.incompressible()) raise(ErrorKind::Contract, "the exact shell solution needs kappa = inf");
  if (n_gauss < 2) raise(ErrorKind::Contract, "n_gauss must be >= 2");
  grid_ = make_gauss_grid(geom_.A, geom_.B, n_gauss);
}

void ShellExact::add_probe(double R) {
  if (t_ != 0.0) raise(ErrorKind::Contract, "probes must be added at t = 0");
  if (R < geom_.A || R > geom_.B) raise(ErrorKind::Geometry, "probe radius outside [A, B]");
  Probe pr{R, {}, 1.0};
  if (R > geom_.A) pr.grid = make_gauss_grid(geom_.A, R, static_cast<int>(grid_.R.size()));
  probes_.push_back(std::move(pr));
}

long ShellExact::advance_point(double R, double& lv, double t0, double t1) const {
  return integrate_point(R, lv, t0, t1, geom_, params_, limits_, dt_max_);
}

void ShellExact::advance_to(double t, int threads) {
  if (t < t_) raise(ErrorKind::Contract, "advance_to cannot go backwards in time");
  if (t == t_) return;
  // Flatten every (R, lv) pair so the work can be split evenly.
  std::vector<std::pair<double, double*>> points;
  for (std::size_t i = 0; i < grid_.R.size(); ++i) points.emplace_back(grid_.R[i], &grid_.lv[i]);
  for (auto& pr : probes_) {
    points.emplace_back(pr.R, &pr.lv);
    for (std::size_t i = 0; i < pr.grid.R.size(); ++i) points.emplace_back(pr.grid.R[i], &pr.grid.lv[i]);
  }
  std::vector<long> counts(points.size(), 0);
  const double t0 = t_;
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) counts[i] = advance_point(points[i].first, *points[i].second, t0, t);
  };
  parallel_chunks(points.size(), threads, work);
  for (long c : counts) rk_steps_ += c;
  t_ = t;
}

double ShellExact::weighted_integral(const GaussGrid& g, double t) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < g.R.size(); ++i) {
    const double R = g.R[i];
    const double lam = lambda_field(R, t, geom_);
    sum += g.w[i] / (R * lam * lam) * (shell_dWeq(lam, params_) + shell_dWneq(lam, g.lv[i], params_));
  }
  return sum;
}

double ShellExact::outer_pressure() const {
  const double b = geom_.b_at(t_);
  return b * b / (geom_.B * geom_.B) * weighted_integral(grid_, t_);
}

std::pair<double, double> ShellExact::stress_fields(double R) const {
  for (const auto& pr : probes_) {
    if (pr.R != R) continue;
    const double lam = lambda_field(R, t_, geom_);
    const double s1 = pr.grid.R.empty() ? 0.0 : lam * lam * weighted_integral(pr.grid, t_);
    const double l2 = lam * lam, v2 = pr.lv * pr.lv;
    const double I1 = 1.0 / (l2 * l2) + 2.0 * l2;
    const double I1e = 2.0 * l2 / v2 + v2 * v2 / (l2 * l2);
    const double l5 = l2 * l2 * lam;
    const double s2 = s1 / (l2 * lam) + 2.0 * psi_eq(I1, params_).d1 * (lam - 1.0 / l5) +
                      2.0 * psi_neq(I1e, params_).d1 * (lam / v2 - v2 * v2 / l5);
    return {s1, s2};
  }
  raise(ErrorKind::Contract, "stress_fields: R = " + std::to_string(R) + " is not a registered probe");
}

std::vector<std::vector<double>> evolve_shell_state(const GaussGrid& grid, const std::vector<double>& times,
                                                    const ShellGeometry& g, const MaterialParams& p,
                                                    const DtLimits& limits) {
  g.validate();
  std::vector<double> lv = grid.lv;
  std::vector<std::vector<double>> out;
  double t = 0.0;
  for (double tk : times) {
    if (tk < t) raise(ErrorKind::Contract, "time grid must be monotone");
    for (std::size_t i = 0; i < lv.size(); ++i) {
      try {
        integrate_point(grid.R[i], lv[i], t, tk, g, p, limits, std::numeric_limits<double>::infinity());
      } catch (const Error& e) {
        raise(e.kind(), "grid point " + std::to_string(i) + ": " + e.what());
      }
    }
    t = tk;
    out.push_back(lv);
  }
  return out;
}

}  // namespace viscofe
