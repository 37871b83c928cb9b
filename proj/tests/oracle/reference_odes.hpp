#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "viscofe/material.hpp"

namespace oracle {

struct UniaxialRef {
  double t, lambda_lat, S33;
};

/// Uniaxial stress with finite kappa as a monolithic differential-algebraic
/// system: Cv integrated by dopri5, the lateral stretch solved to roundoff at
/// every right-hand-side evaluation. F33 follows the given (t, F33) knots.
std::vector<UniaxialRef> uniaxial_dae(const viscofe::MaterialParams& p,
                                      const std::vector<std::pair<double, double>>& knots,
                                      const std::vector<double>& out_times, double rtol = 1e-13);

/// lambda_v(t) of the radial evolution law at a fixed material radius, for a
/// hoop stretch history lambda(t), evaluated at out_times.
std::vector<double> radial_lv(const viscofe::MaterialParams& p, const std::function<double(double)>& lambda,
                              const std::vector<double>& out_times, double rtol = 1e-13);

}  // namespace oracle
