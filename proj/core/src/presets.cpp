#include "kbridge/presets.hpp"

#include <cmath>

namespace kbridge::presets {

using std::numbers::pi;

PriorSpec example_prior() { return constant_prior(0.0, kSigma, kKilling); }

double example_rho0(double x) {
  if (x < 0.0 || x > 1.0) return 0.0;
  return 1.0 - std::cos(2.0 * pi * x);
}

double example_q(double t, double z) {
  if (z < 0.0 || z > 1.0 || t < kAbsorptionStart || t > 1.0) return 0.0;
  return std::sin(pi * z) * (1.0 - std::cos(3.0 * pi * t - pi));
}

ProblemSpec example_problem(const SpaceTimeGrid& grid) {
  const std::size_t nx = grid.nx();
  ScalarField rho0(nx);
  for (std::size_t i = 0; i < nx; ++i) rho0[i] = example_rho0(grid.x(i));
  SpaceTimeField q = sample(example_q, grid);
  // sin(pi * 1.0) is 1.2e-16, not zero.
  for (std::size_t i = 0; i < nx; ++i) {
    if (grid.x(i) > 0.0 && grid.x(i) < 1.0) continue;
    for (std::size_t k = 0; k < grid.nt(); ++k) q(k, i) = 0.0;
  }
  return make_problem(example_prior(), grid, std::move(rho0), std::move(q));
}

ProblemSpec example_problem(std::size_t nx, std::size_t nt) {
  return example_problem(SpaceTimeGrid(0.0, 1.0, nx, nt));
}

}  // namespace kbridge::presets
