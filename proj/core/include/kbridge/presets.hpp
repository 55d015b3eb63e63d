#ifndef KBRIDGE_PRESETS_HPP_
#define KBRIDGE_PRESETS_HPP_

#include <cstddef>
#include <numbers>

#include "kbridge/prior.hpp"
#include "kbridge/sinkhorn.hpp"

namespace kbridge::presets {

// Built-in "paper-example" problem on [0, 1] x [0, 1]:
//   prior   dX = dW / 4, killing V = 0.3
//   rho0(x) = 1 - cos(2 pi x)
//   Q(t, z) = sin(pi z) (1 - cos(3 pi t - pi)) for t >= 1/3, else 0
inline constexpr double kSigma = 0.25;
inline constexpr double kKilling = 0.3;
inline constexpr double kAbsorptionStart = 1.0 / 3.0;
// Exact mass of Q: (2 / pi) * (2 / 3).
inline constexpr double kKilledMass = 4.0 / (3.0 * std::numbers::pi);

PriorSpec example_prior();
double example_rho0(double x);
double example_q(double t, double z);

ProblemSpec example_problem(std::size_t nx = 201, std::size_t nt = 301);
// Same data on an arbitrary box; rho0 and Q vanish outside [0, 1].
ProblemSpec example_problem(const SpaceTimeGrid& grid);

}  // namespace kbridge::presets

#endif  // KBRIDGE_PRESETS_HPP_
