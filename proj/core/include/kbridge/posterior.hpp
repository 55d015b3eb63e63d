#ifndef KBRIDGE_POSTERIOR_HPP_
#define KBRIDGE_POSTERIOR_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kbridge/grid.hpp"
#include "kbridge/pde.hpp"
#include "kbridge/prior.hpp"
#include "kbridge/sinkhorn.hpp"

namespace kbridge {

// Relative floor below which control and killing rescale are masked.
inline constexpr double kPositivityFloor = 1e-12;

struct PosteriorSolution {
  SpaceTimeField P;                 // phi * phihat
  SpaceTimeField u;                 // sigma d/dx log phi
  SpaceTimeField drift_correction;  // sigma u = a d/dx log phi
  SpaceTimeField alpha;             // Lambda / phi
  SpaceTimeField Qhat;              // Lambda V phihat
  std::vector<double> survivor_mass;
  // 1 where P >= kPositivityFloor * max P; u and alpha are 0 elsewhere.
  std::vector<std::uint8_t> mask;
};

struct ControlFields {
  SpaceTimeField u;
  SpaceTimeField drift_correction;
  std::vector<std::uint8_t> mask;
};

struct KillingFields {
  SpaceTimeField alpha;
  SpaceTimeField Qhat;
};

SpaceTimeField marginals(const Potentials& pot, const SpaceTimeGrid& grid);

// Central differences of log phi in the interior; zero at the reflecting
// ends, matching the zero-flux condition of the generator.
ControlFields control(const Potentials& pot, const PriorSpec& prior,
                      const SpaceTimeGrid& grid);

KillingFields killing(const Potentials& pot, const PriorSpec& prior,
                      const SpaceTimeGrid& grid);

PosteriorSolution assemble_posterior(const Potentials& pot,
                                     const PriorSpec& prior,
                                     const SpaceTimeGrid& grid);

// Max-norm residual of
//   dP/dt = -d/dx((b + sigma u) P) + 1/2 d2/dx2(a P) - alpha V P
// over interior nodes, with centered differences in t and x, divided by
// max P.
double fp_residual(const PosteriorSolution& sol, const PriorSpec& prior,
                   const SpaceTimeGrid& grid);

// Joint densities linking the start point to the surviving endpoint and to
// the (kill time, kill point) pair.
struct Couplings {
  Eigen::MatrixXd pi_xy;               // (x, y)
  std::vector<Eigen::MatrixXd> pi_xzt;  // [k](x, z)
  ScalarField f;                        // phihat(0, .) / R0
};

inline constexpr std::size_t kDefaultCouplingBudget = 20'000'000;

// pi_xy(x, y)     = r(0, x, 1, y) phihat(0, x) phi(1, y)
// pi_xzt(x, z, t) = V(t, z) r(0, x, t, z) phihat(0, x) Lambda(t, z)
// Throws BudgetError when nx * nx * nt exceeds budget.
Couplings couplings(const Potentials& pot, const PriorSpec& prior,
                    const SpaceTimeGrid& grid, std::span<const double> r0,
                    std::size_t budget = kDefaultCouplingBudget);

// Couplings of the form above for arbitrary phihat0 and Lambda; with
// phihat0 = R0 and Lambda = 1 these are the prior couplings.
Couplings kernel_couplings(const KolmogorovPropagator& propagator,
                           std::span<const double> phihat0,
                           const SpaceTimeField& lambda,
                           std::size_t budget = kDefaultCouplingBudget);

// Trapezoid-weighted generalized relative entropy
//   sum w (pi log(pi / rho) - pi + rho) over both blocks.
double relative_entropy(const Couplings& pi, const Couplings& rho,
                        const SpaceTimeGrid& grid);

}  // namespace kbridge

#endif  // KBRIDGE_POSTERIOR_HPP_
