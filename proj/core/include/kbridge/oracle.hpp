#ifndef KBRIDGE_ORACLE_HPP_
#define KBRIDGE_ORACLE_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kbridge/grid.hpp"
#include "kbridge/posterior.hpp"
#include "kbridge/prior.hpp"
#include "kbridge/sinkhorn.hpp"

namespace kbridge::oracle {

// Finite-state chain with killing. At step k (1-based in the docs, 0-based
// in the arrays) a particle in state i is killed with probability d_k(i),
// otherwise it moves to j with probability S_k(i, j).
struct DiscreteChain {
  std::vector<Eigen::MatrixXd> step;  // S_k, m x m, entries >= 0
  std::vector<Eigen::VectorXd> kill;  // d_k, length m, in [0, 1]
  Eigen::VectorXd r0;                 // initial distribution

  std::size_t states() const noexcept {
    return static_cast<std::size_t>(r0.size());
  }
  std::size_t steps() const noexcept { return step.size(); }

  // Throws ModelError unless rows of S_k plus d_k sum to 1 (1e-12),
  // entries are nonnegative, and r0 sums to 1.
  void validate() const;
};

// Couplings as probability masses.
//   xy(x, y)     : start at x, survive to the end at y
//   xzt[k](x, z) : start at x, killed at z during step k
struct DiscreteCouplings {
  Eigen::MatrixXd xy;
  std::vector<Eigen::MatrixXd> xzt;
};

struct OracleResult {
  DiscreteCouplings couplings;
  double objective = 0.0;  // D(pi || rho) summed over both blocks
  std::size_t iterations = 0;
  double residual_rho0 = 0.0;  // max_x |row mass - rho0(x)|
  double residual_Q = 0.0;     // max_{k,z} |column mass - Q(k, z)|
};

// Q targets are laid out as a (steps x states) matrix.
using KilledTargets = Eigen::MatrixXd;

DiscreteCouplings prior_couplings(const DiscreteChain& chain);

// Sum of pi log(pi / rho) with 0 log 0 = 0.
double kl_objective(const DiscreteCouplings& pi, const DiscreteCouplings& rho);

// Iterative proportional fitting: alternately rescale rows (start points) of
// both blocks to match rho0 and columns (z, k) of the killed block to match
// Q, until the row residual falls below tol.
OracleResult ipf_solve(const DiscreteCouplings& rho,
                       const Eigen::VectorXd& rho0_target,
                       const KilledTargets& q_target, double tol = 1e-13,
                       std::size_t max_iter = 1'000'000);

// Fortet-Sinkhorn with sums in place of integrals. phi0_start sets the
// constant initial phi(0, .); tol is the Hilbert-metric stop threshold.
OracleResult fs_discrete(const DiscreteChain& chain,
                         const Eigen::VectorXd& rho0_target,
                         const KilledTargets& q_target, double tol = 1e-13,
                         std::size_t max_iter = 1'000'000,
                         double phi0_start = 1.0);

// Largest entrywise gap over both blocks.
double linf_gap(const DiscreteCouplings& a, const DiscreteCouplings& b);

// Chain matched to a grid: one step per grid interval. The move matrix is
// the Crank-Nicolson step of the prior without killing, written in masses;
// the killing probability is 1 - exp(-V dt) at the start node. Throws
// ModelError if the step has negative entries (h a / dx^2 too large).
DiscreteChain chain_from_grid(const PriorSpec& prior, const SpaceTimeGrid& grid,
                              std::span<const double> r0_density);

struct ChainTargets {
  Eigen::VectorXd rho0;
  KilledTargets Q;
};

// Masses of rho0 per node and of Q per (step, node), trapezoid in time.
ChainTargets chain_targets_from_grid(const ProblemSpec& problem);

// Converts grid coupling densities to per-step masses comparable with a
// chain built by chain_from_grid.
DiscreteCouplings lump_grid_couplings(const Couplings& c,
                                      const SpaceTimeGrid& grid);

// Chain with random row-stochastic moves and killing probabilities in
// [kill_lo, kill_hi].
DiscreteChain random_chain(std::size_t states, std::size_t steps,
                           std::uint64_t seed, double kill_lo = 0.05,
                           double kill_hi = 0.4);

// Targets generated from a random coupling of the optimal form, hence
// feasible. Returns the generating coupling too.
struct FeasibleInstance {
  ChainTargets targets;
  DiscreteCouplings solution;
};
FeasibleInstance random_feasible_targets(const DiscreteChain& chain,
                                         std::uint64_t seed);

}  // namespace kbridge::oracle

#endif  // KBRIDGE_ORACLE_HPP_
