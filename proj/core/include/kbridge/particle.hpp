#ifndef KBRIDGE_PARTICLE_HPP_
#define KBRIDGE_PARTICLE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kbridge/grid.hpp"
#include "kbridge/posterior.hpp"
#include "kbridge/prior.hpp"

namespace kbridge {

enum class Dynamics { kPrior, kPosterior };

struct SimConfig {
  std::size_t n_particles = 100'000;
  std::uint64_t seed = 20240521;
  Dynamics dynamics = Dynamics::kPrior;
  std::size_t substeps = 8;  // Euler-Maruyama steps per grid interval
};

// Fate of one particle. Killed particles are frozen at the kill point.
struct ParticleRecord {
  bool killed = false;
  double t_kill = 1.0;  // in [0, 1]; 1 for survivors
  double x = 0.0;       // kill point, or terminal position for survivors
};

struct KillEventLog {
  std::vector<ParticleRecord> particles;

  std::size_t killed_count() const noexcept;
  std::size_t survivor_count() const noexcept {
    return particles.size() - killed_count();
  }
  double killed_fraction() const noexcept;
};

// Euler-Maruyama with per-step killing probability 1 - exp(-rate h) and
// fold-back reflection at the box ends. Initial points are drawn from the
// piecewise-linear density rho0. Posterior dynamics use drift
// b + sigma u and killing alpha V, bilinearly interpolated from sol.
// Particle p draws from its own stream seeded by (seed, p), so the log does
// not depend on evaluation order.
KillEventLog simulate(const PriorSpec& prior, std::span<const double> rho0,
                      const PosteriorSolution* sol, const SpaceTimeGrid& grid,
                      const SimConfig& config);

struct EmpiricalProfiles {
  SpaceTimeField killed_hist;  // density over (kill time, kill point)
  ScalarField survivor_hist;   // density of survivors at t = 1
};

// Counts per dual cell of the grid, normalized so that
// integrate_spacetime(killed_hist) + integrate_space(survivor_hist) = 1.
EmpiricalProfiles empirical_profiles(const KillEventLog& log,
                                     const SpaceTimeGrid& grid);

}  // namespace kbridge

#endif  // KBRIDGE_PARTICLE_HPP_
