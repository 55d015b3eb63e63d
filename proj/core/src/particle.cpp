#include "kbridge/particle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kbridge/error.hpp"

namespace kbridge {
namespace {

double reflect(double x, double lo, double hi) {
  const double width = hi - lo;
  // Fold back until inside; one pass suffices unless the step exceeds the box.
  while (x < lo || x > hi) {
    if (x < lo) x = 2.0 * lo - x;
    if (x > hi) x = 2.0 * hi - x;
    if (!std::isfinite(x)) return lo + 0.5 * width;
  }
  return x;
}

std::size_t nearest(double value, double origin, double step, std::size_t n) {
  const double s = std::round((value - origin) / step);
  if (s <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(s), n - 1);
}

}  // namespace

std::size_t KillEventLog::killed_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(particles.begin(), particles.end(),
                    [](const ParticleRecord& r) { return r.killed; }));
}

double KillEventLog::killed_fraction() const noexcept {
  if (particles.empty()) return 0.0;
  return static_cast<double>(killed_count()) /
         static_cast<double>(particles.size());
}

KillEventLog simulate(const PriorSpec& prior, std::span<const double> rho0,
                      const PosteriorSolution* sol, const SpaceTimeGrid& grid,
                      const SimConfig& config) {
  require_shape(rho0, grid, "simulate rho0");
  if (config.n_particles < 1) throw InputError("simulate: n_particles >= 1");
  if (config.substeps < 1) throw InputError("simulate: substeps >= 1");
  const bool posterior = config.dynamics == Dynamics::kPosterior;
  if (posterior) {
    if (sol == nullptr) {
      throw InputError("simulate: posterior dynamics need a solution");
    }
    require_shape(sol->drift_correction, grid, "simulate drift_correction");
    require_shape(sol->alpha, grid, "simulate alpha");
  }

  std::vector<double> nodes(grid.nx());
  for (std::size_t i = 0; i < grid.nx(); ++i) nodes[i] = grid.x(i);
  const std::piecewise_linear_distribution<double> initial(
      nodes.begin(), nodes.end(), rho0.begin());

  const std::size_t n_steps = (grid.nt() - 1) * config.substeps;
  const double h = 1.0 / static_cast<double>(n_steps);
  const double sqrt_h = std::sqrt(h);
  const double lo = grid.x_min();
  const double hi = grid.x_max();

  KillEventLog log;
  log.particles.resize(config.n_particles);
  for (std::size_t p = 0; p < config.n_particles; ++p) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(p),
                      static_cast<std::uint32_t>(std::uint64_t{p} >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto start = initial;

    double x = start(rng);
    ParticleRecord& rec = log.particles[p];
    for (std::size_t s = 0; s < n_steps; ++s) {
      const double t = static_cast<double>(s) * h;
      const double t_mid = t + 0.5 * h;

      double rate = prior.killing(t_mid, x);
      if (posterior) rate *= interpolate(sol->alpha, grid, t_mid, x);
      if (rate > 0.0 && unit(rng) < -std::expm1(-rate * h)) {
        rec.killed = true;
        rec.t_kill = t_mid;
        rec.x = x;
        break;
      }

      double drift = prior.drift(t, x);
      if (posterior) drift += interpolate(sol->drift_correction, grid, t, x);
      const double sigma = prior.sigma(t, x);
      x = reflect(x + drift * h + sigma * sqrt_h * noise(rng), lo, hi);
    }
    if (!rec.killed) {
      rec.t_kill = 1.0;
      rec.x = x;
    }
  }
  return log;
}

EmpiricalProfiles empirical_profiles(const KillEventLog& log,
                                     const SpaceTimeGrid& grid) {
  if (log.particles.empty()) throw InputError("empirical_profiles: empty log");
  EmpiricalProfiles out{SpaceTimeField(grid), ScalarField(grid.nx(), 0.0)};
  const double n = static_cast<double>(log.particles.size());
  for (const ParticleRecord& r : log.particles) {
    const std::size_t i = nearest(r.x, grid.x_min(), grid.dx(), grid.nx());
    if (r.killed) {
      const std::size_t k = nearest(r.t_kill, 0.0, grid.dt(), grid.nt());
      out.killed_hist(k, i) += 1.0;
    } else {
      out.survivor_hist[i] += 1.0;
    }
  }
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      out.killed_hist(k, i) /=
          n * grid.time_weight(k) * grid.space_weight(i);
    }
  }
  for (std::size_t i = 0; i < grid.nx(); ++i) {
    out.survivor_hist[i] /= n * grid.space_weight(i);
  }
  return out;
}

}  // namespace kbridge
