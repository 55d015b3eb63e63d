#include "kbridge/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kbridge/error.hpp"

namespace kbridge {
namespace {

std::vector<std::uint8_t> positivity_mask(const SpaceTimeField& p) {
  const double peak =
      *std::max_element(p.values().begin(), p.values().end());
  const double floor = kPositivityFloor * peak;
  std::vector<std::uint8_t> mask(p.values().size(), 0);
  for (std::size_t n = 0; n < mask.size(); ++n) {
    mask[n] = (peak > 0.0 && p.values()[n] >= floor) ? 1 : 0;
  }
  return mask;
}

void require_potentials(const Potentials& pot, const SpaceTimeGrid& grid) {
  require_shape(pot.phi, grid, "phi");
  require_shape(pot.phihat, grid, "phihat");
  require_shape(pot.Lambda, grid, "Lambda");
}

}  // namespace

SpaceTimeField marginals(const Potentials& pot, const SpaceTimeGrid& grid) {
  require_potentials(pot, grid);
  SpaceTimeField p(grid);
  for (std::size_t n = 0; n < p.values().size(); ++n) {
    p.values()[n] = pot.phi.values()[n] * pot.phihat.values()[n];
  }
  return p;
}

ControlFields control(const Potentials& pot, const PriorSpec& prior,
                      const SpaceTimeGrid& grid) {
  const SpaceTimeField p = marginals(pot, grid);
  ControlFields out{SpaceTimeField(grid), SpaceTimeField(grid),
                    positivity_mask(p)};
  const std::size_t nx = grid.nx();
  const double dx = grid.dx();
  std::vector<double> log_phi(nx);
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    const auto phi = pot.phi.row(k);
    for (std::size_t i = 0; i < nx; ++i) {
      log_phi[i] = phi[i] > 0.0 ? std::log(phi[i]) : 0.0;
    }
    for (std::size_t i = 0; i < nx; ++i) {
      if (!out.mask[k * nx + i]) continue;
      // Zero-flux ends: d/dx log phi = 0 there.
      if (i == 0 || i + 1 == nx) continue;
      if (!(phi[i - 1] > 0.0) || !(phi[i + 1] > 0.0)) {
        out.mask[k * nx + i] = 0;
        continue;
      }
      const double grad = (log_phi[i + 1] - log_phi[i - 1]) / (2.0 * dx);
      const double sigma = prior.sigma(grid.t(k), grid.x(i));
      out.u(k, i) = sigma * grad;
      out.drift_correction(k, i) = sigma * sigma * grad;
    }
  }
  return out;
}

KillingFields killing(const Potentials& pot, const PriorSpec& prior,
                      const SpaceTimeGrid& grid) {
  const SpaceTimeField p = marginals(pot, grid);
  const auto mask = positivity_mask(p);
  KillingFields out{SpaceTimeField(grid), SpaceTimeField(grid)};
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      const double v = prior.killing(grid.t(k), grid.x(i));
      const double lambda = pot.Lambda(k, i);
      out.Qhat(k, i) = lambda * v * pot.phihat(k, i);
      if (lambda != 0.0 && mask[k * grid.nx() + i] && pot.phi(k, i) > 0.0) {
        out.alpha(k, i) = lambda / pot.phi(k, i);
      }
    }
  }
  return out;
}

PosteriorSolution assemble_posterior(const Potentials& pot,
                                     const PriorSpec& prior,
                                     const SpaceTimeGrid& grid) {
  PosteriorSolution sol;
  sol.P = marginals(pot, grid);
  ControlFields ctl = control(pot, prior, grid);
  KillingFields kill = killing(pot, prior, grid);
  sol.u = std::move(ctl.u);
  sol.drift_correction = std::move(ctl.drift_correction);
  sol.mask = std::move(ctl.mask);
  sol.alpha = std::move(kill.alpha);
  sol.Qhat = std::move(kill.Qhat);
  sol.survivor_mass.resize(grid.nt());
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    sol.survivor_mass[k] = integrate_space(sol.P.row(k), grid);
  }
  return sol;
}

double fp_residual(const PosteriorSolution& sol, const PriorSpec& prior,
                   const SpaceTimeGrid& grid) {
  require_shape(sol.P, grid, "fp_residual P");
  const std::size_t nx = grid.nx();
  const double dx = grid.dx();
  const double h = grid.dt();
  const SpaceTimeField& p = sol.P;
  const double peak = *std::max_element(p.values().begin(), p.values().end());
  if (!(peak > 0.0)) return 0.0;

  std::vector<double> flux(nx);  // (b + sigma u) P
  std::vector<double> diff(nx);  // a P
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < grid.nt(); ++k) {
    const double t = grid.t(k);
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = grid.x(i);
      const double sigma = prior.sigma(t, x);
      flux[i] = (prior.drift(t, x) + sol.drift_correction(k, i)) * p(k, i);
      diff[i] = sigma * sigma * p(k, i);
    }
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      const double dpdt = (p(k + 1, i) - p(k - 1, i)) / (2.0 * h);
      const double rhs =
          -(flux[i + 1] - flux[i - 1]) / (2.0 * dx) +
          0.5 * (diff[i + 1] - 2.0 * diff[i] + diff[i - 1]) / (dx * dx) -
          sol.alpha(k, i) * prior.killing(t, grid.x(i)) * p(k, i);
      worst = std::max(worst, std::abs(dpdt - rhs));
    }
  }
  return worst / peak;
}

Couplings kernel_couplings(const KolmogorovPropagator& propagator,
                           std::span<const double> phihat0,
                           const SpaceTimeField& lambda, std::size_t budget) {
  const SpaceTimeGrid& grid = propagator.grid();
  require_shape(phihat0, grid, "couplings phihat0");
  require_shape(lambda, grid, "couplings Lambda");
  const std::size_t nx = grid.nx();
  const std::size_t nt = grid.nt();
  if (nx * nx * nt > budget) {
    throw BudgetError("couplings: nx * nx * nt = " +
                      std::to_string(nx * nx * nt) + " exceeds budget " +
                      std::to_string(budget));
  }
  Couplings out;
  out.pi_xy = Eigen::MatrixXd::Zero(nx, nx);
  out.pi_xzt.assign(nt, Eigen::MatrixXd::Zero(nx, nx));
  out.f.assign(phihat0.begin(), phihat0.end());
  for (std::size_t x = 0; x < nx; ++x) {
    if (phihat0[x] == 0.0) continue;
    const KernelRow row = propagator.kernel_row(x);
    for (std::size_t y = 0; y < nx; ++y) {
      out.pi_xy(x, y) = row.survivor[y] * phihat0[x];
    }
    for (std::size_t k = 0; k < nt; ++k) {
      for (std::size_t z = 0; z < nx; ++z) {
        out.pi_xzt[k](x, z) = row.killed(k, z) * phihat0[x] * lambda(k, z);
      }
    }
  }
  return out;
}

Couplings couplings(const Potentials& pot, const PriorSpec& prior,
                    const SpaceTimeGrid& grid, std::span<const double> r0,
                    std::size_t budget) {
  require_shape(r0, grid, "couplings R0");
  if (grid.nx() * grid.nx() * grid.nt() > budget) {
    throw BudgetError("couplings: grid too large for materialized kernels");
  }
  const KolmogorovPropagator propagator(prior, grid);
  Couplings out = kernel_couplings(propagator, pot.phihat0, pot.Lambda, budget);
  // phi(1, .) equals the gauge factor rather than 1 after gauge fixing.
  out.pi_xy *= pot.gauge;
  for (std::size_t x = 0; x < grid.nx(); ++x) {
    out.f[x] = r0[x] > 0.0 ? pot.phihat0[x] / r0[x] : 0.0;
  }
  return out;
}

double relative_entropy(const Couplings& pi, const Couplings& rho,
                        const SpaceTimeGrid& grid) {
  auto term = [](double a, double b) {
    if (a <= 0.0) return b;
    if (b <= 0.0) {
      throw DomainError("relative_entropy: coupling not absolutely continuous");
    }
    return a * std::log(a / b) - a + b;
  };
  const std::size_t nx = grid.nx();
  double sum = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t y = 0; y < nx; ++y) {
      sum += grid.space_weight(x) * grid.space_weight(y) *
             term(pi.pi_xy(x, y), rho.pi_xy(x, y));
    }
  }
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t z = 0; z < nx; ++z) {
        sum += grid.time_weight(k) * grid.space_weight(x) *
               grid.space_weight(z) *
               term(pi.pi_xzt[k](x, z), rho.pi_xzt[k](x, z));
      }
    }
  }
  return sum;
}

}  // namespace kbridge
