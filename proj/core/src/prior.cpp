#include "kbridge/prior.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "kbridge/error.hpp"
#include "kbridge/pde.hpp"

namespace kbridge {
namespace {

std::string locus(const SpaceTimeGrid& grid, std::size_t k, std::size_t i) {
  return " at t = " + std::to_string(grid.t(k)) +
         ", x = " + std::to_string(grid.x(i));
}

}  // namespace

GeneratorSnapshot assemble(const PriorSpec& prior, const SpaceTimeGrid& grid,
                           std::size_t k) {
  if (k >= grid.nt()) throw InputError("assemble: time index out of range");
  const std::size_t n = grid.nx();
  const double t = grid.t(k);
  const double dx = grid.dx();
  const double inv_dx2 = 1.0 / (dx * dx);

  GeneratorSnapshot out;
  out.killing.resize(n);
  Tridiagonal gen(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double x = grid.x(i);
    const double sigma = prior.sigma(t, x);
    const double b = prior.drift(t, x);
    const double v = prior.killing(t, x);
    if (!std::isfinite(sigma) || sigma < kSigmaMin) {
      throw ModelError("prior: diffusion coefficient not uniformly elliptic" +
                       locus(grid, k, i));
    }
    if (!std::isfinite(b)) {
      throw ModelError("prior: non-finite drift" + locus(grid, k, i));
    }
    if (!std::isfinite(v) || v < 0.0) {
      throw ModelError("prior: killing rate must be finite and >= 0" +
                       locus(grid, k, i));
    }
    out.killing[i] = v;
    const double a = sigma * sigma;

    if (i == 0) {
      // Zero-flux end: ghost node mirrors the first interior node.
      gen.upper[i] = a * inv_dx2;
    } else if (i + 1 == n) {
      gen.lower[i] = a * inv_dx2;
    } else if (std::abs(b) * dx <= a) {
      gen.lower[i] = 0.5 * a * inv_dx2 - 0.5 * b / dx;
      gen.upper[i] = 0.5 * a * inv_dx2 + 0.5 * b / dx;
    } else {
      gen.lower[i] = 0.5 * a * inv_dx2 + std::max(-b, 0.0) / dx;
      gen.upper[i] = 0.5 * a * inv_dx2 + std::max(b, 0.0) / dx;
    }
    gen.diag[i] = -(gen.lower[i] + gen.upper[i]);
  }

  // F(i, j) = G(j, i) w_j / w_i. Weight ratios are 1, 2 or 1/2, so the
  // adjoint relation holds bit-for-bit.
  Tridiagonal fwd(n);
  for (std::size_t i = 0; i < n; ++i) {
    fwd.diag[i] = gen.diag[i];
    if (i > 0) {
      fwd.lower[i] = gen.upper[i - 1] * grid.space_weight(i - 1) /
                     grid.space_weight(i);
    }
    if (i + 1 < n) {
      fwd.upper[i] = gen.lower[i + 1] * grid.space_weight(i + 1) /
                     grid.space_weight(i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    gen.diag[i] -= out.killing[i];
    fwd.diag[i] -= out.killing[i];
  }
  out.forward = std::move(fwd);
  out.backward = std::move(gen);
  return out;
}

KernelRow kernel_row(const PriorSpec& prior, const SpaceTimeGrid& grid,
                     std::size_t i) {
  if (i >= grid.nx()) throw InputError("kernel_row: node index out of range");
  const KolmogorovPropagator propagator(prior, grid);
  return propagator.kernel_row(i);
}

PriorSpec constant_prior(double drift, double sigma, double killing) {
  return PriorSpec{
      [drift](double, double) { return drift; },
      [sigma](double, double) { return sigma; },
      [killing](double, double) { return killing; },
  };
}

PriorSpec tabulated_prior(SpaceTimeField drift, SpaceTimeField sigma,
                          SpaceTimeField killing, const SpaceTimeGrid& grid) {
  require_shape(drift, grid, "tabulated_prior drift");
  require_shape(sigma, grid, "tabulated_prior sigma");
  require_shape(killing, grid, "tabulated_prior killing");
  auto g = std::make_shared<const SpaceTimeGrid>(grid);
  auto wrap = [g](SpaceTimeField f) -> FieldFunction {
    auto table = std::make_shared<const SpaceTimeField>(std::move(f));
    return [g, table](double t, double x) {
      return interpolate(*table, *g, t, x);
    };
  };
  return PriorSpec{wrap(std::move(drift)), wrap(std::move(sigma)),
                   wrap(std::move(killing))};
}

}  // namespace kbridge
