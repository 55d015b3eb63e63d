#include "kbridge/pde.hpp"

#include <algorithm>
#include <cmath>

#include "kbridge/error.hpp"

namespace kbridge {

KolmogorovPropagator::KolmogorovPropagator(const PriorSpec& prior,
                                           const SpaceTimeGrid& grid)
    : grid_(grid), killing_(grid) {
  const std::size_t nt = grid.nt();
  const double half_h = 0.5 * grid.dt();
  generators_.reserve(nt);
  forward_explicit_.reserve(nt);
  forward_implicit_.reserve(nt);
  backward_explicit_.reserve(nt);
  backward_implicit_.reserve(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    generators_.push_back(assemble(prior, grid, k));
    const GeneratorSnapshot& gen = generators_.back();
    std::copy(gen.killing.begin(), gen.killing.end(), killing_.row(k).begin());
    forward_explicit_.push_back(gen.forward.shifted_identity(half_h));
    forward_implicit_.emplace_back(gen.forward.shifted_identity(-half_h));
    backward_explicit_.push_back(gen.backward.shifted_identity(half_h));
    backward_implicit_.emplace_back(gen.backward.shifted_identity(-half_h));
  }
}

void KolmogorovPropagator::forward_into(std::span<const double> init,
                                        SpaceTimeField& out) const {
  if (!out.matches(grid_)) out = SpaceTimeField(grid_);
  std::copy(init.begin(), init.end(), out.row(0).begin());
  for (std::size_t k = 0; k + 1 < grid_.nt(); ++k) {
    auto next = out.row(k + 1);
    forward_explicit_[k].apply(out.row(k), next);
    forward_implicit_[k + 1].solve(next);
  }
}

void KolmogorovPropagator::backward_into(const SpaceTimeField& lambda,
                                         SpaceTimeField& out) const {
  if (!out.matches(grid_)) out = SpaceTimeField(grid_);
  const std::size_t nx = grid_.nx();
  const double half_h = 0.5 * grid_.dt();
  const std::size_t last = grid_.nt() - 1;
  std::fill(out.row(last).begin(), out.row(last).end(), 1.0);

  std::vector<double> work(nx);
  for (std::size_t k = last; k-- > 0;) {
    const auto upper = out.row(k + 1);
    for (std::size_t i = 0; i < nx; ++i) {
      work[i] = upper[i] + half_h * killing_(k + 1, i) * lambda(k + 1, i);
    }
    backward_implicit_[k + 1].solve(work);
    auto row = out.row(k);
    backward_explicit_[k].apply(work, row);
    for (std::size_t i = 0; i < nx; ++i) {
      row[i] += half_h * killing_(k, i) * lambda(k, i);
    }
  }
}

BackwardSolveResult KolmogorovPropagator::backward(
    const SpaceTimeField& lambda) const {
  require_shape(lambda, grid_, "solve_backward Lambda");
  for (double v : lambda.values()) {
    if (!std::isfinite(v)) throw InputError("solve_backward: non-finite Lambda");
    if (v < 0.0) throw InputError("solve_backward: Lambda must be >= 0");
  }
  BackwardSolveResult result;
  backward_into(lambda, result.phi);
  result.min_value = *std::min_element(result.phi.values().begin(),
                                       result.phi.values().end());
  if (!std::isfinite(result.min_value)) {
    throw NumericalError("solve_backward: non-finite phi");
  }
  return result;
}

ForwardSolveResult KolmogorovPropagator::forward(
    std::span<const double> init) const {
  require_shape(init, grid_, "solve_forward init");
  for (double v : init) {
    if (!std::isfinite(v)) throw InputError("solve_forward: non-finite init");
    if (v < 0.0) throw InputError("solve_forward: init must be >= 0");
  }
  ForwardSolveResult result;
  forward_into(init, result.phihat);
  result.min_value = *std::min_element(result.phihat.values().begin(),
                                       result.phihat.values().end());
  if (!std::isfinite(result.min_value)) {
    throw NumericalError("solve_forward: non-finite phihat");
  }
  return result;
}

void KolmogorovPropagator::forward_step(std::size_t k,
                                        std::span<const double> in,
                                        std::span<double> out) const {
  if (k + 1 >= grid_.nt()) throw InputError("forward_step: k out of range");
  forward_explicit_[k].apply(in, out);
  forward_implicit_[k + 1].solve(out);
}

KernelRow KolmogorovPropagator::kernel_row(std::size_t i) const {
  if (i >= grid_.nx()) throw InputError("kernel_row: node index out of range");
  std::vector<double> delta(grid_.nx(), 0.0);
  delta[i] = 1.0 / grid_.space_weight(i);
  KernelRow row;
  forward_into(delta, row.killed);
  const auto last = row.killed.row(grid_.nt() - 1);
  row.survivor.assign(last.begin(), last.end());
  for (std::size_t n = 0; n < row.killed.values().size(); ++n) {
    row.killed.values()[n] *= killing_.values()[n];
  }
  return row;
}

BackwardSolveResult solve_backward(const PriorSpec& prior,
                                   const SpaceTimeGrid& grid,
                                   const SpaceTimeField& lambda) {
  return KolmogorovPropagator(prior, grid).backward(lambda);
}

ForwardSolveResult solve_forward(const PriorSpec& prior,
                                 const SpaceTimeGrid& grid,
                                 std::span<const double> init) {
  return KolmogorovPropagator(prior, grid).forward(init);
}

double conservation_defect(const KolmogorovPropagator& propagator) {
  const SpaceTimeField ones(propagator.grid(), 1.0);
  const BackwardSolveResult result = propagator.backward(ones);
  double worst = 0.0;
  for (double v : result.phi.row(0)) worst = std::max(worst, std::abs(v - 1.0));
  return worst;
}

double conservation_defect(const PriorSpec& prior, const SpaceTimeGrid& grid) {
  return conservation_defect(KolmogorovPropagator(prior, grid));
}

}  // namespace kbridge
