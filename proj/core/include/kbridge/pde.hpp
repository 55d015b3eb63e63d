#ifndef KBRIDGE_PDE_HPP_
#define KBRIDGE_PDE_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "kbridge/grid.hpp"
#include "kbridge/prior.hpp"
#include "kbridge/tridiagonal.hpp"

namespace kbridge {

struct BackwardSolveResult {
  SpaceTimeField phi;
  double min_value = 0.0;  // smallest entry of phi
  bool positive() const noexcept { return min_value > 0.0; }
};

struct ForwardSolveResult {
  SpaceTimeField phihat;
  double min_value = 0.0;  // negative values are Crank-Nicolson undershoot
};

// Crank-Nicolson propagators for the prior, with every per-node banded
// factorization computed once and reused across solves.
//
// Forward step (densities):
//   (I - h/2 L_{k+1}) p_{k+1} = (I + h/2 L_k) p_k.
// Backward step with source s = V * Lambda:
//   phi_k = (I + h/2 M_k) (I - h/2 M_{k+1})^-1 (phi_{k+1} + h/2 s_{k+1})
//           + h/2 s_k.
// The backward step is the exact trapezoid-adjoint of the forward step, so
//   <phi_k, p_k> = <phi_{k+1}, p_{k+1}> + h/2 (<s_k, p_k> + <s_{k+1}, p_{k+1}>)
// holds to round-off and the discrete kernel identities are exact.
class KolmogorovPropagator {
 public:
  KolmogorovPropagator(const PriorSpec& prior, const SpaceTimeGrid& grid);

  const SpaceTimeGrid& grid() const noexcept { return grid_; }
  const SpaceTimeField& killing() const noexcept { return killing_; }
  const GeneratorSnapshot& generator(std::size_t k) const {
    return generators_.at(k);
  }

  // phi with phi(1, .) = 1. Lambda must be finite and >= 0.
  BackwardSolveResult backward(const SpaceTimeField& lambda) const;

  // phihat with phihat(0, .) = init. init must be finite and >= 0.
  ForwardSolveResult forward(std::span<const double> init) const;

  // Same as forward() without input validation; used inside iterations
  // where the caller guarantees the contract.
  void forward_into(std::span<const double> init, SpaceTimeField& out) const;
  void backward_into(const SpaceTimeField& lambda, SpaceTimeField& out) const;

  KernelRow kernel_row(std::size_t i) const;

  // One forward step from time node k to k + 1.
  void forward_step(std::size_t k, std::span<const double> in,
                    std::span<double> out) const;

 private:
  SpaceTimeGrid grid_;
  SpaceTimeField killing_;
  std::vector<GeneratorSnapshot> generators_;
  std::vector<Tridiagonal> forward_explicit_;
  std::vector<TridiagonalLU> forward_implicit_;
  std::vector<Tridiagonal> backward_explicit_;
  std::vector<TridiagonalLU> backward_implicit_;
};

BackwardSolveResult solve_backward(const PriorSpec& prior,
                                   const SpaceTimeGrid& grid,
                                   const SpaceTimeField& lambda);

ForwardSolveResult solve_forward(const PriorSpec& prior,
                                 const SpaceTimeGrid& grid,
                                 std::span<const double> init);

// max_x |phi(0, x) - 1| for the backward solve with Lambda = 1, i.e. the
// defect of  int r(0,x,1,y) dy + int int V r dz dt = 1.
double conservation_defect(const PriorSpec& prior, const SpaceTimeGrid& grid);
double conservation_defect(const KolmogorovPropagator& propagator);

}  // namespace kbridge

#endif  // KBRIDGE_PDE_HPP_
