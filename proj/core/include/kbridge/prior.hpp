#ifndef KBRIDGE_PRIOR_HPP_
#define KBRIDGE_PRIOR_HPP_

#include <cstddef>

#include "kbridge/grid.hpp"
#include "kbridge/tridiagonal.hpp"

namespace kbridge {

// Prior killed diffusion dX = b dt + sigma dW with killing rate V.
struct PriorSpec {
  FieldFunction drift;    // b(t, x)
  FieldFunction sigma;    // sigma(t, x) > 0
  FieldFunction killing;  // V(t, x) >= 0
};

// Smallest diffusion coefficient accepted by assemble().
inline constexpr double kSigmaMin = 1e-8;

// Spatial operators of the prior at one time node.
//
// The backward generator G (rows sum to zero, nonnegative off-diagonals)
// discretizes b d/dx + (a/2) d2/dx2 with zero-flux ends. The forward
// operator acts on nodal densities and is the adjoint of G under the
// trapezoid inner product, F = W^-1 G^T W, so that its trapezoid-weighted
// column sums vanish. Killing enters both as -V on the diagonal.
struct GeneratorSnapshot {
  Tridiagonal forward;   // F - diag(V)
  Tridiagonal backward;  // G - diag(V)
  ScalarField killing;   // V at the time node
};

// Assembles the generator at time node k. Central differencing of the drift
// is used where it keeps the off-diagonals nonnegative (|b| dx <= a),
// first-order upwinding elsewhere. Throws ModelError when sigma < kSigmaMin
// or V is negative or non-finite at any node.
GeneratorSnapshot assemble(const PriorSpec& prior, const SpaceTimeGrid& grid,
                           std::size_t k);

// Discrete transition kernel out of node i.
struct KernelRow {
  ScalarField survivor;   // r(0, x_i, 1, .)
  SpaceTimeField killed;  // V(t, z) r(0, x_i, t, z)
};

// Propagates a unit-mass discrete delta at node i (height 1 / w_i under the
// trapezoid weights) through the forward equation.
KernelRow kernel_row(const PriorSpec& prior, const SpaceTimeGrid& grid,
                     std::size_t i);

// Constant-coefficient shorthand.
PriorSpec constant_prior(double drift, double sigma, double killing);

// Prior whose coefficients are bilinear interpolants of tabulated fields.
PriorSpec tabulated_prior(SpaceTimeField drift, SpaceTimeField sigma,
                          SpaceTimeField killing, const SpaceTimeGrid& grid);

}  // namespace kbridge

#endif  // KBRIDGE_PRIOR_HPP_
