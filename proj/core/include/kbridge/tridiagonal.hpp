#ifndef KBRIDGE_TRIDIAGONAL_HPP_
#define KBRIDGE_TRIDIAGONAL_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace kbridge {

// Banded n x n matrix with one sub- and one super-diagonal.
// lower[0] and upper[n-1] are unused and kept at zero.
struct Tridiagonal {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  Tridiagonal() = default;
  explicit Tridiagonal(std::size_t n)
      : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

  std::size_t size() const noexcept { return diag.size(); }

  // Entry (i, j); zero outside the band.
  double at(std::size_t i, std::size_t j) const noexcept;

  // out = A x. out must not alias x.
  void apply(std::span<const double> x, std::span<double> out) const;

  // Returns identity + scale * A.
  Tridiagonal shifted_identity(double scale) const;
};

// Thomas-algorithm factorization, reusable across right-hand sides.
// Only valid for matrices that need no pivoting (the diagonally dominant
// M-matrices produced by implicit time steps).
class TridiagonalLU {
 public:
  TridiagonalLU() = default;
  explicit TridiagonalLU(const Tridiagonal& a);

  // Solves A x = rhs in place.
  void solve(std::span<double> rhs) const;

  std::size_t size() const noexcept { return inv_pivot_.size(); }

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> inv_pivot_;
};

}  // namespace kbridge

#endif  // KBRIDGE_TRIDIAGONAL_HPP_
