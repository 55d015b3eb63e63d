#include "kbridge/tridiagonal.hpp"

#include <cmath>

#include "kbridge/error.hpp"

namespace kbridge {

double Tridiagonal::at(std::size_t i, std::size_t j) const noexcept {
  if (i == j) return diag[i];
  if (j + 1 == i) return lower[i];
  if (i + 1 == j) return upper[i];
  return 0.0;
}

void Tridiagonal::apply(std::span<const double> x,
                        std::span<double> out) const {
  const std::size_t n = size();
  if (x.size() != n || out.size() != n) {
    throw ShapeError("Tridiagonal::apply: size mismatch");
  }
  if (n == 1) {
    out[0] = diag[0] * x[0];
    return;
  }
  out[0] = diag[0] * x[0] + upper[0] * x[1];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i] = lower[i] * x[i - 1] + diag[i] * x[i] + upper[i] * x[i + 1];
  }
  out[n - 1] = lower[n - 1] * x[n - 2] + diag[n - 1] * x[n - 1];
}

Tridiagonal Tridiagonal::shifted_identity(double scale) const {
  Tridiagonal out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out.lower[i] = scale * lower[i];
    out.diag[i] = 1.0 + scale * diag[i];
    out.upper[i] = scale * upper[i];
  }
  out.lower[0] = 0.0;
  out.upper[size() - 1] = 0.0;
  return out;
}

TridiagonalLU::TridiagonalLU(const Tridiagonal& a)
    : lower_(a.lower), upper_(a.size(), 0.0), inv_pivot_(a.size(), 0.0) {
  const std::size_t n = a.size();
  double pivot = a.diag[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) pivot = a.diag[i] - a.lower[i] * upper_[i - 1];
    if (pivot == 0.0 || !std::isfinite(pivot)) {
      throw NumericalError("TridiagonalLU: zero pivot");
    }
    inv_pivot_[i] = 1.0 / pivot;
    upper_[i] = (i + 1 < n) ? a.upper[i] * inv_pivot_[i] : 0.0;
  }
}

void TridiagonalLU::solve(std::span<double> rhs) const {
  const std::size_t n = size();
  if (rhs.size() != n) throw ShapeError("TridiagonalLU::solve: size mismatch");
  rhs[0] *= inv_pivot_[0];
  for (std::size_t i = 1; i < n; ++i) {
    rhs[i] = (rhs[i] - lower_[i] * rhs[i - 1]) * inv_pivot_[i];
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    rhs[i] -= upper_[i] * rhs[i + 1];
  }
}

}  // namespace kbridge
