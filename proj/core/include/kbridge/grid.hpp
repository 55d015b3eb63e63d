#ifndef KBRIDGE_GRID_HPP_
#define KBRIDGE_GRID_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace kbridge {

// Uniform space-time grid: nx nodes on [x_min, x_max] and nt nodes on [0, 1].
class SpaceTimeGrid {
 public:
  SpaceTimeGrid(double x_min, double x_max, std::size_t nx, std::size_t nt);

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t nx() const noexcept { return nx_; }
  std::size_t nt() const noexcept { return nt_; }
  double dx() const noexcept { return dx_; }
  double dt() const noexcept { return dt_; }

  // Node coordinates. The last node is pinned to the endpoint exactly.
  double x(std::size_t i) const noexcept;
  double t(std::size_t k) const noexcept;

  // Trapezoid quadrature weights in space and in time.
  double space_weight(std::size_t i) const noexcept;
  double time_weight(std::size_t k) const noexcept;
  const std::vector<double>& space_weights() const noexcept { return wx_; }

  bool operator==(const SpaceTimeGrid& other) const noexcept;

 private:
  double x_min_;
  double x_max_;
  std::size_t nx_;
  std::size_t nt_;
  double dx_;
  double dt_;
  std::vector<double> wx_;
};

// One snapshot in space (length nx).
using ScalarField = std::vector<double>;

// Row-major nt x nx table; row k is the snapshot at time node k.
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  SpaceTimeField(std::size_t nt, std::size_t nx, double fill = 0.0);
  explicit SpaceTimeField(const SpaceTimeGrid& grid, double fill = 0.0)
      : SpaceTimeField(grid.nt(), grid.nx(), fill) {}

  std::size_t nt() const noexcept { return nt_; }
  std::size_t nx() const noexcept { return nx_; }

  double& operator()(std::size_t k, std::size_t i) noexcept {
    return values_[k * nx_ + i];
  }
  double operator()(std::size_t k, std::size_t i) const noexcept {
    return values_[k * nx_ + i];
  }

  std::span<double> row(std::size_t k) noexcept {
    return {values_.data() + k * nx_, nx_};
  }
  std::span<const double> row(std::size_t k) const noexcept {
    return {values_.data() + k * nx_, nx_};
  }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool matches(const SpaceTimeGrid& grid) const noexcept {
    return nt_ == grid.nt() && nx_ == grid.nx();
  }

 private:
  std::size_t nt_ = 0;
  std::size_t nx_ = 0;
  std::vector<double> values_;
};

using FieldFunction = std::function<double(double t, double x)>;

// Trapezoid rule over [x_min, x_max]. Throws ShapeError on length mismatch.
double integrate_space(std::span<const double> f, const SpaceTimeGrid& grid);

// Trapezoid rule in both axes over [0, 1] x [x_min, x_max].
double integrate_spacetime(const SpaceTimeField& f, const SpaceTimeGrid& grid);

// Trapezoid-weighted L1 norm of a - b.
double l1_distance(std::span<const double> a, std::span<const double> b,
                   const SpaceTimeGrid& grid);
double l1_distance(const SpaceTimeField& a, const SpaceTimeField& b,
                   const SpaceTimeGrid& grid);

// Largest absolute entry of a - b.
double linf_distance(const SpaceTimeField& a, const SpaceTimeField& b);

// Pointwise tabulation; throws InputError on a non-finite sample.
SpaceTimeField sample(const FieldFunction& f, const SpaceTimeGrid& grid);

// Bilinear interpolation in (t, x), clamped to the grid box.
double interpolate(const SpaceTimeField& f, const SpaceTimeGrid& grid,
                   double t, double x);

void require_shape(std::span<const double> f, const SpaceTimeGrid& grid,
                   const char* what);
void require_shape(const SpaceTimeField& f, const SpaceTimeGrid& grid,
                   const char* what);

}  // namespace kbridge

#endif  // KBRIDGE_GRID_HPP_
