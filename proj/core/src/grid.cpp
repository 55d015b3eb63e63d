#include "kbridge/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kbridge/error.hpp"

namespace kbridge {

SpaceTimeGrid::SpaceTimeGrid(double x_min, double x_max, std::size_t nx,
                             std::size_t nt)
    : x_min_(x_min), x_max_(x_max), nx_(nx), nt_(nt) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min)) {
    throw InputError("grid: x_max must exceed x_min");
  }
  if (nx < 3) throw InputError("grid: nx must be at least 3");
  if (nt < 2) throw InputError("grid: nt must be at least 2");
  dx_ = (x_max - x_min) / static_cast<double>(nx - 1);
  dt_ = 1.0 / static_cast<double>(nt - 1);
  wx_.assign(nx, dx_);
  wx_.front() = 0.5 * dx_;
  wx_.back() = 0.5 * dx_;
}

double SpaceTimeGrid::x(std::size_t i) const noexcept {
  if (i + 1 == nx_) return x_max_;
  return x_min_ + static_cast<double>(i) * dx_;
}

double SpaceTimeGrid::t(std::size_t k) const noexcept {
  return static_cast<double>(k) / static_cast<double>(nt_ - 1);
}

double SpaceTimeGrid::space_weight(std::size_t i) const noexcept {
  return wx_[i];
}

double SpaceTimeGrid::time_weight(std::size_t k) const noexcept {
  return (k == 0 || k + 1 == nt_) ? 0.5 * dt_ : dt_;
}

bool SpaceTimeGrid::operator==(const SpaceTimeGrid& other) const noexcept {
  return x_min_ == other.x_min_ && x_max_ == other.x_max_ &&
         nx_ == other.nx_ && nt_ == other.nt_;
}

SpaceTimeField::SpaceTimeField(std::size_t nt, std::size_t nx, double fill)
    : nt_(nt), nx_(nx), values_(nt * nx, fill) {}

void require_shape(std::span<const double> f, const SpaceTimeGrid& grid,
                   const char* what) {
  if (f.size() != grid.nx()) {
    throw ShapeError(std::string(what) + ": length " +
                     std::to_string(f.size()) + " does not match nx = " +
                     std::to_string(grid.nx()));
  }
}

void require_shape(const SpaceTimeField& f, const SpaceTimeGrid& grid,
                   const char* what) {
  if (!f.matches(grid)) {
    throw ShapeError(std::string(what) + ": shape " + std::to_string(f.nt()) +
                     "x" + std::to_string(f.nx()) + " does not match grid " +
                     std::to_string(grid.nt()) + "x" +
                     std::to_string(grid.nx()));
  }
}

namespace {

// Trapezoid sum in units of the step: f_0 / 2 + f_1 + ... + f_{n-1} / 2,
// accumulated with Neumaier compensation.
double trapezoid_units(std::span<const double> f) {
  double sum = 0.0;
  double carry = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double term = (i == 0 || i + 1 == f.size()) ? 0.5 * f[i] : f[i];
    const double next = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      carry += (sum - next) + term;
    } else {
      carry += (term - next) + sum;
    }
    sum = next;
  }
  return sum + carry;
}

}  // namespace

// Dividing by the interval count instead of multiplying by dx keeps
// constant integrands exact.
double integrate_space(std::span<const double> f, const SpaceTimeGrid& grid) {
  require_shape(f, grid, "integrate_space");
  return trapezoid_units(f) * (grid.x_max() - grid.x_min()) /
         static_cast<double>(grid.nx() - 1);
}

double integrate_spacetime(const SpaceTimeField& f, const SpaceTimeGrid& grid) {
  require_shape(f, grid, "integrate_spacetime");
  std::vector<double> per_time(f.nt());
  for (std::size_t k = 0; k < f.nt(); ++k) {
    per_time[k] = integrate_space(f.row(k), grid);
  }
  return trapezoid_units(per_time) / static_cast<double>(grid.nt() - 1);
}

double l1_distance(std::span<const double> a, std::span<const double> b,
                   const SpaceTimeGrid& grid) {
  require_shape(a, grid, "l1_distance");
  require_shape(b, grid, "l1_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += grid.space_weight(i) * std::abs(a[i] - b[i]);
  }
  return sum;
}

double l1_distance(const SpaceTimeField& a, const SpaceTimeField& b,
                   const SpaceTimeGrid& grid) {
  require_shape(a, grid, "l1_distance");
  require_shape(b, grid, "l1_distance");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.nt(); ++k) {
    sum += grid.time_weight(k) * l1_distance(a.row(k), b.row(k), grid);
  }
  return sum;
}

double linf_distance(const SpaceTimeField& a, const SpaceTimeField& b) {
  if (a.nt() != b.nt() || a.nx() != b.nx()) {
    throw ShapeError("linf_distance: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t n = 0; n < a.values().size(); ++n) {
    worst = std::max(worst, std::abs(a.values()[n] - b.values()[n]));
  }
  return worst;
}

SpaceTimeField sample(const FieldFunction& f, const SpaceTimeGrid& grid) {
  SpaceTimeField out(grid);
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      const double v = f(grid.t(k), grid.x(i));
      if (!std::isfinite(v)) {
        throw InputError("sample: non-finite value at t = " +
                         std::to_string(grid.t(k)) +
                         ", x = " + std::to_string(grid.x(i)));
      }
      out(k, i) = v;
    }
  }
  return out;
}

double interpolate(const SpaceTimeField& f, const SpaceTimeGrid& grid,
                   double t, double x) {
  const double s = std::clamp(t, 0.0, 1.0) / grid.dt();
  const double r = (std::clamp(x, grid.x_min(), grid.x_max()) - grid.x_min()) /
                   grid.dx();
  const std::size_t k =
      std::min(static_cast<std::size_t>(s), grid.nt() - 2);
  const std::size_t i =
      std::min(static_cast<std::size_t>(r), grid.nx() - 2);
  const double a = s - static_cast<double>(k);
  const double c = r - static_cast<double>(i);
  return (1.0 - a) * ((1.0 - c) * f(k, i) + c * f(k, i + 1)) +
         a * ((1.0 - c) * f(k + 1, i) + c * f(k + 1, i + 1));
}

}  // namespace kbridge
