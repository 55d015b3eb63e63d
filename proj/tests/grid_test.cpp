#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kbridge/error.hpp"
#include "kbridge/grid.hpp"
#include "kbridge/presets.hpp"

namespace kbridge {
namespace {

using std::numbers::pi;

ScalarField tabulate(const SpaceTimeGrid& g, double (*f)(double)) {
  ScalarField out(g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) out[i] = f(g.x(i));
  return out;
}

TEST(SpaceTimeGrid, NodesSpanTheBox) {
  const SpaceTimeGrid g(-1.0, 2.0, 31, 17);
  EXPECT_DOUBLE_EQ(g.dx(), 0.1);
  EXPECT_DOUBLE_EQ(g.dt(), 1.0 / 16.0);
  EXPECT_EQ(g.x(0), -1.0);
  EXPECT_EQ(g.x(30), 2.0);
  EXPECT_EQ(g.t(0), 0.0);
  EXPECT_EQ(g.t(16), 1.0);
}

TEST(SpaceTimeGrid, RejectsDegenerateShapes) {
  EXPECT_THROW(SpaceTimeGrid(0.0, 1.0, 2, 5), InputError);
  EXPECT_THROW(SpaceTimeGrid(0.0, 1.0, 5, 1), InputError);
  EXPECT_THROW(SpaceTimeGrid(1.0, 1.0, 5, 5), InputError);
  EXPECT_THROW(SpaceTimeGrid(1.0, 0.0, 5, 5), InputError);
}

TEST(IntegrateSpace, ConstantIsOne) {
  for (std::size_t nx : {3u, 4u, 11u, 201u, 1000u}) {
    const SpaceTimeGrid g(0.0, 1.0, nx, 2);
    EXPECT_EQ(integrate_space(ScalarField(nx, 1.0), g), 1.0) << nx;
  }
}

TEST(IntegrateSpace, SineMatchesAntiderivative) {
  const SpaceTimeGrid g(0.0, 1.0, 201, 2);
  const ScalarField f = tabulate(g, [](double x) { return std::sin(pi * x); });
  EXPECT_NEAR(integrate_space(f, g), 2.0 / pi, 1e-4);
}

TEST(IntegrateSpace, ZeroField) {
  const SpaceTimeGrid g(0.0, 1.0, 17, 2);
  EXPECT_EQ(integrate_space(ScalarField(17, 0.0), g), 0.0);
}

TEST(IntegrateSpace, LengthMismatchThrows) {
  const SpaceTimeGrid g(0.0, 1.0, 17, 2);
  EXPECT_THROW(integrate_space(ScalarField(16, 1.0), g), ShapeError);
}

TEST(IntegrateSpace, LinearAndMonotone) {
  const SpaceTimeGrid g(0.0, 2.0, 41, 2);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    ScalarField f(g.nx()), h(g.nx()), sum(g.nx());
    const double a = 3.0 * u(rng) - 1.5;
    for (std::size_t i = 0; i < g.nx(); ++i) {
      f[i] = u(rng);
      h[i] = u(rng) - 0.5;
      sum[i] = a * f[i] + h[i];
    }
    EXPECT_GE(integrate_space(f, g), 0.0);
    EXPECT_NEAR(integrate_space(sum, g),
                a * integrate_space(f, g) + integrate_space(h, g), 1e-13);
  }
}

TEST(IntegrateSpace, TrapezoidErrorIsSecondOrder) {
  const double exact = std::exp(1.0) - 1.0;
  double previous = 0.0;
  for (std::size_t nx : {11u, 21u, 41u, 81u}) {
    const SpaceTimeGrid g(0.0, 1.0, nx, 2);
    const double err =
        std::abs(integrate_space(tabulate(g, [](double x) { return std::exp(x); }),
                                 g) - exact);
    if (previous > 0.0) {
      EXPECT_NEAR(err / previous, 0.25, 0.01) << nx;
    }
    previous = err;
  }
}

TEST(IntegrateSpacetime, ConstantIsOne) {
  const SpaceTimeGrid g(0.0, 1.0, 21, 31);
  EXPECT_EQ(integrate_spacetime(SpaceTimeField(g, 1.0), g), 1.0);
}

TEST(IntegrateSpacetime, ExampleKilledDensityHasAnalyticMass) {
  const SpaceTimeGrid g(0.0, 1.0, 201, 301);
  const SpaceTimeField q = sample(presets::example_q, g);
  // (2 / pi) * (2 / 3)
  EXPECT_NEAR(integrate_spacetime(q, g), 4.0 / (3.0 * pi), 1e-3);
}

TEST(IntegrateSpacetime, ZeroAndShapeErrors) {
  const SpaceTimeGrid g(0.0, 1.0, 21, 31);
  EXPECT_EQ(integrate_spacetime(SpaceTimeField(g), g), 0.0);
  EXPECT_THROW(integrate_spacetime(SpaceTimeField(30, 21), g), ShapeError);
}

TEST(Sample, TabulatesPointwise) {
  const SpaceTimeGrid g(0.0, 1.0, 3, 2);
  const SpaceTimeField fx = sample([](double, double x) { return x; }, g);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(fx(k, 0), 0.0);
    EXPECT_EQ(fx(k, 1), 0.5);
    EXPECT_EQ(fx(k, 2), 1.0);
  }
  const SpaceTimeField ftx = sample([](double t, double x) { return t * x; }, g);
  EXPECT_EQ(ftx(1, 0), 0.0);
  EXPECT_EQ(ftx(1, 1), 0.5);
  EXPECT_EQ(ftx(1, 2), 1.0);
}

TEST(Sample, ConstantKillingRate) {
  const SpaceTimeGrid g(0.0, 1.0, 11, 7);
  const SpaceTimeField v =
      sample([](double, double) { return presets::kKilling; }, g);
  for (double x : v.values()) EXPECT_EQ(x, 0.3);
}

TEST(Sample, NonFiniteValueThrows) {
  const SpaceTimeGrid g(0.0, 1.0, 11, 7);
  EXPECT_THROW(sample([](double, double x) { return 1.0 / (x - 0.5); }, g),
               InputError);
  EXPECT_THROW(sample([](double, double) { return std::nan(""); }, g),
               InputError);
}

TEST(Interpolate, ReproducesBilinearFunctions) {
  const SpaceTimeGrid g(-1.0, 1.0, 9, 5);
  auto f = [](double t, double x) { return 2.0 + 3.0 * t - x + 0.5 * t * x; };
  const SpaceTimeField table = sample(f, g);
  for (double t : {0.0, 0.13, 0.5, 0.99, 1.0}) {
    for (double x : {-1.0, -0.31, 0.0, 0.77, 1.0}) {
      EXPECT_NEAR(interpolate(table, g, t, x), f(t, x), 1e-13);
    }
  }
}

}  // namespace
}  // namespace kbridge
