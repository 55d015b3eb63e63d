#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kbridge/error.hpp"
#include "kbridge/posterior.hpp"
#include "kbridge/presets.hpp"

namespace kbridge {
namespace {

using std::numbers::pi;

double max_value(const SpaceTimeField& f) {
  return *std::max_element(f.values().begin(), f.values().end());
}

class ExamplePosterior : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    problem_ = new ProblemSpec(presets::example_problem());
    pot_ = new Potentials(solve(*problem_).potentials);
    sol_ = new PosteriorSolution(
        assemble_posterior(*pot_, problem_->prior, problem_->grid));
  }
  static void TearDownTestSuite() {
    delete sol_;
    delete pot_;
    delete problem_;
  }
  static ProblemSpec* problem_;
  static Potentials* pot_;
  static PosteriorSolution* sol_;
};
ProblemSpec* ExamplePosterior::problem_ = nullptr;
Potentials* ExamplePosterior::pot_ = nullptr;
PosteriorSolution* ExamplePosterior::sol_ = nullptr;

TEST_F(ExamplePosterior, InitialMarginalMatchesRho0) {
  const SpaceTimeGrid& g = problem_->grid;
  ScalarField want(g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) want[i] = presets::example_rho0(g.x(i));
  EXPECT_LT(l1_distance(sol_->P.row(0), want, g), 1e-6);
}

TEST_F(ExamplePosterior, TerminalSurvivorMass) {
  EXPECT_NEAR(sol_->survivor_mass.back(), 1.0 - 4.0 / (3.0 * pi), 1e-3);
}

TEST_F(ExamplePosterior, AchievedKilledDensityMatchesTarget) {
  EXPECT_LT(l1_distance(sol_->Qhat, problem_->Q, problem_->grid), 1e-6);
}

TEST_F(ExamplePosterior, NoKillingBeforeAbsorptionWindow) {
  const SpaceTimeGrid& g = problem_->grid;
  for (std::size_t k = 0; k < g.nt(); ++k) {
    if (g.t(k) >= presets::kAbsorptionStart) break;
    for (double v : sol_->alpha.row(k)) EXPECT_EQ(v, 0.0);
  }
}

TEST_F(ExamplePosterior, AlphaNonnegativeAndZeroOffTarget) {
  for (std::size_t n = 0; n < sol_->alpha.values().size(); ++n) {
    EXPECT_GE(sol_->alpha.values()[n], 0.0);
    if (problem_->Q.values()[n] == 0.0) {
      EXPECT_EQ(sol_->alpha.values()[n], 0.0);
    }
  }
}

TEST_F(ExamplePosterior, ControlFiniteAndMasked) {
  const SpaceTimeGrid& g = problem_->grid;
  const double floor = kPositivityFloor * max_value(sol_->P);
  bool some_nonzero = false;
  for (std::size_t k = 0; k < g.nt(); ++k) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      const double u = sol_->u(k, i);
      EXPECT_TRUE(std::isfinite(u));
      const bool on = sol_->mask[k * g.nx() + i] != 0;
      if (sol_->P(k, i) < floor) {
        EXPECT_FALSE(on);
      }
      if (!on) {
        EXPECT_EQ(u, 0.0);
        EXPECT_EQ(sol_->alpha(k, i), 0.0);
      }
      if (g.t(k) < presets::kAbsorptionStart && u != 0.0) some_nonzero = true;
    }
  }
  EXPECT_TRUE(some_nonzero);
}

TEST_F(ExamplePosterior, MassBookkeeping) {
  const SpaceTimeGrid& g = problem_->grid;
  double killed = 0.0;
  for (std::size_t k = 0; k < g.nt(); ++k) {
    if (k > 0) {
      killed += 0.5 * g.dt() *
                (integrate_space(sol_->Qhat.row(k - 1), g) +
                 integrate_space(sol_->Qhat.row(k), g));
    }
    EXPECT_NEAR(sol_->survivor_mass[k] + killed, 1.0, 1e-5) << k;
  }
}

TEST_F(ExamplePosterior, QhatFormsAgree) {
  const SpaceTimeGrid& g = problem_->grid;
  for (std::size_t k = 0; k < g.nt(); ++k) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (!sol_->mask[k * g.nx() + i]) continue;
      const double direct = sol_->Qhat(k, i);
      const double via_alpha =
          sol_->alpha(k, i) * presets::kKilling * sol_->P(k, i);
      EXPECT_NEAR(via_alpha, direct, 1e-10 * std::max(direct, 1e-300));
    }
  }
}

TEST_F(ExamplePosterior, FokkerPlanckResidual) {
  EXPECT_LT(fp_residual(*sol_, problem_->prior, problem_->grid), 1e-3);
}

// Forward-propagating rho0 under the posterior dynamics reproduces P.
TEST_F(ExamplePosterior, PosteriorDynamicsReproduceMarginals) {
  const SpaceTimeGrid& g = problem_->grid;
  SpaceTimeField drift = sol_->drift_correction;
  SpaceTimeField sigma(g, presets::kSigma);
  SpaceTimeField rate(g);
  for (std::size_t n = 0; n < rate.values().size(); ++n) {
    rate.values()[n] = sol_->alpha.values()[n] * presets::kKilling;
  }
  const PriorSpec posterior =
      tabulated_prior(std::move(drift), std::move(sigma), std::move(rate), g);
  const SpaceTimeField p = solve_forward(posterior, g, problem_->rho0).phihat;
  EXPECT_LT(linf_distance(p, sol_->P) / max_value(sol_->P), 1e-2);
}

TEST(FpResidual, DecreasesUnderRefinement) {
  double previous = INFINITY;
  for (auto [nx, nt] : {std::pair{101, 151}, {201, 301}, {401, 601}}) {
    const ProblemSpec p = presets::example_problem(nx, nt);
    const PosteriorSolution sol =
        assemble_posterior(solve(p).potentials, p.prior, p.grid);
    const double r = fp_residual(sol, p.prior, p.grid);
    EXPECT_LT(r, previous) << nx;
    previous = r;
  }
}

TEST(FpResidual, PriorFixedPoint) {
  const SpaceTimeGrid g(0.0, 1.0, 101, 1001);
  ScalarField r0(g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) r0[i] = presets::example_rho0(g.x(i));
  const ProblemSpec p =
      make_problem(presets::example_prior(), g, r0, SpaceTimeField(g));
  const PosteriorSolution sol =
      assemble_posterior(solve(p).potentials, p.prior, g);
  for (double v : sol.u.values()) EXPECT_NEAR(v, 0.0, 1e-10);
  EXPECT_LT(fp_residual(sol, p.prior, g), 1e-6);
}

Potentials synthetic(const SpaceTimeGrid& g, const FieldFunction& phi,
                     double lambda) {
  Potentials s;
  s.phi = sample(phi, g);
  s.phihat = SpaceTimeField(g, 1.0);
  s.Lambda = SpaceTimeField(g, lambda);
  s.Lambdahat = SpaceTimeField(g, 1.0);
  s.phi0.assign(s.phi.row(0).begin(), s.phi.row(0).end());
  s.phihat0.assign(g.nx(), 1.0);
  return s;
}

TEST(Control, UnitPhiGivesZeroControl) {
  const SpaceTimeGrid g(0.0, 1.0, 21, 11);
  const ControlFields c = control(
      synthetic(g, [](double, double) { return 1.0; }, 1.0),
      presets::example_prior(), g);
  for (double v : c.u.values()) EXPECT_EQ(v, 0.0);
}

TEST(Control, ExponentialPhiGivesConstantGradient) {
  const SpaceTimeGrid g(-1.0, 2.0, 31, 5);
  const double c = 1.7;
  const ControlFields f = control(
      synthetic(g, [c](double, double x) { return std::exp(c * x); }, 1.0),
      presets::example_prior(), g);
  for (std::size_t k = 0; k < g.nt(); ++k) {
    for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
      EXPECT_NEAR(f.u(k, i), presets::kSigma * c, 1e-12);
      EXPECT_NEAR(f.drift_correction(k, i),
                  presets::kSigma * presets::kSigma * c, 1e-12);
    }
  }
}

TEST(Killing, UnitPotentialsKeepPriorRate) {
  const SpaceTimeGrid g(0.0, 1.0, 21, 11);
  const KillingFields kf = killing(
      synthetic(g, [](double, double) { return 1.0; }, 1.0),
      presets::example_prior(), g);
  for (double v : kf.alpha.values()) EXPECT_EQ(v, 1.0);
  for (double v : kf.Qhat.values()) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Marginals, NoConstraintsGivePriorMarginals) {
  const SpaceTimeGrid g(0.0, 1.0, 51, 41);
  const PriorSpec prior = constant_prior(0.2, 0.3, 0.0);
  ScalarField r0(g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) r0[i] = presets::example_rho0(g.x(i));
  const ProblemSpec p = make_problem(prior, g, r0, SpaceTimeField(g));
  const SpaceTimeField pm = marginals(solve(p).potentials, g);
  const SpaceTimeField rt = solve_forward(prior, g, p.rho0).phihat;
  EXPECT_LT(linf_distance(pm, rt), 1e-10);
}

TEST(Marginals, ShapeErrors) {
  const SpaceTimeGrid g(0.0, 1.0, 21, 11);
  Potentials s = synthetic(g, [](double, double) { return 1.0; }, 1.0);
  s.phihat = SpaceTimeField(10, 21);
  EXPECT_THROW(marginals(s, g), ShapeError);
}

class SmallCouplings : public ::testing::Test {
 protected:
  void SetUp() override {
    problem_ = presets::example_problem(31, 41);
    pot_ = solve(problem_).potentials;
    pi_ = couplings(pot_, problem_.prior, problem_.grid, problem_.rho0);
  }
  ProblemSpec problem_ = presets::example_problem(3, 2);
  Potentials pot_;
  Couplings pi_;
};

TEST_F(SmallCouplings, RowIntegralsReproduceRho0) {
  const SpaceTimeGrid& g = problem_.grid;
  for (std::size_t x = 0; x < g.nx(); ++x) {
    double row = 0.0;
    for (std::size_t y = 0; y < g.nx(); ++y) {
      row += g.space_weight(y) * pi_.pi_xy(x, y);
    }
    for (std::size_t k = 0; k < g.nt(); ++k) {
      for (std::size_t z = 0; z < g.nx(); ++z) {
        row += g.time_weight(k) * g.space_weight(z) * pi_.pi_xzt[k](x, z);
      }
    }
    EXPECT_NEAR(row, problem_.rho0[x], 1e-6) << x;
  }
}

TEST_F(SmallCouplings, ColumnIntegralsReproduceQ) {
  const SpaceTimeGrid& g = problem_.grid;
  for (std::size_t k = 0; k < g.nt(); ++k) {
    for (std::size_t z = 0; z < g.nx(); ++z) {
      double col = 0.0;
      for (std::size_t x = 0; x < g.nx(); ++x) {
        col += g.space_weight(x) * pi_.pi_xzt[k](x, z);
      }
      EXPECT_NEAR(col, problem_.Q(k, z), 1e-6) << k << "," << z;
    }
  }
}

TEST_F(SmallCouplings, Nonnegative) {
  EXPECT_GE(pi_.pi_xy.minCoeff(), -1e-12);
  for (const auto& m : pi_.pi_xzt) EXPECT_GE(m.minCoeff(), -1e-12);
}

TEST_F(SmallCouplings, BudgetRefusal) {
  EXPECT_THROW(couplings(pot_, problem_.prior, problem_.grid, problem_.rho0,
                         1000),
               BudgetError);
}

// Moving mass along directions that keep every row and column integral
// fixed never lowers the relative entropy to the prior couplings.
TEST_F(SmallCouplings, OptimalAmongFeasibleCouplings) {
  const SpaceTimeGrid& g = problem_.grid;
  const KolmogorovPropagator prop(problem_.prior, g);
  const Couplings prior = kernel_couplings(prop, problem_.rho0,
                                           SpaceTimeField(g, 1.0));
  const double best = relative_entropy(pi_, prior, g);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> node(0, g.nx() - 1);
  std::uniform_int_distribution<std::size_t> step(1, g.nt() - 1);
  int tried = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Couplings other = pi_;
    const std::size_t x1 = node(rng), x2 = node(rng);
    const std::size_t y1 = node(rng), y2 = node(rng);
    const std::size_t k = step(rng), z = node(rng);
    if (x1 == x2 || y1 == y2) continue;
    // Shift eps of killed mass at (k, z) from start x1 to x2 and compensate
    // with survivor mass, plus a survivor swap y1 <-> y2 at x1.
    const double eps = 1e-3 * std::min(other.pi_xzt[k](x1, z),
                                       other.pi_xy(x2, y1));
    if (!(eps > 0.0)) continue;
    const double wk = g.time_weight(k) * g.space_weight(z);
    other.pi_xzt[k](x1, z) -= eps / (g.space_weight(x1));
    other.pi_xzt[k](x2, z) += eps / (g.space_weight(x2));
    other.pi_xy(x1, y1) += wk * eps / (g.space_weight(x1) * g.space_weight(y1));
    other.pi_xy(x2, y1) -= wk * eps / (g.space_weight(x2) * g.space_weight(y1));
    const double swap = 1e-3 * other.pi_xy(x1, y2);
    other.pi_xy(x1, y2) -= swap / g.space_weight(y2);
    other.pi_xy(x1, y1) += swap / g.space_weight(y1);
    if (other.pi_xy.minCoeff() < 0.0) continue;
    ++tried;
    EXPECT_LE(best, relative_entropy(other, prior, g) + 1e-6);
  }
  EXPECT_GT(tried, 50);
}

TEST(Couplings, NoKilledTargetGivesEmptyKilledBlock) {
  const SpaceTimeGrid g(0.0, 1.0, 21, 21);
  ScalarField r0(g.nx());
  for (std::size_t i = 0; i < g.nx(); ++i) r0[i] = presets::example_rho0(g.x(i));
  const ProblemSpec p =
      make_problem(presets::example_prior(), g, r0, SpaceTimeField(g));
  const Couplings c = couplings(solve(p).potentials, p.prior, g, p.rho0);
  for (const auto& m : c.pi_xzt) EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace kbridge
