#include "kbridge/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "kbridge/error.hpp"
#include "kbridge/pde.hpp"

namespace kbridge::oracle {
namespace {

double xlogy_ratio(double a, double b) {
  if (a <= 0.0) return 0.0;
  if (b <= 0.0) {
    throw DomainError("kl_objective: coupling not absolutely continuous");
  }
  return a * std::log(a / b);
}

void check_targets(std::size_t m, std::size_t steps,
                   const Eigen::VectorXd& rho0, const KilledTargets& q) {
  if (static_cast<std::size_t>(rho0.size()) != m) {
    throw ShapeError("oracle: rho0 target has wrong length");
  }
  if (static_cast<std::size_t>(q.rows()) != steps ||
      static_cast<std::size_t>(q.cols()) != m) {
    throw ShapeError("oracle: Q target must be steps x states");
  }
  if ((rho0.array() < 0.0).any() || (q.array() < 0.0).any()) {
    throw InputError("oracle: targets must be >= 0");
  }
}

double row_residual(const DiscreteCouplings& pi, const Eigen::VectorXd& rho0) {
  Eigen::VectorXd rows = pi.xy.rowwise().sum();
  for (const auto& block : pi.xzt) rows += block.rowwise().sum();
  return (rows - rho0).cwiseAbs().maxCoeff();
}

double column_residual(const DiscreteCouplings& pi, const KilledTargets& q) {
  double worst = 0.0;
  for (std::size_t k = 0; k < pi.xzt.size(); ++k) {
    const Eigen::RowVectorXd cols = pi.xzt[k].colwise().sum();
    worst = std::max(worst, (cols - q.row(static_cast<Eigen::Index>(k)))
                                .cwiseAbs()
                                .maxCoeff());
  }
  return worst;
}

}  // namespace

void DiscreteChain::validate() const {
  const std::size_t m = states();
  if (m == 0) throw ModelError("chain: no states");
  if (kill.size() != step.size()) {
    throw ModelError("chain: step and kill sequences differ in length");
  }
  if (std::abs(r0.sum() - 1.0) > 1e-12 || (r0.array() < 0.0).any()) {
    throw ModelError("chain: r0 must be a probability vector");
  }
  for (std::size_t k = 0; k < steps(); ++k) {
    const Eigen::MatrixXd& s = step[k];
    const Eigen::VectorXd& d = kill[k];
    if (static_cast<std::size_t>(s.rows()) != m ||
        static_cast<std::size_t>(s.cols()) != m ||
        static_cast<std::size_t>(d.size()) != m) {
      throw ModelError("chain: step " + std::to_string(k) + " has wrong shape");
    }
    if ((s.array() < 0.0).any()) {
      throw ModelError("chain: negative move probability at step " +
                       std::to_string(k));
    }
    if ((d.array() < 0.0).any() || (d.array() > 1.0).any()) {
      throw ModelError("chain: killing probability outside [0, 1] at step " +
                       std::to_string(k));
    }
    const Eigen::VectorXd total = s.rowwise().sum() + d;
    if ((total.array() - 1.0).abs().maxCoeff() > 1e-12) {
      throw ModelError("chain: rows of S + d must sum to 1 at step " +
                       std::to_string(k));
    }
  }
}

DiscreteCouplings prior_couplings(const DiscreteChain& chain) {
  chain.validate();
  const auto m = static_cast<Eigen::Index>(chain.states());
  DiscreteCouplings rho;
  // reach(x, z): probability to start at x and sit alive at z before step k.
  Eigen::MatrixXd reach = chain.r0.asDiagonal() * Eigen::MatrixXd::Identity(m, m);
  for (std::size_t k = 0; k < chain.steps(); ++k) {
    rho.xzt.push_back(reach * chain.kill[k].asDiagonal());
    reach = reach * chain.step[k];
  }
  rho.xy = reach;
  return rho;
}

double kl_objective(const DiscreteCouplings& pi, const DiscreteCouplings& rho) {
  double sum = 0.0;
  for (Eigen::Index n = 0; n < pi.xy.size(); ++n) {
    sum += xlogy_ratio(pi.xy.data()[n], rho.xy.data()[n]);
  }
  for (std::size_t k = 0; k < pi.xzt.size(); ++k) {
    for (Eigen::Index n = 0; n < pi.xzt[k].size(); ++n) {
      sum += xlogy_ratio(pi.xzt[k].data()[n], rho.xzt[k].data()[n]);
    }
  }
  return sum;
}

OracleResult ipf_solve(const DiscreteCouplings& rho,
                       const Eigen::VectorXd& rho0_target,
                       const KilledTargets& q_target, double tol,
                       std::size_t max_iter) {
  const auto m = rho.xy.rows();
  const std::size_t steps = rho.xzt.size();
  check_targets(static_cast<std::size_t>(m), steps, rho0_target, q_target);

  // Support compatibility.
  Eigen::VectorXd row_mass = rho.xy.rowwise().sum();
  for (const auto& block : rho.xzt) row_mass += block.rowwise().sum();
  for (Eigen::Index x = 0; x < m; ++x) {
    if (rho0_target(x) > 0.0 && !(row_mass(x) > 0.0)) {
      throw InfeasibleError("ipf_solve: rho0 > 0 on a start state the prior "
                            "never occupies", 0, static_cast<std::size_t>(x));
    }
  }
  for (std::size_t k = 0; k < steps; ++k) {
    const Eigen::RowVectorXd cols = rho.xzt[k].colwise().sum();
    for (Eigen::Index z = 0; z < m; ++z) {
      if (q_target(static_cast<Eigen::Index>(k), z) > 0.0 && !(cols(z) > 0.0)) {
        throw InfeasibleError("ipf_solve: Q > 0 where the prior never kills",
                              k, static_cast<std::size_t>(z));
      }
    }
  }

  OracleResult result;
  DiscreteCouplings pi = rho;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    // Rows: enforce sum_y pi_xy + sum_{z,k} pi_xzt = rho0(x).
    Eigen::VectorXd rows = pi.xy.rowwise().sum();
    for (const auto& block : pi.xzt) rows += block.rowwise().sum();
    Eigen::VectorXd scale(m);
    for (Eigen::Index x = 0; x < m; ++x) {
      scale(x) = rows(x) > 0.0 ? rho0_target(x) / rows(x) : 0.0;
    }
    pi.xy = scale.asDiagonal() * pi.xy;
    for (auto& block : pi.xzt) block = scale.asDiagonal() * block;

    // Columns of the killed block: enforce sum_x pi_xzt = Q(k, z).
    for (std::size_t k = 0; k < steps; ++k) {
      const Eigen::RowVectorXd cols = pi.xzt[k].colwise().sum();
      Eigen::VectorXd col_scale(m);
      for (Eigen::Index z = 0; z < m; ++z) {
        const double q = q_target(static_cast<Eigen::Index>(k), z);
        if (q > 0.0 && !(cols(z) > 0.0)) {
          throw InfeasibleError("ipf_solve: killed mass collapsed to zero",
                                k, static_cast<std::size_t>(z));
        }
        col_scale(z) = q > 0.0 ? q / cols(z) : 0.0;
      }
      pi.xzt[k] = pi.xzt[k] * col_scale.asDiagonal();
    }

    result.iterations = it;
    const double residual = row_residual(pi, rho0_target);
    if (!std::isfinite(residual)) {
      throw NumericalError("ipf_solve: non-finite residual");
    }
    if (residual < tol) {
      result.couplings = std::move(pi);
      result.residual_rho0 = residual;
      result.residual_Q = column_residual(result.couplings, q_target);
      result.objective = kl_objective(result.couplings, rho);
      return result;
    }
  }
  throw ConvergenceError("ipf_solve: no convergence in " +
                             std::to_string(max_iter) + " cycles",
                         ConvergenceTrace{});
}

OracleResult fs_discrete(const DiscreteChain& chain,
                         const Eigen::VectorXd& rho0_target,
                         const KilledTargets& q_target, double tol,
                         std::size_t max_iter, double phi0_start) {
  chain.validate();
  const auto m = static_cast<Eigen::Index>(chain.states());
  const std::size_t steps = chain.steps();
  check_targets(chain.states(), steps, rho0_target, q_target);

  SupportMask support(static_cast<std::size_t>(m));
  for (Eigen::Index x = 0; x < m; ++x) support[x] = rho0_target(x) > 0.0;

  Eigen::VectorXd phi0 = Eigen::VectorXd::Constant(m, phi0_start);
  Eigen::VectorXd phihat0(m);
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(steps, m);
  Eigen::MatrixXd lambdahat(steps, m);

  auto update_phihat0 = [&] {
    for (Eigen::Index x = 0; x < m; ++x) {
      phihat0(x) = rho0_target(x) > 0.0 ? rho0_target(x) / phi0(x) : 0.0;
    }
  };

  OracleResult result;
  bool converged = false;
  for (std::size_t it = 1; it <= max_iter && !converged; ++it) {
    update_phihat0();
    // Forward: mass alive before step k, killed share d_k.
    Eigen::VectorXd alive = phihat0;
    for (std::size_t k = 0; k < steps; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      lambdahat.row(kk) = chain.kill[k].cwiseProduct(alive).transpose();
      alive = chain.step[k].transpose() * alive;
    }
    for (std::size_t k = 0; k < steps; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      for (Eigen::Index z = 0; z < m; ++z) {
        const double q = q_target(kk, z);
        if (q > 0.0) {
          if (!(lambdahat(kk, z) > 0.0)) {
            throw InfeasibleError("fs_discrete: Q > 0 where the prior never "
                                  "kills", k, static_cast<std::size_t>(z));
          }
          lambda(kk, z) = q / lambdahat(kk, z);
        } else {
          lambda(kk, z) = 0.0;
        }
      }
    }
    // Backward: value of surviving (1) or being killed (Lambda).
    Eigen::VectorXd value = Eigen::VectorXd::Ones(m);
    for (std::size_t k = steps; k-- > 0;) {
      const auto kk = static_cast<Eigen::Index>(k);
      value = chain.step[k] * value +
              chain.kill[k].cwiseProduct(lambda.row(kk).transpose());
    }
    const Eigen::VectorXd previous = phi0;
    phi0 = value;
    result.iterations = it;
    std::vector<double> a(phi0.data(), phi0.data() + m);
    std::vector<double> b(previous.data(), previous.data() + m);
    converged = hilbert_metric(a, b, support) < tol;
  }
  if (!converged) {
    throw ConvergenceError("fs_discrete: no convergence in " +
                               std::to_string(max_iter) + " sweeps",
                           ConvergenceTrace{});
  }
  update_phihat0();

  DiscreteCouplings& pi = result.couplings;
  Eigen::MatrixXd reach = phihat0.asDiagonal() * Eigen::MatrixXd::Identity(m, m);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Eigen::VectorXd weight =
        chain.kill[k].cwiseProduct(lambda.row(kk).transpose());
    pi.xzt.push_back(reach * weight.asDiagonal());
    reach = reach * chain.step[k];
  }
  pi.xy = reach;
  result.residual_rho0 = row_residual(pi, rho0_target);
  result.residual_Q = column_residual(pi, q_target);
  result.objective = kl_objective(pi, prior_couplings(chain));
  return result;
}

double linf_gap(const DiscreteCouplings& a, const DiscreteCouplings& b) {
  if (a.xzt.size() != b.xzt.size() || a.xy.rows() != b.xy.rows() ||
      a.xy.cols() != b.xy.cols()) {
    throw ShapeError("linf_gap: coupling shapes differ");
  }
  double worst = (a.xy - b.xy).cwiseAbs().maxCoeff();
  for (std::size_t k = 0; k < a.xzt.size(); ++k) {
    worst = std::max(worst, (a.xzt[k] - b.xzt[k]).cwiseAbs().maxCoeff());
  }
  return worst;
}

DiscreteChain chain_from_grid(const PriorSpec& prior, const SpaceTimeGrid& grid,
                              std::span<const double> r0_density) {
  require_shape(r0_density, grid, "chain_from_grid r0");
  const std::size_t n = grid.nx();
  const auto m = static_cast<Eigen::Index>(n);
  const double h = grid.dt();

  PriorSpec conservative = prior;
  conservative.killing = [](double, double) { return 0.0; };
  const KolmogorovPropagator transport(conservative, grid);

  DiscreteChain chain;
  chain.r0.resize(m);
  for (std::size_t i = 0; i < n; ++i) {
    chain.r0(static_cast<Eigen::Index>(i)) =
        grid.space_weight(i) * r0_density[i];
  }
  const double total = chain.r0.sum();
  if (!(total > 0.0)) throw InputError("chain_from_grid: r0 has no mass");
  chain.r0 /= total;

  std::vector<double> in(n, 0.0);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k + 1 < grid.nt(); ++k) {
    Eigen::MatrixXd move(m, m);
    for (std::size_t j = 0; j < n; ++j) {
      std::fill(in.begin(), in.end(), 0.0);
      in[j] = 1.0 / grid.space_weight(j);
      transport.forward_step(k, in, out);
      double row_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double mass = grid.space_weight(i) * out[i];
        if (mass < 0.0) {
          if (mass < -1e-13) {
            throw ModelError("chain_from_grid: Crank-Nicolson step has "
                             "negative entries; refine nt");
          }
          mass = 0.0;
        }
        move(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = mass;
        row_sum += mass;
      }
      move.row(static_cast<Eigen::Index>(j)) /= row_sum;
    }
    Eigen::VectorXd kill(m);
    for (std::size_t i = 0; i < n; ++i) {
      kill(static_cast<Eigen::Index>(i)) =
          1.0 - std::exp(-prior.killing(grid.t(k), grid.x(i)) * h);
    }
    Eigen::VectorXd survive = Eigen::VectorXd::Ones(m) - kill;
    chain.step.push_back(survive.asDiagonal() * move);
    chain.kill.push_back(kill);
  }
  chain.validate();
  return chain;
}

ChainTargets chain_targets_from_grid(const ProblemSpec& problem) {
  const SpaceTimeGrid& g = problem.grid;
  const auto m = static_cast<Eigen::Index>(g.nx());
  ChainTargets t;
  t.rho0.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    t.rho0(i) = g.space_weight(static_cast<std::size_t>(i)) *
                problem.rho0[static_cast<std::size_t>(i)];
  }
  t.Q.resize(static_cast<Eigen::Index>(g.nt() - 1), m);
  for (std::size_t k = 0; k + 1 < g.nt(); ++k) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      t.Q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          g.space_weight(i) * 0.5 * g.dt() *
          (problem.Q(k, i) + problem.Q(k + 1, i));
    }
  }
  return t;
}

DiscreteCouplings lump_grid_couplings(const Couplings& c,
                                      const SpaceTimeGrid& g) {
  const auto m = static_cast<Eigen::Index>(g.nx());
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    w(i) = g.space_weight(static_cast<std::size_t>(i));
  }
  DiscreteCouplings out;
  out.xy = w.asDiagonal() * c.pi_xy * w.asDiagonal();
  for (std::size_t k = 0; k + 1 < g.nt(); ++k) {
    out.xzt.push_back(0.5 * g.dt() * w.asDiagonal() *
                      (c.pi_xzt[k] + c.pi_xzt[k + 1]) * w.asDiagonal());
  }
  return out;
}

DiscreteChain random_chain(std::size_t states, std::size_t steps,
                           std::uint64_t seed, double kill_lo,
                           double kill_hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::uniform_real_distribution<double> kill_prob(kill_lo, kill_hi);
  const auto m = static_cast<Eigen::Index>(states);
  DiscreteChain chain;
  chain.r0.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) chain.r0(i) = unit(rng);
  chain.r0 /= chain.r0.sum();
  for (std::size_t k = 0; k < steps; ++k) {
    Eigen::MatrixXd s(m, m);
    Eigen::VectorXd d(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) s(i, j) = unit(rng);
      d(i) = kill_prob(rng);
      s.row(i) *= (1.0 - d(i)) / s.row(i).sum();
    }
    chain.step.push_back(s);
    chain.kill.push_back(d);
  }
  chain.validate();
  return chain;
}

FeasibleInstance random_feasible_targets(const DiscreteChain& chain,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> f_dist(0.2, 2.0);
  std::uniform_real_distribution<double> lambda_dist(0.1, 3.0);
  const auto m = static_cast<Eigen::Index>(chain.states());
  const DiscreteCouplings rho = prior_couplings(chain);

  Eigen::VectorXd f(m);
  for (Eigen::Index i = 0; i < m; ++i) f(i) = f_dist(rng);
  FeasibleInstance inst;
  DiscreteCouplings& pi = inst.solution;
  pi.xy = f.asDiagonal() * rho.xy;
  for (std::size_t k = 0; k < chain.steps(); ++k) {
    Eigen::VectorXd lambda(m);
    for (Eigen::Index z = 0; z < m; ++z) lambda(z) = lambda_dist(rng);
    pi.xzt.push_back(f.asDiagonal() * rho.xzt[k] * lambda.asDiagonal());
  }
  double total = pi.xy.sum();
  for (const auto& block : pi.xzt) total += block.sum();
  pi.xy /= total;
  for (auto& block : pi.xzt) block /= total;

  inst.targets.rho0 = pi.xy.rowwise().sum();
  inst.targets.Q.resize(static_cast<Eigen::Index>(chain.steps()), m);
  for (std::size_t k = 0; k < chain.steps(); ++k) {
    inst.targets.rho0 += pi.xzt[k].rowwise().sum();
    inst.targets.Q.row(static_cast<Eigen::Index>(k)) =
        pi.xzt[k].colwise().sum();
  }
  return inst;
}

}  // namespace kbridge::oracle
