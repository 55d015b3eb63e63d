#include "kbridge/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace kbridge {
namespace {

constexpr double kUndershootWarning = 1e-8;

std::string locus(const SpaceTimeGrid& grid, std::size_t k, std::size_t i) {
  return "t = " + std::to_string(grid.t(k)) + ", z = " +
         std::to_string(grid.x(i)) + " (k = " + std::to_string(k) +
         ", i = " + std::to_string(i) + ")";
}

double coupling_residual_q(const Potentials& s, const ProblemSpec& p) {
  double sum = 0.0;
  for (std::size_t k = 0; k < p.grid.nt(); ++k) {
    double row = 0.0;
    for (std::size_t i = 0; i < p.grid.nx(); ++i) {
      row += p.grid.space_weight(i) *
             std::abs(s.Lambda(k, i) * s.Lambdahat(k, i) - p.Q(k, i));
    }
    sum += p.grid.time_weight(k) * row;
  }
  return sum;
}

double coupling_residual_rho0(std::span<const double> phi0,
                              std::span<const double> phihat0,
                              const ProblemSpec& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.grid.nx(); ++i) {
    sum += p.grid.space_weight(i) * std::abs(phi0[i] * phihat0[i] - p.rho0[i]);
  }
  return sum;
}

}  // namespace

ProblemSpec make_problem(PriorSpec prior, const SpaceTimeGrid& grid,
                         ScalarField rho0, SpaceTimeField Q) {
  require_shape(rho0, grid, "rho0");
  require_shape(Q, grid, "Q");
  for (double v : rho0) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InputError("rho0 must be finite and >= 0");
    }
  }
  const double mass = integrate_space(rho0, grid);
  if (!(mass > 0.0)) throw InputError("rho0 must have positive mass");
  for (double& v : rho0) v /= mass;

  for (double v : Q.values()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InputError("Q must be finite and >= 0");
    }
  }
  for (double v : Q.row(0)) {
    if (v != 0.0) throw InputError("Q must vanish at t = 0");
  }
  if (integrate_spacetime(Q, grid) >= 1.0) {
    throw InputError("killed mass must be < 1");
  }
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      if (Q(k, i) > 0.0 && !(prior.killing(grid.t(k), grid.x(i)) > 0.0)) {
        throw InfeasibleError(
            "target killed density is positive where the prior killing rate "
            "vanishes at " + locus(grid, k, i), k, i);
      }
    }
  }
  return ProblemSpec{std::move(rho0), std::move(Q), std::move(prior), grid};
}

double hilbert_metric(std::span<const double> u, std::span<const double> v) {
  const SupportMask all(u.size(), 1);
  return hilbert_metric(u, v, all);
}

double hilbert_metric(std::span<const double> u, std::span<const double> v,
                      std::span<const std::uint8_t> mask) {
  if (u.size() != v.size() || u.size() != mask.size()) {
    throw ShapeError("hilbert_metric: size mismatch");
  }
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!mask[i]) continue;
    if (!(u[i] > 0.0) || !(v[i] > 0.0) || !std::isfinite(u[i]) ||
        !std::isfinite(v[i])) {
      throw DomainError("hilbert_metric: nonpositive entry at index " +
                        std::to_string(i));
    }
    const double r = std::log(u[i]) - std::log(v[i]);
    if (!any) {
      lo = hi = r;
      any = true;
    } else {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  if (!any) throw DomainError("hilbert_metric: empty support");
  return hi - lo;
}

SupportMask support_of(std::span<const double> f) {
  SupportMask mask(f.size(), 0);
  for (std::size_t i = 0; i < f.size(); ++i) mask[i] = f[i] > 0.0 ? 1 : 0;
  return mask;
}

FortetSinkhorn::FortetSinkhorn(ProblemSpec problem, SolverConfig config)
    : problem_(std::move(problem)),
      config_(config),
      propagator_(problem_.prior, problem_.grid),
      support_(support_of(problem_.rho0)) {
  if (!(config_.tol_hilbert > 0.0)) {
    throw InputError("solver: tol_hilbert must be > 0");
  }
  if (config_.max_iter < 1) throw InputError("solver: max_iter must be >= 1");
  if (!(config_.initial_phi0 > 0.0)) {
    throw InputError("solver: initial phi0 must be > 0");
  }
}

Potentials FortetSinkhorn::initial_state(double value) const {
  const SpaceTimeGrid& g = problem_.grid;
  Potentials s;
  s.phi0.assign(g.nx(), value);
  s.phihat0.assign(g.nx(), 0.0);
  s.Lambda = SpaceTimeField(g);
  s.Lambdahat = SpaceTimeField(g);
  s.phi = SpaceTimeField(g);
  s.phihat = SpaceTimeField(g);
  return s;
}

void FortetSinkhorn::sweep(Potentials& s) const {
  const SpaceTimeGrid& g = problem_.grid;
  const std::size_t nx = g.nx();
  const double eps = config_.eps_div;

  // (a) phi0 -> phihat0
  s.phihat0.resize(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    if (problem_.rho0[i] > 0.0) {
      if (!(s.phi0[i] > eps) || !std::isfinite(s.phi0[i])) {
        throw NumericalError("fs_sweep: phi(0, .) not positive at x = " +
                             std::to_string(g.x(i)));
      }
      s.phihat0[i] = problem_.rho0[i] / s.phi0[i];
    } else {
      s.phihat0[i] = 0.0;
    }
  }

  // (b) phihat0 -> phihat, (c) -> Lambdahat
  propagator_.forward_into(s.phihat0, s.phihat);
  const SpaceTimeField& v = propagator_.killing();
  if (!s.Lambdahat.matches(g)) s.Lambdahat = SpaceTimeField(g);
  if (!s.Lambda.matches(g)) s.Lambda = SpaceTimeField(g);
  for (std::size_t n = 0; n < s.phihat.values().size(); ++n) {
    s.Lambdahat.values()[n] = v.values()[n] * s.phihat.values()[n];
  }

  // (d) Lambdahat -> Lambda
  for (std::size_t k = 0; k < g.nt(); ++k) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double q = problem_.Q(k, i);
      if (q > 0.0) {
        const double lh = s.Lambdahat(k, i);
        if (!std::isfinite(lh)) {
          throw NumericalError("fs_sweep: non-finite Lambdahat at " +
                               locus(g, k, i));
        }
        if (!(lh > eps)) {
          throw InfeasibleError(
              "fs_sweep: Lambdahat vanishes where Q > 0 at " + locus(g, k, i),
              k, i);
        }
        s.Lambda(k, i) = q / lh;
      } else {
        s.Lambda(k, i) = 0.0;
      }
    }
  }

  // (e) Lambda -> phi -> phi0
  propagator_.backward_into(s.Lambda, s.phi);
  const auto row0 = s.phi.row(0);
  s.phi0.assign(row0.begin(), row0.end());
  for (double x : s.phi0) {
    if (!std::isfinite(x)) throw NumericalError("fs_sweep: non-finite phi");
  }
}

SolveResult FortetSinkhorn::solve() const {
  return solve(initial_state(config_.initial_phi0));
}

SolveResult FortetSinkhorn::solve(Potentials state) const {
  SolveResult result;
  ConvergenceTrace& trace = result.trace;
  trace.min_phihat = 0.0;
  ScalarField previous;

  for (std::size_t it = 1; it <= config_.max_iter; ++it) {
    previous = state.phi0;
    sweep(state);

    TraceRecord rec;
    rec.iteration = it;
    rec.hilbert_distance = hilbert_metric(state.phi0, previous, support_);
    rec.residual_rho0 = coupling_residual_rho0(state.phi0, state.phihat0,
                                               problem_);
    rec.residual_Q = coupling_residual_q(state, problem_);
    trace.records.push_back(rec);
    trace.iterations = it;

    const double lo = *std::min_element(state.phihat.values().begin(),
                                        state.phihat.values().end());
    trace.min_phihat = std::min(trace.min_phihat, lo);

    if (!std::isfinite(rec.hilbert_distance)) {
      throw NumericalError("fs solve: non-finite Hilbert distance");
    }
    if (rec.hilbert_distance < config_.tol_hilbert) {
      trace.termination = Termination::kConverged;
      break;
    }
  }
  if (trace.termination != Termination::kConverged) {
    throw ConvergenceError("Fortet-Sinkhorn did not reach tolerance in " +
                               std::to_string(config_.max_iter) + " sweeps",
                           std::move(trace));
  }

  // Refresh the forward half from the final phi0 so that P(0, .) = rho0.
  const std::size_t nx = problem_.grid.nx();
  for (std::size_t i = 0; i < nx; ++i) {
    state.phihat0[i] =
        problem_.rho0[i] > 0.0 ? problem_.rho0[i] / state.phi0[i] : 0.0;
  }
  propagator_.forward_into(state.phihat0, state.phihat);
  for (std::size_t n = 0; n < state.phihat.values().size(); ++n) {
    state.Lambdahat.values()[n] =
        propagator_.killing().values()[n] * state.phihat.values()[n];
  }

  if (config_.normalization == GaugeConvention::kMaxPhi0OnSupport) {
    double peak = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
      if (support_[i]) peak = std::max(peak, state.phi0[i]);
    }
    if (peak > 0.0) apply_gauge(state, 1.0 / peak);
  }

  trace.final_residual_rho0 =
      coupling_residual_rho0(state.phi0, state.phihat0, problem_);
  trace.final_residual_Q = coupling_residual_q(state, problem_);
  if (trace.min_phihat < -kUndershootWarning) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "Crank-Nicolson undershoot %.3e in phihat; consider a "
                  "larger nt",
                  -trace.min_phihat);
    trace.warnings.emplace_back(buf);
  }
  result.potentials = std::move(state);
  return result;
}

Potentials fs_sweep(const Potentials& state, const ProblemSpec& problem) {
  const FortetSinkhorn solver(problem);
  Potentials next = state;
  solver.sweep(next);
  return next;
}

SolveResult solve(const ProblemSpec& problem, const SolverConfig& config) {
  return FortetSinkhorn(problem, config).solve();
}

void apply_gauge(Potentials& s, double kappa) {
  if (!(kappa > 0.0)) throw InputError("apply_gauge: kappa must be > 0");
  const double inv = 1.0 / kappa;
  for (double& v : s.phi0) v *= kappa;
  for (double& v : s.phi.values()) v *= kappa;
  for (double& v : s.Lambda.values()) v *= kappa;
  for (double& v : s.phihat0) v *= inv;
  for (double& v : s.phihat.values()) v *= inv;
  for (double& v : s.Lambdahat.values()) v *= inv;
  s.gauge *= kappa;
}

void write_trace_csv(const ConvergenceTrace& trace, std::ostream& out) {
  out << "iteration,hilbert_distance,residual_rho0,residual_Q\n";
  char buf[128];
  for (const TraceRecord& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.iteration,
                  r.hilbert_distance, r.residual_rho0, r.residual_Q);
    out << buf;
  }
}

}  // namespace kbridge
