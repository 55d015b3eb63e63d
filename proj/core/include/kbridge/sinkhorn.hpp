#ifndef KBRIDGE_SINKHORN_HPP_
#define KBRIDGE_SINKHORN_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kbridge/error.hpp"
#include "kbridge/grid.hpp"
#include "kbridge/pde.hpp"
#include "kbridge/prior.hpp"

namespace kbridge {

// Data of a bridge problem: initial density rho0 and target killed density Q.
struct ProblemSpec {
  ScalarField rho0;
  SpaceTimeField Q;
  PriorSpec prior;
  SpaceTimeGrid grid;
};

// Validates and normalizes problem data.
//  - rho0 >= 0, finite, positive mass; rescaled to unit trapezoid mass.
//  - Q >= 0, finite, Q(t = 0, .) == 0.
//  - integrate_spacetime(Q) < 1 (InputError "killed mass must be < 1").
//  - Q > 0 only where V > 0 (InfeasibleError with locus otherwise).
ProblemSpec make_problem(PriorSpec prior, const SpaceTimeGrid& grid,
                         ScalarField rho0, SpaceTimeField Q);

// Unknowns of the Schroedinger system on the grid.
struct Potentials {
  ScalarField phi0;          // phi(0, .)
  ScalarField phihat0;       // phihat(0, .)
  SpaceTimeField Lambda;
  SpaceTimeField Lambdahat;
  SpaceTimeField phi;
  SpaceTimeField phihat;
  double gauge = 1.0;        // phi(1, .) after gauge fixing
};

enum class GaugeConvention {
  kMaxPhi0OnSupport,  // max of phi(0, .) over supp(rho0) equals 1
  kNone,              // keep phi(1, .) = 1
};

struct SolverConfig {
  double tol_hilbert = 1e-10;
  std::size_t max_iter = 10000;
  double eps_div = 1e-300;
  GaugeConvention normalization = GaugeConvention::kMaxPhi0OnSupport;
  double initial_phi0 = 1.0;  // constant starting value of phi(0, .)
};

struct TraceRecord {
  std::size_t iteration = 0;
  double hilbert_distance = 0.0;  // d_H(phi0 new, phi0 old) on supp(rho0)
  double residual_rho0 = 0.0;     // || phi0 phihat0 - rho0 ||_1
  double residual_Q = 0.0;        // || Lambda Lambdahat - Q ||_1
};

enum class Termination { kConverged, kMaxIterations };

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  std::size_t iterations = 0;
  Termination termination = Termination::kMaxIterations;
  double final_residual_rho0 = 0.0;
  double final_residual_Q = 0.0;
  double min_phihat = 0.0;  // most negative forward value seen
  std::vector<std::string> warnings;
};

// Carries the trace of a run that hit max_iter.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, ConvergenceTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const ConvergenceTrace& trace() const noexcept { return trace_; }

 private:
  ConvergenceTrace trace_;
};

using SupportMask = std::vector<std::uint8_t>;

// log max(u/v) - log min(u/v). Throws DomainError on empty input or a
// nonpositive entry.
double hilbert_metric(std::span<const double> u, std::span<const double> v);

// Same, restricted to entries where mask != 0.
double hilbert_metric(std::span<const double> u, std::span<const double> v,
                      std::span<const std::uint8_t> mask);

SupportMask support_of(std::span<const double> f);

struct SolveResult {
  Potentials potentials;
  ConvergenceTrace trace;
};

// Fortet-Sinkhorn iteration bound to one problem; the prior propagator is
// factorized once at construction.
class FortetSinkhorn {
 public:
  explicit FortetSinkhorn(ProblemSpec problem, SolverConfig config = {});

  const ProblemSpec& problem() const noexcept { return problem_; }
  const SolverConfig& config() const noexcept { return config_; }
  const KolmogorovPropagator& propagator() const noexcept {
    return propagator_;
  }
  const SupportMask& rho0_support() const noexcept { return support_; }

  // phi(0, .) = value everywhere, the rest zero-initialized.
  Potentials initial_state(double value = 1.0) const;

  // One sweep phi0 -> phihat0 -> Lambdahat -> Lambda -> phi0 (next):
  //   (a) phihat0 = rho0 / phi0             (0 off supp(rho0))
  //   (b) phihat  = forward(phihat0)
  //   (c) Lambdahat = V phihat
  //   (d) Lambda = Q / Lambdahat where Q > 0, else 0
  //   (e) phi = backward(Lambda), phi0 = phi(0, .)
  // Throws InfeasibleError when Lambdahat <= eps_div where Q > 0 and
  // NumericalError on non-finite intermediates.
  void sweep(Potentials& state) const;

  // Iterates from a constant phi0 until the Hilbert distance between
  // successive phi0 drops below tol_hilbert, then refreshes phihat from the
  // final phi0 and fixes the gauge. Throws ConvergenceError on max_iter.
  SolveResult solve() const;
  SolveResult solve(Potentials start) const;

 private:
  ProblemSpec problem_;
  SolverConfig config_;
  KolmogorovPropagator propagator_;
  SupportMask support_;
};

// Free-function forms.
Potentials fs_sweep(const Potentials& state, const ProblemSpec& problem);
SolveResult solve(const ProblemSpec& problem, const SolverConfig& config = {});

// Rescales to (k phi, phihat / k, k Lambda, Lambdahat / k).
void apply_gauge(Potentials& state, double kappa);

// Writes "iteration,hilbert_distance,residual_rho0,residual_Q" rows.
void write_trace_csv(const ConvergenceTrace& trace, std::ostream& out);

}  // namespace kbridge

#endif  // KBRIDGE_SINKHORN_HPP_
