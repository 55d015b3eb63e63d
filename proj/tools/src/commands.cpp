#include "kbridge/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "kbridge/cli/csv.hpp"
#include "kbridge/cli/manifest.hpp"
#include "kbridge/oracle.hpp"
#include "kbridge/particle.hpp"
#include "kbridge/posterior.hpp"
#include "kbridge/presets.hpp"

namespace kbridge::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

// Collects outputs and timings, and writes manifest.json on every exit path
// once the output directory is locked.
class Run {
 public:
  Run(const CommandContext& ctx, std::string command)
      : ctx_(ctx), start_(Clock::now()) {
    fs::create_directories(ctx.out_dir);
    lock_.emplace(ctx.out_dir);
    manifest_["command"] = std::move(command);
    manifest_["config"] = to_json(ctx.config);
    manifest_["outputs"] = nlohmann::json::array();
    manifest_["timings"] = nlohmann::json::object();
  }

  fs::path path(const std::string& name) const { return ctx_.out_dir / name; }

  void output(const std::string& name) { manifest_["outputs"].push_back(name); }

  void field(const std::string& name, const SpaceTimeField& f,
             const SpaceTimeGrid& g) {
    write_field_csv(path(name), f, g);
    output(name);
  }

  void time(const std::string& what, Clock::time_point since) {
    manifest_["timings"][what + "_s"] = seconds_since(since);
  }

  nlohmann::json& manifest() { return manifest_; }

  void finish(const std::vector<fs::path>& extra_inputs = {}) {
    manifest_["input_hash"] = input_hash(ctx_.config, extra_inputs);
    manifest_["timings"]["total_s"] = seconds_since(start_);
    write_json(path("manifest.json"), manifest_);
  }

 private:
  const CommandContext& ctx_;
  Clock::time_point start_;
  std::optional<OutputLock> lock_;
  nlohmann::json manifest_;
};

nlohmann::json termination_json(const ConvergenceTrace& trace) {
  nlohmann::json t;
  t["reason"] = trace.termination == Termination::kConverged
                    ? "converged"
                    : "max_iterations";
  t["iterations"] = trace.iterations;
  t["final_hilbert_distance"] =
      trace.records.empty() ? 0.0 : trace.records.back().hilbert_distance;
  t["residual_rho0"] = trace.final_residual_rho0;
  t["residual_Q"] = trace.final_residual_Q;
  t["min_phihat"] = trace.min_phihat;
  t["warnings"] = trace.warnings;
  return t;
}

void write_trace(Run& run, const ConvergenceTrace& trace) {
  std::ofstream out(run.path("trace.csv"));
  write_trace_csv(trace, out);
  if (!out) throw InputError("write failed: trace.csv");
  run.output("trace.csv");
}

ScalarField initial_density(const RunConfig& cfg, const SpaceTimeGrid& grid) {
  if (!cfg.marginals_preset.empty()) {
    ScalarField r(grid.nx());
    for (std::size_t i = 0; i < grid.nx(); ++i) {
      r[i] = presets::example_rho0(grid.x(i));
    }
    return r;
  }
  const SpaceTimeField t = read_tabulated_csv(cfg.rho0_csv, grid, true);
  return ScalarField(t.row(0).begin(), t.row(0).end());
}

}  // namespace

int cmd_solve(const CommandContext& ctx) {
  Run run(ctx, "solve");
  auto t0 = Clock::now();
  try {
    const ProblemSpec problem = make_problem(ctx.config);
    const SpaceTimeGrid& g = problem.grid;
    run.time("setup", t0);

    t0 = Clock::now();
    SolveResult result;
    try {
      result = FortetSinkhorn(problem, ctx.config.solver).solve();
    } catch (const ConvergenceError& e) {
      run.time("solve", t0);
      write_trace(run, e.trace());
      run.manifest()["termination"] = termination_json(e.trace());
      run.finish();
      throw;
    }
    run.time("solve", t0);

    t0 = Clock::now();
    const Potentials& pot = result.potentials;
    const PosteriorSolution sol = assemble_posterior(pot, problem.prior, g);
    run.field("P.csv", sol.P, g);
    run.field("u.csv", sol.u, g);
    run.field("drift_correction.csv", sol.drift_correction, g);
    run.field("alpha.csv", sol.alpha, g);
    run.field("Qhat.csv", sol.Qhat, g);
    run.field("phi.csv", pot.phi, g);
    run.field("phihat.csv", pot.phihat, g);
    run.field("Lambda.csv", pot.Lambda, g);
    write_trace(run, result.trace);
    run.time("write", t0);

    const double killed = integrate_spacetime(sol.Qhat, g);
    const double fp = fp_residual(sol, problem.prior, g);
    run.manifest()["termination"] = termination_json(result.trace);
    run.manifest()["summary"] = {{"killed_mass", killed},
                                 {"target_killed_mass",
                                  integrate_spacetime(problem.Q, g)},
                                 {"survivor_mass_t1", sol.survivor_mass.back()},
                                 {"fp_residual", fp}};
    run.finish();

    ctx.out << "converged in " << result.trace.iterations << " sweeps\n"
            << "residual rho0  " << sci(result.trace.final_residual_rho0) << '\n'
            << "residual Q     " << sci(result.trace.final_residual_Q) << '\n'
            << "killed mass    " << format_double(killed) << '\n'
            << "fp residual    " << sci(fp) << '\n';
    for (const std::string& w : result.trace.warnings) {
      ctx.err << "warning: " << w << '\n';
    }
    ctx.out << "wrote " << run.manifest()["outputs"].size() << " files to "
            << ctx.out_dir.string() << '\n';
    return kExitOk;
  } catch (const InfeasibleError& e) {
    run.manifest()["termination"] = {{"reason", "infeasible"},
                                     {"time_index", e.time_index()},
                                     {"space_index", e.space_index()}};
    run.finish();
    throw;
  }
}

int cmd_check_kernel(const CommandContext& ctx) {
  Run run(ctx, "check-kernel");
  const SpaceTimeGrid g = make_grid(ctx.config);
  const PriorSpec prior = make_prior(ctx.config, g);
  auto t0 = Clock::now();
  const KolmogorovPropagator prop(prior, g);
  const double defect = conservation_defect(prop);

  ScalarField rho0 = initial_density(ctx.config, g);
  const double mass = integrate_space(rho0, g);
  if (!(mass > 0.0)) throw InputError("rho0 must have positive mass");
  for (double& v : rho0) v /= mass;
  const SpaceTimeField rt = prop.forward(rho0).phihat;
  run.time("check", t0);

  std::ofstream table(run.path("survivor_mass.csv"));
  table << "k,t,survivor_mass\n";
  ctx.out << "k,t,survivor_mass\n";
  for (std::size_t k = 0; k < g.nt(); ++k) {
    const std::string row = std::to_string(k) + "," + format_double(g.t(k)) +
                            "," + format_double(integrate_space(rt.row(k), g));
    table << row << '\n';
    ctx.out << row << '\n';
  }
  table.close();
  run.output("survivor_mass.csv");

  const bool pass = defect < ctx.config.defect_bound;
  ctx.out << "conservation_defect " << sci(defect) << " (bound "
          << sci(ctx.config.defect_bound) << ") " << (pass ? "PASS" : "FAIL")
          << '\n';
  run.manifest()["summary"] = {{"conservation_defect", defect},
                               {"defect_bound", ctx.config.defect_bound},
                               {"pass", pass}};
  run.finish();
  return pass ? kExitOk : kExitNonConvergence;
}

int cmd_oracle_compare(const CommandContext& ctx) {
  Run run(ctx, "oracle-compare");
  const RunConfig& cfg = ctx.config;
  auto t0 = Clock::now();
  nlohmann::json report;
  double gap = 0.0;

  if (cfg.oracle_mode == "random") {
    const oracle::DiscreteChain chain =
        oracle::random_chain(cfg.oracle_states, cfg.oracle_steps, cfg.oracle_seed);
    const oracle::FeasibleInstance inst =
        oracle::random_feasible_targets(chain, cfg.oracle_seed + 1);
    const oracle::OracleResult fs =
        oracle::fs_discrete(chain, inst.targets.rho0, inst.targets.Q);
    const oracle::OracleResult ipf = oracle::ipf_solve(
        oracle::prior_couplings(chain), inst.targets.rho0, inst.targets.Q);
    gap = oracle::linf_gap(fs.couplings, ipf.couplings);
    report = {{"mode", "random"},
              {"states", cfg.oracle_states},
              {"steps", cfg.oracle_steps},
              {"fs_ipf_gap", gap},
              {"fs_planted_gap", oracle::linf_gap(fs.couplings, inst.solution)},
              {"fs_iterations", fs.iterations},
              {"ipf_iterations", ipf.iterations},
              {"objective", ipf.objective}};
  } else {
    const SpaceTimeGrid g = make_grid(cfg);
    if (g.nx() * g.nx() * g.nt() > cfg.coupling_budget) {
      throw BudgetError("oracle-compare: nx * nx * nt = " +
                        std::to_string(g.nx() * g.nx() * g.nt()) +
                        " exceeds coupling_budget " +
                        std::to_string(cfg.coupling_budget));
    }
    const ProblemSpec problem = make_problem(cfg);
    const oracle::DiscreteChain chain =
        oracle::chain_from_grid(problem.prior, g, problem.rho0);
    const oracle::ChainTargets targets = oracle::chain_targets_from_grid(problem);
    const oracle::OracleResult fs =
        oracle::fs_discrete(chain, targets.rho0, targets.Q);
    const oracle::OracleResult ipf = oracle::ipf_solve(
        oracle::prior_couplings(chain), targets.rho0, targets.Q);
    gap = oracle::linf_gap(fs.couplings, ipf.couplings);
    const SolveResult cont = FortetSinkhorn(problem, cfg.solver).solve();
    const oracle::DiscreteCouplings lumped = oracle::lump_grid_couplings(
        couplings(cont.potentials, problem.prior, g, problem.rho0,
                  cfg.coupling_budget),
        g);
    report = {{"mode", "grid"},
              {"states", g.nx()},
              {"steps", g.nt() - 1},
              {"fs_ipf_gap", gap},
              {"continuous_ipf_gap", oracle::linf_gap(lumped, ipf.couplings)},
              {"fs_iterations", fs.iterations},
              {"ipf_iterations", ipf.iterations},
              {"objective", ipf.objective}};
  }
  run.time("oracle", t0);
  const bool pass = gap < 1e-8;
  report["pass"] = pass;
  write_json(run.path("oracle.json"), report);
  run.output("oracle.json");
  run.manifest()["summary"] = report;
  run.finish();

  for (const auto& [key, value] : report.items()) {
    ctx.out << key << ' ' << value.dump() << '\n';
  }
  return pass ? kExitOk : kExitNonConvergence;
}

int cmd_simulate(const CommandContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const fs::path posterior_dir =
      cfg.posterior_dir.empty() ? ctx.out_dir : cfg.posterior_dir;
  std::vector<fs::path> inputs;
  if (cfg.dynamics == Dynamics::kPosterior) {
    for (const char* name : {"drift_correction.csv", "alpha.csv"}) {
      const fs::path p = posterior_dir / name;
      if (!fs::exists(p)) {
        throw InputError("posterior artifact " + p.string() +
                         " not found; run solve with the same --out first");
      }
      inputs.push_back(p);
    }
  }

  Run run(ctx, "simulate");
  const ProblemSpec problem = make_problem(cfg);
  const SpaceTimeGrid& g = problem.grid;

  PosteriorSolution sol;
  double expected_killed = 0.0;
  if (cfg.dynamics == Dynamics::kPosterior) {
    sol.drift_correction = read_field_csv(inputs[0], g);
    sol.alpha = read_field_csv(inputs[1], g);
    expected_killed = integrate_spacetime(problem.Q, g);
  } else {
    const SpaceTimeField rt = solve_forward(problem.prior, g, problem.rho0).phihat;
    expected_killed = 1.0 - integrate_space(rt.row(g.nt() - 1), g);
  }

  auto t0 = Clock::now();
  SimConfig sim;
  sim.n_particles = cfg.particles;
  sim.seed = cfg.seed;
  sim.dynamics = cfg.dynamics;
  sim.substeps = cfg.substeps;
  const KillEventLog log = simulate(problem.prior, problem.rho0,
                                    cfg.dynamics == Dynamics::kPosterior ? &sol
                                                                         : nullptr,
                                    g, sim);
  run.time("simulate", t0);

  const EmpiricalProfiles prof = empirical_profiles(log, g);
  run.field("killed_hist.csv", prof.killed_hist, g);
  write_scalar_csv(run.path("survivors.csv"), prof.survivor_hist, g, "density");
  run.output("survivors.csv");

  // First time node where the target asks for killing.
  double onset = 1.0;
  for (std::size_t k = 0; k < g.nt() && onset == 1.0; ++k) {
    for (double v : problem.Q.row(k)) {
      if (v > 0.0) {
        onset = g.t(k);
        break;
      }
    }
  }
  std::size_t early = 0;
  double first_kill = 1.0;
  for (const ParticleRecord& r : log.particles) {
    if (!r.killed) continue;
    first_kill = std::min(first_kill, r.t_kill);
    // Kill times are step midpoints; anything before the previous grid node
    // precedes the target's support.
    if (r.t_kill < onset - g.dt()) ++early;
  }
  const double n = static_cast<double>(cfg.particles);
  const double p = expected_killed;
  const double sigma = std::sqrt(p * (1.0 - p) / n);
  const double fraction = log.killed_fraction();
  const nlohmann::json stats = {
      {"dynamics", cfg.dynamics == Dynamics::kPrior ? "prior" : "posterior"},
      {"particles", cfg.particles},
      {"killed", log.killed_count()},
      {"killed_fraction", fraction},
      {"expected_killed_fraction", p},
      {"binomial_sigma", sigma},
      {"z_score", sigma > 0.0 ? (fraction - p) / sigma : 0.0},
      {"first_kill_time", first_kill},
      {"target_onset_time", onset},
      {"kills_before_onset", early}};
  write_json(run.path("stats.json"), stats);
  run.output("stats.json");
  run.manifest()["summary"] = stats;
  run.finish(inputs);

  for (const auto& [key, value] : stats.items()) {
    ctx.out << key << ' ' << value.dump() << '\n';
  }
  return kExitOk;
}

int run_guarded(const CommandContext& ctx,
                const std::function<int(const CommandContext&)>& body) {
  try {
    return body(ctx);
  } catch (const InfeasibleError& e) {
    ctx.err << "infeasible: " << e.what() << " (time index " << e.time_index()
            << ", space index " << e.space_index() << ")\n";
    return kExitInfeasible;
  } catch (const ConvergenceError& e) {
    ctx.err << "not converged: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const NumericalError& e) {
    ctx.err << "numerical failure: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const Error& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace kbridge::cli
