#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "kbridge/cli/commands.hpp"
#include "kbridge/cli/config.hpp"
#include "kbridge/cli/csv.hpp"
#include "kbridge/cli/manifest.hpp"
#include "kbridge/pde.hpp"
#include "kbridge/presets.hpp"

namespace kbridge::cli {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(KBRIDGE_TEST_TMPDIR) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) {
  return nlohmann::json::parse(read_text(p));
}

// Long-format t,x,value table of f on every node (or only t = 0).
void write_tabulated(const fs::path& p, const SpaceTimeGrid& g,
                     double (*f)(double, double), bool initial_only) {
  std::ofstream out(p);
  out << "t,x,value\n";
  const std::size_t nt = initial_only ? 1 : g.nt();
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      out << format_double(g.t(k)) << ',' << format_double(g.x(i)) << ','
          << format_double(f(g.t(k), g.x(i))) << '\n';
    }
  }
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(int (*body)(const CommandContext&), const RunConfig& cfg,
            const fs::path& dir) {
  std::ostringstream out, err;
  CommandContext ctx{cfg, dir, out, err};
  const int code = run_guarded(ctx, body);
  return {code, out.str(), err.str()};
}

RunConfig small_example() {
  RunConfig cfg = preset_config(kExamplePreset);
  cfg.nx = 51;
  cfg.nt = 61;
  return cfg;
}

TEST(Solve, ExamplePresetWritesEveryArtifact) {
  const fs::path dir = scratch("solve_ok");
  const Outcome r = run(cmd_solve, small_example(), dir);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* name :
       {"P.csv", "u.csv", "drift_correction.csv", "alpha.csv", "Qhat.csv",
        "phi.csv", "phihat.csv", "Lambda.csv", "trace.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }
  EXPECT_FALSE(fs::exists(dir / kLockName));
  const nlohmann::json m = read_json(dir / "manifest.json");
  EXPECT_EQ(m["command"], "solve");
  EXPECT_EQ(m["termination"]["reason"], "converged");
  EXPECT_EQ(m["input_hash"].get<std::string>().size(), 40u);
  EXPECT_EQ(m["config"]["grid"]["nx"], 51);
  EXPECT_TRUE(m["timings"].contains("total_s"));

  const SpaceTimeGrid g = make_grid(small_example());
  const SpaceTimeField qhat = read_field_csv(dir / "Qhat.csv", g);
  EXPECT_NEAR(integrate_spacetime(qhat, g),
              m["summary"]["target_killed_mass"].get<double>(), 1e-8);
}

TEST(Solve, KilledMassOfOneIsAnInputError) {
  const fs::path dir = scratch("solve_mass");
  const SpaceTimeGrid g(0.0, 1.0, 21, 21);
  write_tabulated(dir / "rho0.csv", g, [](double, double) { return 1.0; },
                  true);
  write_tabulated(dir / "q.csv", g,
                  [](double t, double) { return t > 0.0 ? 2.0 : 0.0; }, false);
  write_text(dir / "run.ini",
             "[grid]\nnx = 21\nnt = 21\n"
             "[marginals]\nrho0_csv = rho0.csv\nq_csv = q.csv\n");
  const Outcome r = run(cmd_solve, load_config(dir / "run.ini"), dir / "out");
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("killed mass"), std::string::npos) << r.err;
}

TEST(Solve, TargetWhereThePriorCannotKillIsInfeasible) {
  const fs::path dir = scratch("solve_infeasible");
  const SpaceTimeGrid g(0.0, 1.0, 21, 21);
  // Killing only on the left half; the example target also kills on the right.
  write_tabulated(dir / "v.csv", g,
                  [](double, double x) { return x < 0.5 ? 0.3 : 0.0; }, false);
  write_text(dir / "run.ini",
             "[grid]\nnx = 21\nnt = 21\n"
             "[prior]\ndrift = 0\nsigma = 0.25\nkilling_csv = v.csv\n");
  const Outcome r = run(cmd_solve, load_config(dir / "run.ini"), dir / "out");
  EXPECT_EQ(r.code, kExitInfeasible) << r.err;
  EXPECT_NE(r.err.find("time index"), std::string::npos) << r.err;
  const nlohmann::json m = read_json(dir / "out" / "manifest.json");
  EXPECT_EQ(m["termination"]["reason"], "infeasible");
  EXPECT_GE(g.x(m["termination"]["space_index"].get<std::size_t>()), 0.5);
}

TEST(Solve, IterationLimitExitsThreeWithTrace) {
  const fs::path dir = scratch("solve_limit");
  RunConfig cfg = small_example();
  cfg.solver.max_iter = 2;
  const Outcome r = run(cmd_solve, cfg, dir);
  EXPECT_EQ(r.code, kExitNonConvergence) << r.err;
  EXPECT_TRUE(fs::exists(dir / "trace.csv"));
  const nlohmann::json m = read_json(dir / "manifest.json");
  EXPECT_EQ(m["termination"]["reason"], "max_iterations");
  EXPECT_EQ(m["termination"]["iterations"], 2);
}

TEST(Solve, HeldLockRefusesTheRun) {
  const fs::path dir = scratch("solve_lock");
  {
    OutputLock lock(dir);
    EXPECT_THROW(OutputLock second(dir), InputError);
    const Outcome r = run(cmd_solve, small_example(), dir);
    EXPECT_EQ(r.code, kExitInput);
    EXPECT_NE(r.err.find("locked"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "manifest.json"));
  }
  EXPECT_FALSE(fs::exists(dir / kLockName));
  EXPECT_EQ(run(cmd_solve, small_example(), dir).code, kExitOk);
}

TEST(Config, UnknownKeyReportsItsLine) {
  const fs::path dir = scratch("cfg_key");
  write_text(dir / "bad.ini", "[grid]\nnx = 21\nnq = 4\n");
  try {
    load_config(dir / "bad.ini");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.ini:3"), std::string::npos)
        << e.what();
  }
}

TEST(Config, BadValueAndSyntaxReportLines) {
  const fs::path dir = scratch("cfg_value");
  write_text(dir / "value.ini", "[solver]\n\ntol = fast\n");
  EXPECT_THROW(
      {
        try {
          load_config(dir / "value.ini");
        } catch (const ConfigError& e) {
          EXPECT_NE(std::string(e.what()).find("value.ini:3"),
                    std::string::npos)
              << e.what();
          throw;
        }
      },
      ConfigError);
  write_text(dir / "syntax.ini", "[grid\nnx = 3\n");
  EXPECT_THROW(load_config(dir / "syntax.ini"), ConfigError);
  write_text(dir / "small.ini", "[grid]\nnx = 1\n");
  EXPECT_THROW(load_config(dir / "small.ini"), ConfigError);
  EXPECT_THROW(load_config(dir / "missing.ini"), ConfigError);
}

TEST(Config, OverridesReplaceFileValues) {
  RunConfig cfg = preset_config(kExamplePreset);
  Overrides o;
  o.nx = 41;
  o.tol = 1e-9;
  o.seed = 5;
  apply_overrides(cfg, o);
  EXPECT_EQ(cfg.nx, 41u);
  EXPECT_EQ(cfg.nt, 301u);
  EXPECT_EQ(cfg.solver.tol_hilbert, 1e-9);
  EXPECT_EQ(cfg.seed, 5u);
}

TEST(Config, ShippedExampleMatchesPreset) {
  RunConfig file = load_config(fs::path(KBRIDGE_SOURCE_DIR) / "configs" /
                               "example-custom.ini");
  EXPECT_TRUE(file.prior_preset.empty());
  file.nx = 41;
  file.nt = 61;
  RunConfig preset = preset_config(kExamplePreset);
  preset.nx = 41;
  preset.nt = 61;
  const ProblemSpec a = make_problem(file);
  const ProblemSpec b = make_problem(preset);
  EXPECT_EQ(linf_distance(a.Q, b.Q), 0.0);
  const KolmogorovPropagator pa(a.prior, a.grid), pb(b.prior, b.grid);
  EXPECT_EQ(linf_distance(pa.killing(), pb.killing()), 0.0);
}

TEST(Csv, FieldsRoundTripBitForBit) {
  const fs::path dir = scratch("csv");
  const SpaceTimeGrid g(-0.3, 1.7, 13, 9);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SpaceTimeField f(g);
  for (std::size_t k = 0; k < g.nt(); ++k) {
    for (double& v : f.row(k)) v = std::ldexp(u(rng), int(k) * 37 - 150);
  }
  write_field_csv(dir / "f.csv", f, g);
  const SpaceTimeField back = read_field_csv(dir / "f.csv", g);
  for (std::size_t k = 0; k < g.nt(); ++k) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      ASSERT_EQ(back(k, i), f(k, i)) << k << ',' << i;
    }
  }
  const std::string header = read_text(dir / "f.csv").substr(0, 7);
  EXPECT_EQ(header, "k,t,-0.");
  EXPECT_THROW(read_field_csv(dir / "f.csv", SpaceTimeGrid(-0.3, 1.7, 13, 10)),
               InputError);
  EXPECT_THROW(read_field_csv(dir / "f.csv", SpaceTimeGrid(0.0, 1.7, 13, 9)),
               InputError);
}

TEST(Csv, TabulatedInputSnapsToNodes) {
  const fs::path dir = scratch("tab");
  const SpaceTimeGrid g(0.0, 1.0, 11, 5);
  write_tabulated(dir / "q.csv", g,
                  [](double t, double x) { return t + 10.0 * x; }, false);
  const SpaceTimeField q = read_tabulated_csv(dir / "q.csv", g);
  EXPECT_DOUBLE_EQ(q(2, 3), 0.5 + 3.0);

  write_text(dir / "short.csv", "t,x,value\n0,0,1\n");
  EXPECT_THROW(read_tabulated_csv(dir / "short.csv", g, true), InputError);
  write_text(dir / "off.csv", "0,0.05,1\n");
  EXPECT_THROW(read_tabulated_csv(dir / "off.csv", g, true), InputError);
}

TEST(Manifest, BlobHashMatchesGit) {
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Manifest, InputHashTracksInputsOnly) {
  const fs::path dir = scratch("hash");
  const SpaceTimeGrid g(0.0, 1.0, 21, 21);
  write_tabulated(dir / "rho0.csv", g, [](double, double) { return 1.0; },
                  true);
  write_tabulated(dir / "q.csv", g,
                  [](double t, double) { return 0.2 * t; }, false);
  write_text(dir / "a.ini",
             "[grid]\nnx = 21\nnt = 21\n"
             "[marginals]\nrho0_csv = rho0.csv\nq_csv = q.csv\n");
  const RunConfig a = load_config(dir / "a.ini");
  const std::string h0 = input_hash(a);
  EXPECT_EQ(input_hash(load_config(dir / "a.ini")), h0);

  RunConfig moved = a;
  moved.posterior_dir = dir / "elsewhere";
  EXPECT_EQ(input_hash(moved), h0);

  RunConfig finer = a;
  finer.nx = 41;
  EXPECT_NE(input_hash(finer), h0);

  write_tabulated(dir / "q.csv", g,
                  [](double t, double) { return 0.2 * t + 1e-12; }, false);
  EXPECT_NE(input_hash(a), h0);
}

TEST(CheckKernel, DefectAgainstBound) {
  RunConfig cfg = small_example();
  const fs::path dir = scratch("check");
  const Outcome ok = run(cmd_check_kernel, cfg, dir);
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "survivor_mass.csv"));

  cfg.defect_bound = 0.0;
  const Outcome fail = run(cmd_check_kernel, cfg, scratch("check_fail"));
  EXPECT_EQ(fail.code, kExitNonConvergence);
  EXPECT_NE(fail.out.find("FAIL"), std::string::npos);
}

TEST(OracleCompare, RandomAndGridModes) {
  RunConfig cfg = preset_config(kExamplePreset);
  const fs::path dir = scratch("oracle");
  const Outcome r = run(cmd_oracle_compare, cfg, dir);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const nlohmann::json j = read_json(dir / "oracle.json");
  EXPECT_LT(j["fs_ipf_gap"].get<double>(), 1e-8);

  cfg.oracle_mode = "grid";
  cfg.nx = 5;
  cfg.nt = 7;
  const fs::path gdir = scratch("oracle_grid");
  const Outcome g = run(cmd_oracle_compare, cfg, gdir);
  ASSERT_EQ(g.code, kExitOk) << g.err;
  EXPECT_LT(read_json(gdir / "oracle.json")["continuous_ipf_gap"].get<double>(),
            5e-3);

  cfg.coupling_budget = 10;
  EXPECT_EQ(run(cmd_oracle_compare, cfg, scratch("oracle_budget")).code,
            kExitInput);
}

TEST(Simulate, PosteriorNeedsSolveArtifacts) {
  RunConfig cfg = small_example();
  cfg.particles = 2000;
  const fs::path dir = scratch("simulate");
  const Outcome missing = run(cmd_simulate, cfg, dir);
  EXPECT_EQ(missing.code, kExitInput);
  EXPECT_NE(missing.err.find("drift_correction.csv"), std::string::npos);

  ASSERT_EQ(run(cmd_solve, cfg, dir).code, kExitOk);
  const Outcome r = run(cmd_simulate, cfg, dir);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const nlohmann::json s = read_json(dir / "stats.json");
  EXPECT_EQ(s["particles"], 2000);
  EXPECT_LT(std::abs(s["z_score"].get<double>()), 4.0);
  EXPECT_TRUE(fs::exists(dir / "killed_hist.csv"));
  EXPECT_TRUE(fs::exists(dir / "survivors.csv"));

  // Same seed, same output.
  const std::string first = read_text(dir / "killed_hist.csv");
  ASSERT_EQ(run(cmd_simulate, cfg, dir).code, kExitOk);
  EXPECT_EQ(read_text(dir / "killed_hist.csv"), first);
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(KBRIDGE_CLI_BINARY) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ArgumentHandling) {
  const fs::path dir = scratch("binary");
  const std::string out = " --out " + dir.string();
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("solve --help"), 0);
  EXPECT_EQ(run_binary(""), kExitInput);
  EXPECT_EQ(run_binary("solve" + out), kExitInput);
  EXPECT_EQ(run_binary("solve --preset paper-example --config x.ini" + out),
            kExitInput);
  EXPECT_EQ(run_binary("solve --preset nope" + out), kExitInput);
  EXPECT_EQ(run_binary("solve --preset paper-example --nx 1" + out),
            kExitInput);
  EXPECT_EQ(run_binary("solve --preset paper-example --nx 41 --nt 41" + out),
            kExitOk);
  EXPECT_EQ(run_binary("solve --preset paper-example --nx 41 --nt 41 "
                       "--max-iter 1" + out),
            kExitNonConvergence);
  EXPECT_EQ(read_json(dir / "manifest.json")["config"]["solver"]["max_iter"],
            1);
}

}  // namespace
}  // namespace kbridge::cli
