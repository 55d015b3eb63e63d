#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kbridge/cli/commands.hpp"

namespace {

using kbridge::cli::CommandContext;

struct Options {
  std::string preset;
  std::string config;
  std::string out = "kbridge-out";
  kbridge::cli::Overrides overrides;
};

// Parsed values; copied into Overrides only for flags that were given.
struct RawOverrides {
  std::size_t nx = 0, nt = 0, max_iter = 0, particles = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Options& o, RawOverrides& raw) {
  auto* preset = sub->add_option("--preset", o.preset, "built-in problem");
  auto* config = sub->add_option("--config", o.config, "INI config file");
  preset->excludes(config);
  config->excludes(preset);
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--nx", raw.nx, "space nodes")->check(CLI::Range(3, 1 << 24));
  sub->add_option("--nt", raw.nt, "time nodes")->check(CLI::Range(2, 1 << 24));
  sub->add_option("--tol", raw.tol, "Hilbert-metric stop threshold")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", raw.max_iter, "sweep limit")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", raw.seed, "particle seed");
  sub->add_option("--particles", raw.particles, "particle count")
      ->check(CLI::PositiveNumber);
}

void collect(CLI::App* sub, const RawOverrides& raw, Options& o) {
  auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (given("--nx")) o.overrides.nx = raw.nx;
  if (given("--nt")) o.overrides.nt = raw.nt;
  if (given("--tol")) o.overrides.tol = raw.tol;
  if (given("--max-iter")) o.overrides.max_iter = raw.max_iter;
  if (given("--seed")) o.overrides.seed = raw.seed;
  if (given("--particles")) o.overrides.particles = raw.particles;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schroedinger bridges with killing on a space-time grid"};
  app.require_subcommand(1);

  Options opts;
  RawOverrides raw;
  using Body = int (*)(const CommandContext&);
  struct Sub {
    const char* name;
    const char* help;
    Body body;
    CLI::App* app = nullptr;
  };
  Sub subs[] = {
      {"solve", "solve the bridge and write posterior fields",
       kbridge::cli::cmd_solve},
      {"check-kernel", "check prior mass conservation",
       kbridge::cli::cmd_check_kernel},
      {"oracle-compare", "compare discrete Fortet-Sinkhorn with IPF",
       kbridge::cli::cmd_oracle_compare},
      {"simulate", "run prior or posterior particles",
       kbridge::cli::cmd_simulate},
  };
  for (Sub& s : subs) {
    s.app = app.add_subcommand(s.name, s.help);
    add_common(s.app, opts, raw);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kbridge::cli::kExitInput;
  }

  const Sub* chosen = nullptr;
  for (const Sub& s : subs) {
    if (s.app->parsed()) chosen = &s;
  }
  collect(chosen->app, raw, opts);

  if (opts.preset.empty() && opts.config.empty()) {
    std::cerr << "error: one of --preset or --config is required\n";
    return kbridge::cli::kExitInput;
  }

  CommandContext ctx{{}, opts.out, std::cout, std::cerr};
  return kbridge::cli::run_guarded(ctx, [&](const CommandContext& c) {
    CommandContext run{opts.config.empty()
                           ? kbridge::cli::preset_config(opts.preset)
                           : kbridge::cli::load_config(opts.config),
                       c.out_dir, c.out, c.err};
    kbridge::cli::apply_overrides(run.config, opts.overrides);
    return chosen->body(run);
  });
}
