#ifndef KBRIDGE_CLI_CONFIG_HPP_
#define KBRIDGE_CLI_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "kbridge/error.hpp"
#include "kbridge/particle.hpp"
#include "kbridge/sinkhorn.hpp"

namespace kbridge::cli {

inline constexpr const char* kExamplePreset = "paper-example";

// Malformed config text or value; message carries line or field context.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

// One coefficient of the prior: a constant or a tabulated CSV file.
struct FieldSource {
  double constant = 0.0;
  std::filesystem::path csv;  // empty: use constant
};

struct RunConfig {
  std::filesystem::path source;  // config file, empty for presets/defaults

  // [grid]
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t nx = 201;
  std::size_t nt = 301;

  // [prior]
  std::string prior_preset = kExamplePreset;  // empty: use the sources below
  FieldSource drift{0.0, {}};
  FieldSource sigma{0.25, {}};
  FieldSource killing{0.3, {}};

  // [marginals]
  std::string marginals_preset = kExamplePreset;
  std::filesystem::path rho0_csv;
  std::filesystem::path q_csv;

  // [solver]
  SolverConfig solver;

  // [simulate]
  std::size_t particles = 100'000;
  std::uint64_t seed = 20240521;
  Dynamics dynamics = Dynamics::kPosterior;
  std::size_t substeps = 8;
  std::filesystem::path posterior_dir;  // empty: the output directory

  // [oracle]
  std::string oracle_mode = "random";  // random | grid
  std::size_t oracle_states = 5;
  std::size_t oracle_steps = 6;
  std::uint64_t oracle_seed = 7;
  std::size_t coupling_budget = 20'000'000;

  // [check]
  double defect_bound = 1e-6;
};

// Command-line overrides applied after the file.
struct Overrides {
  std::optional<std::string> preset;
  std::optional<std::size_t> nx;
  std::optional<std::size_t> nt;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
};

// Parses an INI-style file with sections [grid], [prior], [marginals],
// [solver], [simulate], [oracle], [check]. Relative CSV paths resolve
// against the file's directory. Throws ConfigError with line or
// section.key context.
RunConfig load_config(const std::filesystem::path& path);

// Built-in problem by name; throws ConfigError for unknown names.
RunConfig preset_config(const std::string& name);

void apply_overrides(RunConfig& cfg, const Overrides& o);

// Resolved configuration as JSON (manifest echo and hash input).
nlohmann::json to_json(const RunConfig& cfg);

SpaceTimeGrid make_grid(const RunConfig& cfg);
PriorSpec make_prior(const RunConfig& cfg, const SpaceTimeGrid& grid);
ProblemSpec make_problem(const RunConfig& cfg);

}  // namespace kbridge::cli

#endif  // KBRIDGE_CLI_CONFIG_HPP_
