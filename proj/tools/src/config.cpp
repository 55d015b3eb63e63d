#include "kbridge/cli/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kbridge/cli/csv.hpp"
#include "kbridge/presets.hpp"

namespace kbridge::cli {
namespace {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"grid", {"x_min", "x_max", "nx", "nt"}},
      {"prior",
       {"preset", "drift", "sigma", "killing", "drift_csv", "sigma_csv",
        "killing_csv"}},
      {"marginals", {"preset", "rho0_csv", "q_csv"}},
      {"solver",
       {"tol", "max_iter", "eps_div", "initial_phi0", "normalization"}},
      {"simulate",
       {"particles", "seed", "dynamics", "substeps", "posterior_dir"}},
      {"oracle", {"mode", "states", "steps", "seed", "coupling_budget"}},
      {"check", {"defect_bound"}},
  };
  return keys;
}

// Line number of each "section.key" in the file, for diagnostics.
std::map<std::string, std::size_t> key_lines(const fs::path& path) {
  std::map<std::string, std::size_t> lines;
  std::ifstream in(path);
  std::string line;
  std::string section;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      section = line.substr(first + 1, close - first - 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(first, eq - first);
    key.erase(key.find_last_not_of(" \t") + 1);
    lines[section + "." + key] = n;
  }
  return lines;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, fs::path path)
      : tree_(tree), path_(std::move(path)), lines_(key_lines(path_)) {}

  [[noreturn]] void fail(const std::string& field,
                         const std::string& what) const {
    std::string where = path_.string();
    if (auto it = lines_.find(field); it != lines_.end()) {
      where += ":" + std::to_string(it->second);
    }
    throw ConfigError(where + ": " + field + ": " + what);
  }

  std::optional<std::string> text(const std::string& field) const {
    if (auto v = tree_.get_optional<std::string>(field)) {
      std::string s = *v;
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    }
    return std::nullopt;
  }

  void real(const std::string& field, double& out) const {
    const auto s = text(field);
    if (!s) return;
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || end != s->data() + s->size() || !std::isfinite(v)) {
      fail(field, "expected a finite number, got '" + *s + "'");
    }
    out = v;
  }

  template <typename Int>
  void integer(const std::string& field, Int& out, Int min_value) const {
    const auto s = text(field);
    if (!s) return;
    Int v = 0;
    const auto [end, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || end != s->data() + s->size() || v < min_value) {
      fail(field, "expected an integer >= " + std::to_string(min_value) +
                      ", got '" + *s + "'");
    }
    out = v;
  }

  void path(const std::string& field, fs::path& out) const {
    const auto s = text(field);
    if (!s) return;
    if (s->empty()) fail(field, "empty path");
    fs::path p(*s);
    if (p.is_relative()) p = path_.parent_path() / p;
    out = p;
  }

 private:
  const pt::ptree& tree_;
  fs::path path_;
  std::map<std::string, std::size_t> lines_;
};

void check_keys(const pt::ptree& tree, const Reader& reader) {
  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) reader.fail(section, "key outside of a section");
    auto it = keys.find(section);
    if (it == keys.end()) {
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) {
        reader.fail(section + "." + key, "unknown key");
      }
    }
  }
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

const char* dynamics_name(Dynamics d) {
  return d == Dynamics::kPrior ? "prior" : "posterior";
}

PriorSpec constant_or_table(const RunConfig& cfg, const SpaceTimeGrid& grid) {
  auto field = [&](const FieldSource& src) {
    return src.csv.empty() ? SpaceTimeField(grid, src.constant)
                           : read_tabulated_csv(src.csv, grid);
  };
  if (cfg.drift.csv.empty() && cfg.sigma.csv.empty() && cfg.killing.csv.empty()) {
    return constant_prior(cfg.drift.constant, cfg.sigma.constant,
                          cfg.killing.constant);
  }
  return tabulated_prior(field(cfg.drift), field(cfg.sigma),
                         field(cfg.killing), grid);
}

}  // namespace

RunConfig preset_config(const std::string& name) {
  if (name != kExamplePreset) {
    throw ConfigError("unknown preset '" + name + "' (known: " +
                      std::string(kExamplePreset) + ")");
  }
  return RunConfig{};
}

RunConfig load_config(const fs::path& path) {
  pt::ptree tree;
  {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " +
                        e.message());
    }
  }
  const Reader r(tree, path);
  check_keys(tree, r);

  RunConfig cfg;
  cfg.source = path;

  r.real("grid.x_min", cfg.x_min);
  r.real("grid.x_max", cfg.x_max);
  r.integer<std::size_t>("grid.nx", cfg.nx, 3);
  r.integer<std::size_t>("grid.nt", cfg.nt, 2);
  if (!(cfg.x_max > cfg.x_min)) r.fail("grid.x_max", "must exceed x_min");

  // A file that names any coefficient opts out of the preset prior.
  const bool custom_prior =
      r.text("prior.drift") || r.text("prior.sigma") || r.text("prior.killing") ||
      r.text("prior.drift_csv") || r.text("prior.sigma_csv") ||
      r.text("prior.killing_csv");
  if (auto p = r.text("prior.preset")) {
    if (custom_prior) r.fail("prior.preset", "cannot combine with coefficients");
    if (*p != kExamplePreset) r.fail("prior.preset", "unknown preset '" + *p + "'");
  } else if (custom_prior) {
    cfg.prior_preset.clear();
    r.real("prior.drift", cfg.drift.constant);
    r.real("prior.sigma", cfg.sigma.constant);
    r.real("prior.killing", cfg.killing.constant);
    r.path("prior.drift_csv", cfg.drift.csv);
    r.path("prior.sigma_csv", cfg.sigma.csv);
    r.path("prior.killing_csv", cfg.killing.csv);
  }

  const bool custom_marginals =
      r.text("marginals.rho0_csv") || r.text("marginals.q_csv");
  if (auto p = r.text("marginals.preset")) {
    if (custom_marginals) {
      r.fail("marginals.preset", "cannot combine with rho0_csv / q_csv");
    }
    if (*p != kExamplePreset) {
      r.fail("marginals.preset", "unknown preset '" + *p + "'");
    }
  } else if (custom_marginals) {
    cfg.marginals_preset.clear();
    r.path("marginals.rho0_csv", cfg.rho0_csv);
    r.path("marginals.q_csv", cfg.q_csv);
    if (cfg.rho0_csv.empty()) r.fail("marginals.rho0_csv", "required");
  }

  r.real("solver.tol", cfg.solver.tol_hilbert);
  if (!(cfg.solver.tol_hilbert > 0.0)) r.fail("solver.tol", "must be > 0");
  r.integer<std::size_t>("solver.max_iter", cfg.solver.max_iter, 1);
  r.real("solver.eps_div", cfg.solver.eps_div);
  r.real("solver.initial_phi0", cfg.solver.initial_phi0);
  if (!(cfg.solver.initial_phi0 > 0.0)) {
    r.fail("solver.initial_phi0", "must be > 0");
  }
  if (auto n = r.text("solver.normalization")) {
    if (*n == "max-phi0") {
      cfg.solver.normalization = GaugeConvention::kMaxPhi0OnSupport;
    } else if (*n == "none") {
      cfg.solver.normalization = GaugeConvention::kNone;
    } else {
      r.fail("solver.normalization", "expected max-phi0 or none");
    }
  }

  r.integer<std::size_t>("simulate.particles", cfg.particles, 1);
  r.integer<std::uint64_t>("simulate.seed", cfg.seed, 0);
  r.integer<std::size_t>("simulate.substeps", cfg.substeps, 1);
  if (auto d = r.text("simulate.dynamics")) {
    const std::string v = lower(*d);
    if (v == "prior") {
      cfg.dynamics = Dynamics::kPrior;
    } else if (v == "posterior") {
      cfg.dynamics = Dynamics::kPosterior;
    } else {
      r.fail("simulate.dynamics", "expected prior or posterior");
    }
  }
  r.path("simulate.posterior_dir", cfg.posterior_dir);

  if (auto m = r.text("oracle.mode")) {
    if (*m != "random" && *m != "grid") {
      r.fail("oracle.mode", "expected random or grid");
    }
    cfg.oracle_mode = *m;
  }
  r.integer<std::size_t>("oracle.states", cfg.oracle_states, 1);
  r.integer<std::size_t>("oracle.steps", cfg.oracle_steps, 1);
  r.integer<std::uint64_t>("oracle.seed", cfg.oracle_seed, 0);
  r.integer<std::size_t>("oracle.coupling_budget", cfg.coupling_budget, 1);

  r.real("check.defect_bound", cfg.defect_bound);
  if (!(cfg.defect_bound > 0.0)) r.fail("check.defect_bound", "must be > 0");
  return cfg;
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.nx) {
    if (*o.nx < 3) throw ConfigError("--nx must be >= 3");
    cfg.nx = *o.nx;
  }
  if (o.nt) {
    if (*o.nt < 2) throw ConfigError("--nt must be >= 2");
    cfg.nt = *o.nt;
  }
  if (o.tol) {
    if (!(*o.tol > 0.0)) throw ConfigError("--tol must be > 0");
    cfg.solver.tol_hilbert = *o.tol;
  }
  if (o.max_iter) {
    if (*o.max_iter < 1) throw ConfigError("--max-iter must be >= 1");
    cfg.solver.max_iter = *o.max_iter;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.particles) {
    if (*o.particles < 1) throw ConfigError("--particles must be >= 1");
    cfg.particles = *o.particles;
  }
}

nlohmann::json to_json(const RunConfig& cfg) {
  auto source = [](const FieldSource& s) {
    return s.csv.empty() ? nlohmann::json(s.constant)
                         : nlohmann::json(s.csv.string());
  };
  nlohmann::json j;
  j["grid"] = {{"x_min", cfg.x_min}, {"x_max", cfg.x_max}, {"nx", cfg.nx},
               {"nt", cfg.nt}};
  if (cfg.prior_preset.empty()) {
    j["prior"] = {{"drift", source(cfg.drift)},
                  {"sigma", source(cfg.sigma)},
                  {"killing", source(cfg.killing)}};
  } else {
    j["prior"] = {{"preset", cfg.prior_preset}};
  }
  if (cfg.marginals_preset.empty()) {
    j["marginals"] = {{"rho0_csv", cfg.rho0_csv.string()},
                      {"q_csv", cfg.q_csv.string()}};
  } else {
    j["marginals"] = {{"preset", cfg.marginals_preset}};
  }
  j["solver"] = {
      {"tol", cfg.solver.tol_hilbert},
      {"max_iter", cfg.solver.max_iter},
      {"eps_div", cfg.solver.eps_div},
      {"initial_phi0", cfg.solver.initial_phi0},
      {"normalization", cfg.solver.normalization == GaugeConvention::kNone
                            ? "none"
                            : "max-phi0"}};
  j["simulate"] = {{"particles", cfg.particles},
                   {"seed", cfg.seed},
                   {"dynamics", dynamics_name(cfg.dynamics)},
                   {"substeps", cfg.substeps},
                   {"posterior_dir", cfg.posterior_dir.string()}};
  j["oracle"] = {{"mode", cfg.oracle_mode},
                 {"states", cfg.oracle_states},
                 {"steps", cfg.oracle_steps},
                 {"seed", cfg.oracle_seed},
                 {"coupling_budget", cfg.coupling_budget}};
  j["check"] = {{"defect_bound", cfg.defect_bound}};
  return j;
}

SpaceTimeGrid make_grid(const RunConfig& cfg) {
  return SpaceTimeGrid(cfg.x_min, cfg.x_max, cfg.nx, cfg.nt);
}

PriorSpec make_prior(const RunConfig& cfg, const SpaceTimeGrid& grid) {
  if (!cfg.prior_preset.empty()) return presets::example_prior();
  return constant_or_table(cfg, grid);
}

ProblemSpec make_problem(const RunConfig& cfg) {
  const SpaceTimeGrid grid = make_grid(cfg);
  PriorSpec prior = make_prior(cfg, grid);
  if (!cfg.marginals_preset.empty()) {
    ProblemSpec p = presets::example_problem(grid);
    return kbridge::make_problem(std::move(prior), grid, std::move(p.rho0),
                                 std::move(p.Q));
  }
  const SpaceTimeField rho0_table = read_tabulated_csv(cfg.rho0_csv, grid, true);
  const auto row0 = rho0_table.row(0);
  ScalarField rho0(row0.begin(), row0.end());
  SpaceTimeField q = cfg.q_csv.empty() ? SpaceTimeField(grid)
                                       : read_tabulated_csv(cfg.q_csv, grid);
  return kbridge::make_problem(std::move(prior), grid, std::move(rho0),
                               std::move(q));
}

}  // namespace kbridge::cli
