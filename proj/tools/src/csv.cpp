#include "kbridge/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kbridge/error.hpp"

namespace kbridge::cli {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && end == s.data() + s.size();
}

double parse_or_throw(const std::string& s, const std::filesystem::path& path,
                      std::size_t line) {
  double v = 0.0;
  if (!parse_double(s, v)) {
    throw InputError(path.string() + ":" + std::to_string(line) +
                     ": not a number: '" + s + "'");
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

// Node index of value on a uniform axis, or npos when off the nodes.
std::size_t node_of(double value, double origin, double step, std::size_t n) {
  const double s = (value - origin) / step;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-6 || r < 0.0 || r >= static_cast<double>(n)) {
    return static_cast<std::size_t>(-1);
  }
  return static_cast<std::size_t>(r);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_field_csv(const std::filesystem::path& path,
                     const SpaceTimeField& field, const SpaceTimeGrid& grid) {
  require_shape(field, grid, "write_field_csv");
  std::ofstream out = open_out(path);
  out << "k,t";
  for (std::size_t i = 0; i < grid.nx(); ++i) out << ',' << format_double(grid.x(i));
  out << '\n';
  for (std::size_t k = 0; k < grid.nt(); ++k) {
    out << k << ',' << format_double(grid.t(k));
    for (double v : field.row(k)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw InputError("write failed: " + path.string());
}

FieldTable read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "k" || header[1] != "t") {
    throw InputError(path.string() + ":1: expected header k,t,<x values>");
  }
  FieldTable table;
  for (std::size_t c = 2; c < header.size(); ++c) {
    table.x.push_back(parse_or_throw(header[c], path, 1));
  }
  std::vector<double> values;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw InputError(path.string() + ":" + std::to_string(n) +
                       ": expected " + std::to_string(header.size()) +
                       " columns");
    }
    table.t.push_back(parse_or_throw(cells[1], path, n));
    for (std::size_t c = 2; c < cells.size(); ++c) {
      values.push_back(parse_or_throw(cells[c], path, n));
    }
  }
  table.values = SpaceTimeField(table.t.size(), table.x.size());
  table.values.values() = std::move(values);
  return table;
}

SpaceTimeField read_field_csv(const std::filesystem::path& path,
                              const SpaceTimeGrid& grid) {
  FieldTable table = read_field_csv(path);
  bool ok = table.t.size() == grid.nt() && table.x.size() == grid.nx();
  for (std::size_t k = 0; ok && k < grid.nt(); ++k) {
    ok = std::abs(table.t[k] - grid.t(k)) <= 1e-12;
  }
  const double scale = std::max(1.0, std::abs(grid.x_max() - grid.x_min()));
  for (std::size_t i = 0; ok && i < grid.nx(); ++i) {
    ok = std::abs(table.x[i] - grid.x(i)) <= 1e-12 * scale;
  }
  if (!ok) {
    throw InputError(path.string() + ": nodes do not match the configured grid");
  }
  return std::move(table.values);
}

void write_scalar_csv(const std::filesystem::path& path,
                      const ScalarField& field, const SpaceTimeGrid& grid,
                      const std::string& name) {
  require_shape(field, grid, "write_scalar_csv");
  std::ofstream out = open_out(path);
  out << "i,x," << name << '\n';
  for (std::size_t i = 0; i < grid.nx(); ++i) {
    out << i << ',' << format_double(grid.x(i)) << ','
        << format_double(field[i]) << '\n';
  }
  if (!out) throw InputError("write failed: " + path.string());
}

SpaceTimeField read_tabulated_csv(const std::filesystem::path& path,
                                  const SpaceTimeGrid& grid,
                                  bool initial_only) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  SpaceTimeField field(grid);
  std::vector<std::uint8_t> seen(grid.nt() * grid.nx(), 0);
  std::size_t rows = 0;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto cells = split(line);
    if (cells.empty() || (cells.size() == 1 && cells[0].empty())) continue;
    double probe = 0.0;
    if (n == 1 && !parse_double(cells[0], probe)) continue;  // header
    const std::string where = path.string() + ":" + std::to_string(n) + ": ";
    if (cells.size() != 3) throw InputError(where + "expected t,x,value");
    const double t = parse_or_throw(cells[0], path, n);
    const double x = parse_or_throw(cells[1], path, n);
    const double v = parse_or_throw(cells[2], path, n);
    const std::size_t k = node_of(t, 0.0, grid.dt(), grid.nt());
    const std::size_t i = node_of(x, grid.x_min(), grid.dx(), grid.nx());
    if (k == static_cast<std::size_t>(-1) || i == static_cast<std::size_t>(-1)) {
      throw InputError(where + "(t, x) = (" + cells[0] + ", " + cells[1] +
                       ") is not a grid node");
    }
    if (initial_only && k != 0) throw InputError(where + "expected t = 0");
    if (seen[k * grid.nx() + i]) throw InputError(where + "duplicate node");
    seen[k * grid.nx() + i] = 1;
    field(k, i) = v;
    ++rows;
  }
  const std::size_t want = initial_only ? grid.nx() : grid.nx() * grid.nt();
  if (rows != want) {
    throw InputError(path.string() + ": expected " + std::to_string(want) +
                     " rows (one per grid node), found " +
                     std::to_string(rows));
  }
  return field;
}

}  // namespace kbridge::cli
