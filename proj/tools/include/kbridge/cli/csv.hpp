#ifndef KBRIDGE_CLI_CSV_HPP_
#define KBRIDGE_CLI_CSV_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "kbridge/grid.hpp"

namespace kbridge::cli {

// %.17g, enough digits to round-trip any double.
std::string format_double(double v);

// Space-time field, one row per time node:
//   k,t,<x_0>,<x_1>,...
//   0,0,<f(0, x_0)>,...
void write_field_csv(const std::filesystem::path& path,
                     const SpaceTimeField& field, const SpaceTimeGrid& grid);

struct FieldTable {
  std::vector<double> t;
  std::vector<double> x;
  SpaceTimeField values;
};

FieldTable read_field_csv(const std::filesystem::path& path);

// Reads a field written by write_field_csv and checks that its nodes are
// those of grid. Throws InputError otherwise.
SpaceTimeField read_field_csv(const std::filesystem::path& path,
                              const SpaceTimeGrid& grid);

// Snapshot in space:  i,x,<name>
void write_scalar_csv(const std::filesystem::path& path,
                      const ScalarField& field, const SpaceTimeGrid& grid,
                      const std::string& name);

// Long-format input table with columns t,x,value (optional header line),
// one row per grid node. With initial_only every row must have t = 0 and
// only row 0 of the result is filled.
SpaceTimeField read_tabulated_csv(const std::filesystem::path& path,
                                  const SpaceTimeGrid& grid,
                                  bool initial_only = false);

}  // namespace kbridge::cli

#endif  // KBRIDGE_CLI_CSV_HPP_
