#ifndef INVLMP_GRID_HPP_
#define INVLMP_GRID_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlmp/lp.hpp"

namespace invlmp {

/// Branch between two buses. Positive flow runs from `from` to `to`.
struct Line {
  int from = 0;
  int to = 0;
  double reactance = 0.0;  // p.u.
  double limit = 0.0;      // MW
};

struct Generator {
  std::string name;
  int bus = 0;
  double x_min = 0.0;  // MW
  double x_max = 0.0;  // MW
};

/// Static network. Bus indices are zero-based in memory and one-based on disk.
struct Grid {
  std::string name;
  int n_buses = 0;
  int reference_bus = 0;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  /// Nominal per-bus net load, MW. Used as the base shape for load scenarios.
  Vector base_load;
  /// l x m; flows = ptdf * injections for balanced injections.
  Matrix ptdf;

  int n_lines() const { return static_cast<int>(lines.size()); }
  int n_gens() const { return static_cast<int>(generators.size()); }

  /// m x n generator-to-bus incidence (exactly one 1 per column).
  Matrix gen_bus_incidence() const;
  Vector line_limits() const;
  Vector gen_max() const;
  Vector gen_min() const;

  /// Throws InputError naming the offending field.
  void validate() const;
};

/// DC power transfer distribution factors. Column `reference_bus` is zero.
/// Throws InputError when the network is disconnected or a reactance is not
/// positive.
Matrix compute_ptdf(int n_buses, const std::vector<Line>& lines, int reference_bus);

/// Fills grid.ptdf from its lines.
void refresh_ptdf(Grid& grid);

Grid load_grid(const std::filesystem::path& path);
void save_grid(const Grid& grid, const std::filesystem::path& path);
Grid grid_from_json_text(const std::string& text);
std::string grid_to_json_text(const Grid& grid);

/// FNV-1a over the canonical JSON text; stable across platforms.
std::uint64_t grid_hash(const Grid& grid);
std::uint64_t fnv1a64(const std::string& bytes);

/// IEEE 14-bus network with five 100 MW generators at buses 1, 2, 3, 6, 8.
Grid ieee14();

/// Random connected network on a unit square: a nearest-neighbour spanning
/// tree plus short extra branches. Generators are placed on distinct buses.
struct SyntheticGridOptions {
  int n_buses = 100;
  int n_gens = 20;
  double extra_line_ratio = 0.45;
  /// x_min as a fraction of x_max.
  double min_output = 0.0;
  std::uint64_t seed = 1;
};
Grid synthetic_grid(const SyntheticGridOptions& options);

}  // namespace invlmp

#endif  // INVLMP_GRID_HPP_
