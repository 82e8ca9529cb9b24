#pragma once

// Precomputed steady-state sag of a tether as a function of the horizontal
// and vertical separation of its ends and of its reeled-out length. The
// planner reads the lowest cable point from it without integrating anything.

#include "stemnav/tether.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace stemnav {

struct CatenaryGrid {
  double horizontal_max_m = 20.0;
  double vertical_max_m = 10.0;
  double length_max_m = 25.0;
  double resolution_m = 1.0;

  void validate() const;
  int horizontal_nodes() const;
  int vertical_nodes() const;
  int length_nodes() const;
  std::size_t cell_count() const;

  bool operator==(const CatenaryGrid&) const = default;
};

class TableRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/**
 * @brief Grid of sag values (lower end altitude minus lowest cable point).
 *
 * Node (i, j, k) sits at horizontal separation i*res, vertical separation
 * j*res and length k*res. Nodes whose length is shorter than the end-point
 * distance hold the sag of the taut cable (length equal to that distance).
 * Queries interpolate trilinearly and never extrapolate.
 */
class CatenaryTable {
 public:
  CatenaryTable(TetherParams params, CatenaryGrid grid, RelaxOptions relax, std::vector<double> sag,
                std::vector<std::uint8_t> valid);

  /// Throws TableRangeError outside the grid or next to an invalid node.
  double sag(double horizontal, double vertical, double length) const;
  /// Z of the lowest point of the tether between a and b: min(a_z, b_z) - sag.
  double lowest_point(const Vec3& a, const Vec3& b, double length) const;

  double node_sag(int i, int j, int k) const { return sag_[index(i, j, k)]; }
  bool node_valid(int i, int j, int k) const { return valid_[index(i, j, k)] != 0; }
  /// Largest spread of node values around a query, an upper bound on the
  /// interpolation error for a quantity monotone along each grid axis.
  double cell_spread(double horizontal, double vertical, double length) const;

  const TetherParams& params() const { return params_; }
  const CatenaryGrid& grid() const { return grid_; }
  const RelaxOptions& relax_options() const { return relax_; }
  std::uint64_t hash() const { return hash_; }
  std::size_t invalid_count() const;

  void save(const std::filesystem::path& path) const;
  /// Throws std::runtime_error on a malformed file or an embedded hash that
  /// does not match the embedded parameters.
  static CatenaryTable load(const std::filesystem::path& path);

  /// Content key of a table built from these inputs.
  static std::uint64_t key(const TetherParams& params, const CatenaryGrid& grid, const RelaxOptions& relax);

 private:
  std::size_t index(int i, int j, int k) const;
  struct Cell {
    int i0, j0, k0;
    double fi, fj, fk;
  };
  Cell locate(double horizontal, double vertical, double length) const;

  TetherParams params_;
  CatenaryGrid grid_;
  RelaxOptions relax_;
  std::vector<double> sag_;
  std::vector<std::uint8_t> valid_;
  std::uint64_t hash_ = 0;
};

/// Sag of a single relaxation, the quantity stored at each node.
double relaxed_sag(double horizontal, double vertical, double length, const TetherParams& params,
                   const RelaxOptions& relax);

/// Builds every node; independent relaxations run in parallel across the
/// (horizontal, vertical) columns. Failed relaxations are marked invalid.
CatenaryTable build_catenary_table(const TetherParams& params, const CatenaryGrid& grid,
                                   const RelaxOptions& relax = {});

/// Serial reference of build_catenary_table.
CatenaryTable build_catenary_table_serial(const TetherParams& params, const CatenaryGrid& grid,
                                          const RelaxOptions& relax = {});

/// Loads "<dir>/catenary_<key>.json" when present and consistent, otherwise
/// builds and writes it. @p cache_hit reports which path was taken.
CatenaryTable load_or_build_catenary_table(const TetherParams& params, const CatenaryGrid& grid,
                                           const RelaxOptions& relax, const std::filesystem::path& dir,
                                           bool* cache_hit = nullptr);

std::filesystem::path catenary_cache_path(const std::filesystem::path& dir, std::uint64_t key);

}  // namespace stemnav
