#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eegemd {

/// Grid cell in the projected montage plane. Row 0 is the front of the head,
/// column 0 the subject's left.
struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct Electrode {
  std::string name;
  Cell cell;
};

/// Case- and padding-insensitive key for 10-10 labels, so that PhysioNet's
/// "Fc5." and "FC5" refer to the same electrode.
std::string channel_key(std::string_view name);

/// Electrode registry projected onto an n x n grid. Immutable once built.
class GridLayout {
 public:
  GridLayout(int n, std::vector<Electrode> electrodes);

  int n() const { return n_; }
  const std::vector<Electrode>& electrodes() const { return electrodes_; }
  size_t size() const { return electrodes_.size(); }

  std::optional<size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }
  /// Throws invalid_input for unknown names.
  const Electrode& at(std::string_view name) const;

 private:
  int n_;
  std::vector<Electrode> electrodes_;
  std::unordered_map<std::string, size_t> name_index_;
};

/// Parses `NAME,row,col` records (`#` comments, blank lines ignored). An
/// optional `grid,N` record sets the grid order; otherwise `default_n`.
GridLayout load_grid_layout(std::string_view content, int default_n = 11);
GridLayout load_grid_layout_file(const std::filesystem::path& path, int default_n = 11);

/// Nonnegative mass over an n x n grid, row-major.
class SpatialMap {
 public:
  explicit SpatialMap(int n);
  SpatialMap(int n, std::vector<double> mass);

  int n() const { return n_; }
  double at(int row, int col) const { return mass_[index(row, col)]; }
  double at(Cell c) const { return at(c.row, c.col); }
  void set(Cell c, double value);
  void add(Cell c, double value);

  const std::vector<double>& mass() const { return mass_; }
  double total() const;
  SpatialMap scaled(double factor) const;

  friend bool operator==(const SpatialMap&, const SpatialMap&) = default;

 private:
  size_t index(int row, int col) const;

  int n_;
  std::vector<double> mass_;
};

/// Mass 1 at each named electrode. Repeated names count once.
SpatialMap binary_map(const std::vector<std::string>& channels, const GridLayout& layout);
SpatialMap weighted_map(const std::map<std::string, double>& weights, const GridLayout& layout);

/// n rows of n comma-separated masses.
SpatialMap parse_spatial_map_csv(std::string_view content);
std::string to_csv(const SpatialMap& map);

}  // namespace eegemd
