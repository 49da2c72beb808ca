#include "eegemd/montage.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "eegemd/error.hpp"
#include "eegemd/text_io.hpp"

namespace eegemd {

std::string channel_key(std::string_view name) {
  std::string t = trim(name);
  while (!t.empty() && (t.back() == '.' || t.back() == ' ')) t.pop_back();
  return to_lower(t);
}

GridLayout::GridLayout(int n, std::vector<Electrode> electrodes)
    : n_(n), electrodes_(std::move(electrodes)) {
  if (n_ <= 0) throw invalid_input("grid order must be positive");
  std::set<std::pair<int, int>> cells;
  for (size_t i = 0; i < electrodes_.size(); ++i) {
    const Electrode& e = electrodes_[i];
    if (e.name.empty()) throw invalid_input("empty electrode name");
    if (e.cell.row < 0 || e.cell.col < 0 || e.cell.row >= n_ || e.cell.col >= n_) {
      throw invalid_input("electrode " + e.name + " at (" + std::to_string(e.cell.row) + "," +
                          std::to_string(e.cell.col) + ") outside " + std::to_string(n_) + "x" +
                          std::to_string(n_) + " grid");
    }
    if (!name_index_.emplace(channel_key(e.name), i).second) {
      throw invalid_input("duplicate electrode name " + e.name);
    }
    if (!cells.emplace(e.cell.row, e.cell.col).second) {
      throw invalid_input("duplicate cell (" + std::to_string(e.cell.row) + "," +
                          std::to_string(e.cell.col) + ") for " + e.name);
    }
  }
}

std::optional<size_t> GridLayout::index_of(std::string_view name) const {
  auto it = name_index_.find(channel_key(name));
  if (it == name_index_.end()) return std::nullopt;
  return it->second;
}

const Electrode& GridLayout::at(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw invalid_input("unknown electrode '" + std::string(name) + "'");
  return electrodes_[*idx];
}

GridLayout load_grid_layout(std::string_view content, int default_n) {
  int n = default_n;
  std::vector<Electrode> electrodes;
  int line_no = 0;
  for (const std::string& raw : split(content, '\n')) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const std::string where = "layout line " + std::to_string(line_no);
    try {
      if (fields.size() == 2 && to_lower(trim(fields[0])) == "grid") {
        if (!electrodes.empty()) throw invalid_input(where + ": grid record must come first");
        n = static_cast<int>(parse_long(fields[1]));
        continue;
      }
      if (fields.size() != 3) throw invalid_input(where + ": expected NAME,row,col");
      electrodes.push_back({trim(fields[0]),
                            {static_cast<int>(parse_long(fields[1])),
                             static_cast<int>(parse_long(fields[2]))}});
    } catch (const std::invalid_argument& e) {
      throw invalid_input(where + ": " + e.what());
    }
  }
  return GridLayout(n, std::move(electrodes));
}

GridLayout load_grid_layout_file(const std::filesystem::path& path, int default_n) {
  std::string content;
  try {
    content = read_text_file(path);
  } catch (const std::exception& e) {
    throw io_error(e.what());
  }
  return load_grid_layout(content, default_n);
}

SpatialMap::SpatialMap(int n) : SpatialMap(n, std::vector<double>(static_cast<size_t>(n) * n, 0.0)) {}

SpatialMap::SpatialMap(int n, std::vector<double> mass) : n_(n), mass_(std::move(mass)) {
  if (n_ <= 0) throw invalid_input("grid order must be positive");
  if (mass_.size() != static_cast<size_t>(n_) * n_) {
    throw invalid_input("spatial map needs n*n entries");
  }
  for (double m : mass_) {
    if (!std::isfinite(m) || m < 0.0) throw invalid_input("spatial map masses must be finite and >= 0");
  }
}

size_t SpatialMap::index(int row, int col) const {
  if (row < 0 || col < 0 || row >= n_ || col >= n_) throw invalid_input("cell outside grid");
  return static_cast<size_t>(row) * n_ + col;
}

void SpatialMap::set(Cell c, double value) {
  if (!std::isfinite(value) || value < 0.0) throw invalid_input("mass must be finite and >= 0");
  mass_[index(c.row, c.col)] = value;
}

void SpatialMap::add(Cell c, double value) { set(c, at(c) + value); }

double SpatialMap::total() const { return std::accumulate(mass_.begin(), mass_.end(), 0.0); }

SpatialMap SpatialMap::scaled(double factor) const {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw invalid_input("scale factor must be finite and >= 0");
  std::vector<double> m = mass_;
  for (double& v : m) v *= factor;
  return SpatialMap(n_, std::move(m));
}

SpatialMap binary_map(const std::vector<std::string>& channels, const GridLayout& layout) {
  SpatialMap map(layout.n());
  for (const std::string& name : channels) map.set(layout.at(name).cell, 1.0);
  return map;
}

SpatialMap weighted_map(const std::map<std::string, double>& weights, const GridLayout& layout) {
  SpatialMap map(layout.n());
  bool any_positive = false;
  for (const auto& [name, w] : weights) {
    const Electrode& e = layout.at(name);
    if (!std::isfinite(w) || w < 0.0) throw invalid_input("negative or non-finite weight for " + name);
    any_positive = any_positive || w > 0.0;
    map.add(e.cell, w);
  }
  if (!any_positive) throw invalid_input("weighted map needs at least one positive weight");
  return map;
}

SpatialMap parse_spatial_map_csv(std::string_view content) {
  std::vector<std::vector<double>> rows;
  for (const std::string& raw : split(content, '\n')) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    for (const std::string& f : split(line, ',')) {
      try {
        row.push_back(parse_double(f));
      } catch (const std::invalid_argument& e) {
        throw format_error(std::string("spatial map CSV: ") + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  const size_t n = rows.size();
  if (n == 0) throw format_error("spatial map CSV is empty");
  std::vector<double> mass;
  mass.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw format_error("spatial map CSV must be square");
    mass.insert(mass.end(), row.begin(), row.end());
  }
  return SpatialMap(static_cast<int>(n), std::move(mass));
}

std::string to_csv(const SpatialMap& map) {
  std::string out;
  for (int r = 0; r < map.n(); ++r) {
    for (int c = 0; c < map.n(); ++c) {
      if (c) out += ',';
      out += format_double(map.at(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace eegemd
