#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "eegemd/montage.hpp"

namespace eegemd {

enum class Metric { Euclidean, Manhattan };
enum class MassMode { Raw, Normalized };

Metric parse_metric(std::string_view s);
MassMode parse_mass_mode(std::string_view s);
std::string_view to_string(Metric m);
std::string_view to_string(MassMode m);

/// Dense row-major cost of moving one unit of mass from source i to
/// destination j.
class CostMatrix {
 public:
  CostMatrix(size_t rows, size_t cols, std::vector<double> costs);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double operator()(size_t i, size_t j) const { return costs_[i * cols_ + j]; }
  const std::vector<double>& values() const { return costs_; }
  double max() const;

 private:
  size_t rows_;
  size_t cols_;
  std::vector<double> costs_;
};

CostMatrix ground_cost(std::span<const Cell> src, std::span<const Cell> dst, Metric metric);

/// Flow matrix with the marginals it was solved for.
struct TransportPlan {
  size_t n_src = 0;
  size_t n_dst = 0;
  std::vector<double> flows;  // n_src x n_dst, row-major
  std::vector<double> src_mass;
  std::vector<double> dst_mass;

  double flow(size_t i, size_t j) const { return flows[i * n_dst + j]; }
  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
};

struct TransportSolution {
  double cost = 0.0;
  TransportPlan plan;
  int pivots = 0;
};

/// Exact balanced transportation problem, solved with a primal network
/// simplex over the bipartite graph (strongly feasible spanning trees, so
/// degenerate pivots cannot cycle). Supplies and demands must be
/// nonnegative with equal totals up to rounding; zero entries are allowed.
TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  const CostMatrix& cost);

struct EMDResult {
  double distance = 0.0;
  /// Over all n*n cells of both maps (row-major cell index).
  TransportPlan plan;
};

/// Earth Mover's Distance between two maps on the same grid. Raw mode needs
/// equal totals (1e-9 relative); normalized mode compares probability
/// distributions.
EMDResult emd(const SpatialMap& p, const SpatialMap& q, Metric metric = Metric::Euclidean,
              MassMode mode = MassMode::Raw);

/// Scales both maps so each totals `target_total`.
std::pair<SpatialMap, SpatialMap> rebalance(const SpatialMap& p, const SpatialMap& q,
                                            double target_total);

}  // namespace eegemd
