#include "eegemd/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eegemd/error.hpp"
#include "eegemd/text_io.hpp"

namespace eegemd {

Metric parse_metric(std::string_view raw) {
  const std::string s = to_lower(trim(raw));
  if (s == "euclidean") return Metric::Euclidean;
  if (s == "manhattan") return Metric::Manhattan;
  throw invalid_input("unknown metric '" + std::string(raw) + "' (euclidean|manhattan)");
}

MassMode parse_mass_mode(std::string_view raw) {
  const std::string s = to_lower(trim(raw));
  if (s == "raw") return MassMode::Raw;
  if (s == "normalized") return MassMode::Normalized;
  throw invalid_input("unknown mass mode '" + std::string(raw) + "' (raw|normalized)");
}

std::string_view to_string(Metric m) { return m == Metric::Euclidean ? "euclidean" : "manhattan"; }
std::string_view to_string(MassMode m) { return m == MassMode::Raw ? "raw" : "normalized"; }

CostMatrix::CostMatrix(size_t rows, size_t cols, std::vector<double> costs)
    : rows_(rows), cols_(cols), costs_(std::move(costs)) {
  if (costs_.size() != rows_ * cols_) throw invalid_input("cost matrix size mismatch");
  for (double c : costs_) {
    if (!std::isfinite(c) || c < 0.0) throw invalid_input("costs must be finite and >= 0");
  }
}

double CostMatrix::max() const {
  return costs_.empty() ? 0.0 : *std::max_element(costs_.begin(), costs_.end());
}

CostMatrix ground_cost(std::span<const Cell> src, std::span<const Cell> dst, Metric metric) {
  if (src.empty() || dst.empty()) throw invalid_input("ground_cost needs nonempty coordinate lists");
  std::vector<double> c;
  c.reserve(src.size() * dst.size());
  for (const Cell& a : src) {
    for (const Cell& b : dst) {
      const double dr = a.row - b.row;
      const double dc = a.col - b.col;
      c.push_back(metric == Metric::Euclidean ? std::hypot(dr, dc) : std::abs(dr) + std::abs(dc));
    }
  }
  return CostMatrix(src.size(), dst.size(), std::move(c));
}

std::vector<double> TransportPlan::row_sums() const {
  std::vector<double> s(n_src, 0.0);
  for (size_t i = 0; i < n_src; ++i) {
    for (size_t j = 0; j < n_dst; ++j) s[i] += flow(i, j);
  }
  return s;
}

std::vector<double> TransportPlan::col_sums() const {
  std::vector<double> s(n_dst, 0.0);
  for (size_t i = 0; i < n_src; ++i) {
    for (size_t j = 0; j < n_dst; ++j) s[j] += flow(i, j);
  }
  return s;
}

namespace {

// Network simplex on the complete bipartite graph sources -> sinks plus an
// artificial root. Arc ids: [0, m*n) real arcs i->j; then source_i -> root;
// then root -> sink_j. Artificial arcs carry the initial basic solution and a
// big-M cost so they drain out.
class NetworkSimplex {
 public:
  NetworkSimplex(std::span<const double> supply, std::span<const double> demand,
                 const std::vector<double>& cost, size_t m, size_t n)
      : m_(m), n_(n), root_(m + n), node_count_(m + n + 1), cost_(cost) {
    const size_t arcs = m_ * n_ + m_ + n_;
    const double max_cost = cost_.empty() ? 0.0 : *std::max_element(cost_.begin(), cost_.end());
    art_cost_ = (max_cost + 1.0) * static_cast<double>(node_count_);
    eps_ = 64.0 * std::numeric_limits<double>::epsilon() * art_cost_;

    flow_.assign(arcs, 0.0);
    in_tree_.assign(arcs, 0);
    tree_arcs_.reserve(node_count_ - 1);
    // Initial strongly feasible tree: every source drains into the root and
    // the root feeds every sink. Supplies are positive, so the only
    // zero-flow tree arcs point away from the root.
    for (size_t i = 0; i < m_; ++i) {
      const size_t a = m_ * n_ + i;
      flow_[a] = supply[i];
      in_tree_[a] = 1;
      tree_arcs_.push_back(a);
    }
    for (size_t j = 0; j < n_; ++j) {
      const size_t a = m_ * n_ + m_ + j;
      flow_[a] = demand[j];
      in_tree_[a] = 1;
      tree_arcs_.push_back(a);
    }
    parent_.resize(node_count_);
    pred_.resize(node_count_);
    depth_.resize(node_count_);
    pi_.resize(node_count_);
    adj_.resize(node_count_);
  }

  int run() {
    int pivots = 0;
    const int max_pivots = 200 * static_cast<int>(m_ * n_ + node_count_) + 1000;
    rebuild_tree();
    for (;;) {
      const size_t entering = price();
      if (entering == kNone) return pivots;
      pivot(entering);
      rebuild_tree();
      if (++pivots > max_pivots) throw Error("convergence", "network simplex exceeded pivot limit");
    }
  }

  double flow(size_t i, size_t j) const { return flow_[i * n_ + j]; }

 private:
  static constexpr size_t kNone = std::numeric_limits<size_t>::max();

  size_t tail(size_t a) const {
    if (a < m_ * n_) return a / n_;
    if (a < m_ * n_ + m_) return a - m_ * n_;
    return root_;
  }
  size_t head(size_t a) const {
    if (a < m_ * n_) return m_ + a % n_;
    if (a < m_ * n_ + m_) return root_;
    return m_ + (a - m_ * n_ - m_);
  }
  double arc_cost(size_t a) const { return a < m_ * n_ ? cost_[a] : art_cost_; }

  void rebuild_tree() {
    for (auto& v : adj_) v.clear();
    for (size_t a : tree_arcs_) {
      adj_[tail(a)].push_back(a);
      adj_[head(a)].push_back(a);
    }
    std::fill(parent_.begin(), parent_.end(), kNone);
    parent_[root_] = root_;
    pred_[root_] = kNone;
    depth_[root_] = 0;
    pi_[root_] = 0.0;
    stack_.clear();
    stack_.push_back(root_);
    while (!stack_.empty()) {
      const size_t u = stack_.back();
      stack_.pop_back();
      for (size_t a : adj_[u]) {
        if (a == pred_[u]) continue;
        const bool out = tail(a) == u;
        const size_t v = out ? head(a) : tail(a);
        parent_[v] = u;
        pred_[v] = a;
        depth_[v] = depth_[u] + 1;
        // Tree arcs have zero reduced cost: c + pi[tail] - pi[head] = 0.
        pi_[v] = out ? pi_[u] + arc_cost(a) : pi_[u] - arc_cost(a);
        stack_.push_back(v);
      }
    }
  }

  // Dantzig rule: most negative reduced cost c_a + pi[tail] - pi[head].
  size_t price() const {
    size_t best = kNone;
    double best_rc = -eps_;
    const size_t arcs = flow_.size();
    for (size_t a = 0; a < arcs; ++a) {
      if (in_tree_[a]) continue;
      const double rc = arc_cost(a) + pi_[tail(a)] - pi_[head(a)];
      if (rc < best_rc) {
        best_rc = rc;
        best = a;
      }
    }
    return best;
  }

  struct CycleArc {
    size_t arc;
    bool forward;
  };

  void pivot(size_t entering) {
    const size_t u_in = tail(entering);
    const size_t v_in = head(entering);

    // Paths from both endpoints up to the apex.
    std::vector<size_t> up_u;
    std::vector<size_t> up_v;
    size_t a = u_in;
    size_t b = v_in;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        up_u.push_back(a);
        a = parent_[a];
      } else {
        up_v.push_back(b);
        b = parent_[b];
      }
    }

    // Cycle in the entering arc's direction, starting at the apex:
    // apex -> ... -> u_in, u_in -> v_in, v_in -> ... -> apex.
    cycle_.clear();
    for (auto it = up_u.rbegin(); it != up_u.rend(); ++it) {
      const size_t x = *it;  // traversed parent(x) -> x
      cycle_.push_back({pred_[x], tail(pred_[x]) == parent_[x]});
    }
    cycle_.push_back({entering, true});
    for (size_t x : up_v) {  // traversed x -> parent(x)
      cycle_.push_back({pred_[x], tail(pred_[x]) == x});
    }

    // Leaving arc: last blocking arc met from the apex. This keeps the tree
    // strongly feasible.
    double delta = std::numeric_limits<double>::infinity();
    size_t leaving_pos = kNone;
    for (size_t k = 0; k < cycle_.size(); ++k) {
      if (cycle_[k].forward) continue;
      const double f = flow_[cycle_[k].arc];
      if (f <= delta) {
        delta = f;
        leaving_pos = k;
      }
    }
    if (leaving_pos == kNone) throw Error("internal", "network simplex: unbounded cycle");

    if (delta > 0.0) {
      for (const CycleArc& c : cycle_) {
        if (c.forward) {
          flow_[c.arc] += delta;
        } else {
          flow_[c.arc] = std::max(0.0, flow_[c.arc] - delta);
        }
      }
    }
    const size_t leaving = cycle_[leaving_pos].arc;
    flow_[leaving] = 0.0;
    in_tree_[leaving] = 0;
    in_tree_[entering] = 1;
    *std::find(tree_arcs_.begin(), tree_arcs_.end(), leaving) = entering;
  }

  size_t m_;
  size_t n_;
  size_t root_;
  size_t node_count_;
  const std::vector<double>& cost_;
  double art_cost_ = 0.0;
  double eps_ = 0.0;

  std::vector<double> flow_;
  std::vector<char> in_tree_;
  std::vector<size_t> tree_arcs_;
  std::vector<size_t> parent_;
  std::vector<size_t> pred_;
  std::vector<size_t> depth_;
  std::vector<double> pi_;
  std::vector<std::vector<size_t>> adj_;
  std::vector<size_t> stack_;
  std::vector<CycleArc> cycle_;
};

void check_masses(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x) || x < 0.0) {
      throw invalid_input(std::string(what) + " masses must be finite and >= 0");
    }
  }
}

}  // namespace

TransportSolution solve_transport(std::span<const double> supply, std::span<const double> demand,
                                  const CostMatrix& cost) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    throw invalid_input("cost matrix shape does not match marginals");
  }
  check_masses(supply, "supply");
  check_masses(demand, "demand");
  const double total_s = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_d = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (!(total_s > 0.0) || !(total_d > 0.0)) throw invalid_input("transport needs positive total mass");
  if (std::abs(total_s - total_d) > 1e-9 * std::max(total_s, total_d)) {
    throw invalid_input("unbalanced transport problem: supply " + std::to_string(total_s) +
                        " vs demand " + std::to_string(total_d));
  }

  // Zero-mass nodes never carry flow; solve on the support only.
  std::vector<size_t> src_idx;
  std::vector<size_t> dst_idx;
  for (size_t i = 0; i < supply.size(); ++i) {
    if (supply[i] > 0.0) src_idx.push_back(i);
  }
  for (size_t j = 0; j < demand.size(); ++j) {
    if (demand[j] > 0.0) dst_idx.push_back(j);
  }
  std::vector<double> s;
  std::vector<double> d;
  std::vector<double> c;
  for (size_t i : src_idx) s.push_back(supply[i]);
  for (size_t j : dst_idx) d.push_back(demand[j]);
  // Absorb the rounding-level imbalance into the destinations.
  const double scale = total_s / total_d;
  for (double& x : d) x *= scale;
  c.reserve(src_idx.size() * dst_idx.size());
  for (size_t i : src_idx) {
    for (size_t j : dst_idx) c.push_back(cost(i, j));
  }

  NetworkSimplex ns(s, d, c, s.size(), d.size());
  TransportSolution out;
  out.pivots = ns.run();

  TransportPlan& plan = out.plan;
  plan.n_src = supply.size();
  plan.n_dst = demand.size();
  plan.src_mass.assign(supply.begin(), supply.end());
  plan.dst_mass.assign(demand.begin(), demand.end());
  plan.flows.assign(plan.n_src * plan.n_dst, 0.0);
  double total = 0.0;
  for (size_t a = 0; a < src_idx.size(); ++a) {
    for (size_t b = 0; b < dst_idx.size(); ++b) {
      const double f = ns.flow(a, b);
      if (f == 0.0) continue;
      plan.flows[src_idx[a] * plan.n_dst + dst_idx[b]] = f;
      total += f * c[a * dst_idx.size() + b];
    }
  }
  out.cost = total;
  return out;
}

namespace {

std::vector<Cell> grid_cells(int n) {
  std::vector<Cell> cells;
  cells.reserve(static_cast<size_t>(n) * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) cells.push_back({r, c});
  }
  return cells;
}

}  // namespace

EMDResult emd(const SpatialMap& p, const SpatialMap& q, Metric metric, MassMode mode) {
  if (p.n() != q.n()) throw invalid_input("grid order mismatch between maps");
  const double tp = p.total();
  const double tq = q.total();
  if (!(tp > 0.0) || !(tq > 0.0)) throw invalid_input("EMD needs maps with positive total mass");

  std::vector<double> src = p.mass();
  std::vector<double> dst = q.mass();
  if (mode == MassMode::Normalized) {
    for (double& x : src) x /= tp;
    for (double& x : dst) x /= tq;
  } else if (std::abs(tp - tq) > 1e-9 * std::max(tp, tq)) {
    throw invalid_input("raw-mode EMD needs equal total mass (got " + std::to_string(tp) + " and " +
                        std::to_string(tq) + "); rebalance first");
  }

  const std::vector<Cell> cells = grid_cells(p.n());
  const CostMatrix cost = ground_cost(cells, cells, metric);
  TransportSolution sol = solve_transport(src, dst, cost);
  return {sol.cost, std::move(sol.plan)};
}

std::pair<SpatialMap, SpatialMap> rebalance(const SpatialMap& p, const SpatialMap& q,
                                            double target_total) {
  if (!(target_total > 0.0) || !std::isfinite(target_total)) {
    throw invalid_input("rebalance target must be positive");
  }
  const double tp = p.total();
  const double tq = q.total();
  if (!(tp > 0.0) || !(tq > 0.0)) throw invalid_input("cannot rebalance a zero-mass map");
  return {p.scaled(target_total / tp), q.scaled(target_total / tq)};
}

}  // namespace eegemd
