#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "../support/lp_oracle.hpp"
#include "eegemd/error.hpp"
#include "eegemd/transport.hpp"

using namespace eegemd;

namespace {

SpatialMap random_map(int n, std::mt19937_64& rng, double density = 0.6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpatialMap m(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (u(rng) < density) m.set({r, c}, u(rng));
    }
  }
  if (m.total() == 0.0) m.set({0, 0}, 1.0);
  return m;
}

// Scales q so that its total equals p's.
SpatialMap match_total(const SpatialMap& q, double total) { return q.scaled(total / q.total()); }

std::vector<Cell> all_cells(int n) {
  std::vector<Cell> cells;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) cells.push_back({r, c});
  }
  return cells;
}

double oracle_emd(const SpatialMap& p, const SpatialMap& q, Metric metric) {
  const auto cells = all_cells(p.n());
  const CostMatrix cost = ground_cost(cells, cells, metric);
  return testkit::transport_lp_oracle(p.mass(), q.mass(), cost.values());
}

}  // namespace

TEST(GroundCost, ThreeFourFive) {
  const std::vector<Cell> a = {{0, 0}};
  const std::vector<Cell> b = {{3, 4}};
  EXPECT_DOUBLE_EQ(ground_cost(a, b, Metric::Euclidean)(0, 0), 5.0);
}

TEST(GroundCost, ManhattanDiagonal) {
  const std::vector<Cell> a = {{0, 0}};
  const std::vector<Cell> b = {{1, 1}};
  EXPECT_DOUBLE_EQ(ground_cost(a, b, Metric::Manhattan)(0, 0), 2.0);
}

TEST(GroundCost, ZeroExactlyOnCoincidentCells) {
  const auto cells = all_cells(4);
  const CostMatrix c = ground_cost(cells, cells, Metric::Euclidean);
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t j = 0; j < cells.size(); ++j) {
      if (i == j) {
        EXPECT_EQ(c(i, j), 0.0);
      } else {
        EXPECT_GT(c(i, j), 0.0);
      }
    }
  }
}

TEST(GroundCost, EmptyListIsError) {
  const std::vector<Cell> none;
  const std::vector<Cell> one = {{0, 0}};
  EXPECT_THROW(ground_cost(none, one, Metric::Euclidean), Error);
}

TEST(Emd, SelfDistanceIsZeroWithIdentityPlan) {
  std::mt19937_64 rng(3);
  const SpatialMap p = random_map(5, rng);
  const EMDResult r = emd(p, p);
  EXPECT_LE(r.distance, 1e-12 * p.total());
  for (size_t i = 0; i < p.mass().size(); ++i) EXPECT_NEAR(r.plan.flow(i, i), p.mass()[i], 1e-12);
}

TEST(Emd, SingleUnitForcedMove) {
  SpatialMap p(4), q(4);
  p.set({0, 0}, 1.0);
  q.set({0, 3}, 1.0);
  EXPECT_DOUBLE_EQ(emd(p, q).distance, 3.0);
  EXPECT_DOUBLE_EQ(emd(p, q, Metric::Manhattan).distance, 3.0);
}

TEST(Emd, MatchesLpOracleOnRandom4x4) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 25; ++t) {
    const SpatialMap p = random_map(4, rng);
    const SpatialMap q = match_total(random_map(4, rng), p.total());
    for (Metric m : {Metric::Euclidean, Metric::Manhattan}) {
      const double got = emd(p, q, m).distance;
      const double want = oracle_emd(p, q, m);
      EXPECT_NEAR(got, want, 1e-9 * std::max(1.0, want)) << "trial " << t;
    }
  }
}

TEST(Emd, DistanceEqualsPlanCostAndMarginalsHold) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const SpatialMap p = random_map(6, rng, 0.4);
    const SpatialMap q = match_total(random_map(6, rng, 0.4), p.total());
    const EMDResult r = emd(p, q);
    const auto cells = all_cells(6);
    const CostMatrix c = ground_cost(cells, cells, Metric::Euclidean);
    double cost = 0.0;
    for (size_t i = 0; i < cells.size(); ++i) {
      for (size_t j = 0; j < cells.size(); ++j) {
        EXPECT_GE(r.plan.flow(i, j), 0.0);
        cost += c(i, j) * r.plan.flow(i, j);
      }
    }
    EXPECT_NEAR(cost, r.distance, 1e-9 * std::max(1.0, r.distance));
    const auto rows = r.plan.row_sums();
    const auto cols = r.plan.col_sums();
    for (size_t i = 0; i < cells.size(); ++i) {
      EXPECT_NEAR(rows[i], p.mass()[i], 1e-9 * p.total());
      EXPECT_NEAR(cols[i], q.mass()[i], 1e-9 * p.total());
    }
  }
}

TEST(Emd, SymmetryAndTriangle) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    const SpatialMap p = random_map(5, rng);
    const SpatialMap q = match_total(random_map(5, rng), p.total());
    const SpatialMap r = match_total(random_map(5, rng), p.total());
    const double pq = emd(p, q).distance;
    const double qp = emd(q, p).distance;
    EXPECT_NEAR(pq, qp, 1e-9 * std::max(1.0, pq));
    EXPECT_LE(emd(p, r).distance, pq + emd(q, r).distance + 1e-9);
  }
}

TEST(Emd, PositiveHomogeneity) {
  std::mt19937_64 rng(23);
  for (double c : {0.01, 0.5, 3.0, 1000.0}) {
    const SpatialMap p = random_map(5, rng);
    const SpatialMap q = match_total(random_map(5, rng), p.total());
    const double base = emd(p, q).distance;
    EXPECT_NEAR(emd(p.scaled(c), q.scaled(c)).distance, c * base, 1e-9 * c * std::max(1.0, base));
  }
}

TEST(Emd, NormalizedModeIgnoresScale) {
  std::mt19937_64 rng(29);
  const SpatialMap p = random_map(4, rng);
  const SpatialMap q = random_map(4, rng);
  const double a = emd(p, q, Metric::Euclidean, MassMode::Normalized).distance;
  const double b = emd(p.scaled(7.0), q.scaled(0.2), Metric::Euclidean, MassMode::Normalized).distance;
  EXPECT_NEAR(a, b, 1e-12);
  const double raw = emd(p.scaled(1.0 / p.total()), q.scaled(1.0 / q.total())).distance;
  EXPECT_NEAR(a, raw, 1e-12);
}

TEST(Emd, Errors) {
  SpatialMap p(3), q(3), z(3), big(4);
  p.set({0, 0}, 1.0);
  q.set({1, 1}, 2.0);
  big.set({0, 0}, 1.0);
  EXPECT_THROW(emd(p, q), Error);          // unequal raw totals
  EXPECT_THROW(emd(p, z), Error);          // zero mass
  EXPECT_THROW(emd(p, big), Error);        // grid mismatch
  EXPECT_NO_THROW(emd(p, q, Metric::Euclidean, MassMode::Normalized));
}

TEST(Rebalance, ScalesToTarget) {
  SpatialMap p(3), q(3);
  p.set({0, 0}, 294.0);
  q.set({1, 1}, 21.0);
  const auto [a, b] = rebalance(p, q, 21.0);
  EXPECT_DOUBLE_EQ(a.total(), 21.0);
  EXPECT_EQ(b, q);
  EXPECT_DOUBLE_EQ(a.at(1, 1), 0.0);
  SpatialMap z(3);
  EXPECT_THROW(rebalance(p, z, 1.0), Error);
}

TEST(SolveTransport, RectangularProblemAgainstOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 20; ++t) {
    const size_t m = 2 + t % 5, n = 3 + t % 4;
    std::vector<double> s(m), d(n), c(m * n);
    for (auto& x : s) x = u(rng);
    for (auto& x : d) x = u(rng);
    for (auto& x : c) x = u(rng);
    double ts = 0, td = 0;
    for (double x : s) ts += x;
    for (double x : d) td += x;
    for (auto& x : d) x *= ts / td;
    const TransportSolution sol = solve_transport(s, d, CostMatrix(m, n, c));
    const double want = testkit::transport_lp_oracle(s, d, c);
    EXPECT_NEAR(sol.cost, want, 1e-9 * std::max(1.0, want));
  }
}

TEST(SolveTransport, DegenerateIntegerMarginals) {
  // Equal integer masses everywhere invite degenerate pivots.
  const std::vector<double> s(6, 1.0), d(6, 1.0);
  std::vector<double> c(36);
  for (size_t i = 0; i < 6; ++i) {
    for (size_t j = 0; j < 6; ++j) c[i * 6 + j] = std::abs(static_cast<double>(i) - static_cast<double>(j));
  }
  EXPECT_DOUBLE_EQ(solve_transport(s, d, CostMatrix(6, 6, c)).cost, 0.0);
  std::rotate(c.begin(), c.begin() + 1, c.end());
  EXPECT_NEAR(solve_transport(s, d, CostMatrix(6, 6, c)).cost, testkit::transport_lp_oracle(s, d, c), 1e-9);
}

TEST(ParseEnums, MetricAndMass) {
  EXPECT_EQ(parse_metric("Manhattan"), Metric::Manhattan);
  EXPECT_EQ(parse_mass_mode("normalized"), MassMode::Normalized);
  EXPECT_THROW(parse_metric("chebyshev"), Error);
  EXPECT_EQ(to_string(Metric::Euclidean), "euclidean");
}
