// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/cohort.hpp"
#include "../support/lp_oracle.hpp"
#include "../support/published_tables.hpp"
#include "../support/synthetic.hpp"
#include "eegemd/cli.hpp"
#include "eegemd/relevance.hpp"
#include "eegemd/signal.hpp"
#include "eegemd/spdgeom.hpp"
#include "eegemd/stats.hpp"
#include "eegemd/text_io.hpp"
#include "eegemd/transport.hpp"

using namespace eegemd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Verdict fail(std::string d) { return {Outcome::Fail, std::move(d)}; }

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const GridLayout& layout() {
  static const GridLayout g = load_grid_layout_file(EEGEMD_TEST_LAYOUT);
  return g;
}

std::vector<Cell> grid_cells(int n) {
  std::vector<Cell> cells;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) cells.push_back({r, c});
  }
  return cells;
}

SpatialMap random_map(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double density = 0.2 + 0.8 * u(rng);
  SpatialMap m(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (u(rng) < density) m.set({r, c}, u(rng) < 0.3 ? std::floor(1 + 4 * u(rng)) : u(rng));
    }
  }
  if (m.total() == 0.0) m.set({n - 1, 0}, 1.0);
  return m;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

// ---- 1 ------------------------------------------------------------------------
Verdict ac1_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  int checked = 0;
  double worst = 0.0;
  for (int n = 2; n <= 6; ++n) {
    const auto cells = grid_cells(n);
    const CostMatrix euclid = ground_cost(cells, cells, Metric::Euclidean);
    const CostMatrix manhattan = ground_cost(cells, cells, Metric::Manhattan);
    for (int t = 0; t < 50; ++t) {
      const SpatialMap p = random_map(n, rng);
      const SpatialMap q0 = random_map(n, rng);
      const SpatialMap q = q0.scaled(p.total() / q0.total());
      const bool manh = t % 5 == 4;
      const double got = emd(p, q, manh ? Metric::Manhattan : Metric::Euclidean).distance;
      const double want =
          testkit::transport_lp_oracle(p.mass(), q.mass(), (manh ? manhattan : euclid).values());
      worst = std::max(worst, rel_err(got, want));
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  const std::string d = std::to_string(checked) + " pairs on 2x2..6x6, max rel err " + fmt(worst, 3) + ", " +
                        fmt(secs, 3) + " s";
  return checked >= 200 && worst <= 1e-9 && secs < 60.0 ? pass(d) : fail(d);
}

// ---- 2 ------------------------------------------------------------------------
Verdict ac2_axioms() {
  std::mt19937_64 rng(77);
  int violations = 0;
  int cases = 0;
  std::string first;
  auto check = [&](bool ok, const std::string& what) {
    ++cases;
    if (!ok) {
      ++violations;
      if (first.empty()) first = what;
    }
  };
  for (int t = 0; t < 60; ++t) {
    const int n = 3 + t % 4;
    const auto cells = grid_cells(n);
    const CostMatrix cost = ground_cost(cells, cells, Metric::Euclidean);
    const SpatialMap p = random_map(n, rng);
    auto same_total = [&](const SpatialMap& m) { return m.scaled(p.total() / m.total()); };
    const SpatialMap q = same_total(random_map(n, rng));
    const SpatialMap r = same_total(random_map(n, rng));

    check(emd(p, p).distance <= 1e-12 * p.total() * cost.max(), "identity");
    const EMDResult pq = emd(p, q);
    const double qp = emd(q, p).distance;
    check(pq.distance >= 0.0, "nonnegativity");
    check(std::abs(pq.distance - qp) <= 1e-9 * std::max(1.0, pq.distance), "symmetry");
    check(emd(p, r).distance <= pq.distance + emd(q, r).distance + 1e-9, "triangle");
    const auto rows = pq.plan.row_sums();
    const auto cols = pq.plan.col_sums();
    bool feasible = true;
    double plan_cost = 0.0;
    for (size_t i = 0; i < cells.size(); ++i) {
      feasible = feasible && std::abs(rows[i] - p.mass()[i]) <= 1e-9 * p.total();
      feasible = feasible && std::abs(cols[i] - q.mass()[i]) <= 1e-9 * p.total();
      for (size_t j = 0; j < cells.size(); ++j) {
        feasible = feasible && pq.plan.flow(i, j) >= 0.0;
        plan_cost += cost(i, j) * pq.plan.flow(i, j);
      }
    }
    check(feasible, "marginal feasibility");
    check(std::abs(plan_cost - pq.distance) <= 1e-9 * std::max(1.0, pq.distance), "plan cost");
    const double c = std::exp(std::uniform_real_distribution<double>(-4.0, 4.0)(rng));
    check(rel_err(emd(p.scaled(c), q.scaled(c)).distance, c * pq.distance) <= 1e-9, "homogeneity");
  }
  const std::string d = std::to_string(cases) + " property checks, " + std::to_string(violations) + " violations" +
                        (first.empty() ? "" : " (first: " + first + ")");
  return violations == 0 ? pass(d) : fail(d);
}

// ---- 3 ------------------------------------------------------------------------
template <typename Table>
std::vector<double> overall(const Table& t, int col) {
  std::vector<double> v;
  for (const auto& r : t) v.push_back(r.acc[col]);
  return v;
}

Verdict ac3_tables() {
  using testkit::kConformerTable;
  using testkit::kEegnetTable;
  using testkit::kMdmTable;
  std::vector<std::string> bad;
  struct SummaryCase {
    const char* name;
    std::vector<double> v;
    double mean, sd;
  };
  const std::vector<SummaryCase> sums = {
      {"I/all64", overall(kMdmTable, 0), 73.63, 4.26},     {"I/mi21", overall(kMdmTable, 3), 69.64, 7.35},
      {"I/feat21", overall(kMdmTable, 6), 68.56, 5.69},    {"II/all64", overall(kConformerTable, 0), 68.64, 7.30},
      {"III/all64", overall(kEegnetTable, 0), 67.02, 7.02},
  };
  std::ostringstream d;
  for (const auto& s : sums) {
    const Summary sm = cohort_summary(s.v);
    if (std::abs(sm.mean - s.mean) > 0.02 || std::abs(sm.sd - s.sd) > 0.02) bad.push_back(s.name);
  }
  d << "means/SDs ok=" << (bad.empty() ? "yes" : "no");

  const auto base = overall(kMdmTable, 0);
  struct PCase {
    const char* name;
    std::vector<double> other;
    double p, delta;
  };
  const std::vector<PCase> ps = {
      {"I all64-mi21", overall(kMdmTable, 3), 0.0279, 3.99},
      {"I all64-feat21", overall(kMdmTable, 6), 0.0014, 5.07},
      {"I-II all64", overall(kConformerTable, 0), 0.0029, 4.99},
      {"I-III all64", overall(kEegnetTable, 0), 0.0028, 6.61},
  };
  const double mean_base = cohort_summary(base).mean;
  d << "; p(normal-approx)=";
  for (const auto& c : ps) {
    const double p = wilcoxon_signed_rank(base, c.other, WilcoxonMode::NormalApprox).p_value;
    const double delta = mean_base - cohort_summary(c.other).mean;
    d << fmt(p, 4) << " ";
    if (std::abs(p - c.p) > 0.003) bad.push_back(std::string(c.name) + " p");
    if (std::abs(delta - c.delta) > 0.02) bad.push_back(std::string(c.name) + " delta=" + fmt(delta, 5));
  }
  if (!bad.empty()) {
    d << "; failing:";
    for (const auto& b : bad) d << " [" << b << "]";
  }
  return bad.empty() ? pass(d.str()) : fail(d.str());
}

// ---- 4 ------------------------------------------------------------------------
Verdict ac4_row_consistency() {
  const auto& row = testkit::kMdmTable[0];  // ID 7
  const double left = row.acc[1] / 100.0, right = row.acc[2] / 100.0;
  // Derive the class supports: integer n_left + n_right = 93 whose recalls
  // round to the published values with integer correct counts.
  for (int nl = 1; nl < 93; ++nl) {
    const int nr = 93 - nl;
    const long cl = std::lround(left * nl), cr = std::lround(right * nr);
    if (std::abs(100.0 * cl / nl - row.acc[1]) > 0.005 || std::abs(100.0 * cr / nr - row.acc[2]) > 0.005) continue;
    std::vector<int> labels, preds;
    for (int i = 0; i < nl; ++i) {
      labels.push_back(0);
      preds.push_back(i < cl ? 0 : 1);
    }
    for (int i = 0; i < nr; ++i) {
      labels.push_back(1);
      preds.push_back(i < cr ? 1 : 0);
    }
    const EvalResult ev = evaluate(preds, labels);
    const double got = 100.0 * ev.overall;
    const std::string d = "supports " + std::to_string(nl) + "/" + std::to_string(nr) + " -> overall " +
                          fmt(got, 6) + " vs published " + fmt(row.acc[0], 4);
    return std::abs(got - row.acc[0]) <= 0.01 ? pass(d) : fail(d);
  }
  return fail("no integer class supports reproduce the published recalls");
}

// ---- 5 ------------------------------------------------------------------------
Verdict ac5_emd_properties() {
  const GridLayout& g = layout();
  const SpatialMap base = mi_baseline(g);
  const double self = emd(base, base).distance;

  // Displace the whole baseline d rows toward the back of the head.
  std::vector<double> series;
  for (int d = 0; d <= 4; ++d) {
    SpatialMap m(g.n());
    for (const auto& c : motor_imagery_channels()) {
      Cell cell = g.at(c).cell;
      cell.row += d;
      m.set(cell, 1.0);
    }
    series.push_back(emd(m, base).distance);
  }
  bool monotone = true;
  for (size_t i = 1; i < series.size(); ++i) monotone = monotone && series[i] + 1e-12 >= series[i - 1];

  // 14 channels shared, the 7 CP channels each replaced by the electrode one
  // cell behind it (P row): every moved unit travels exactly one cell.
  std::vector<std::string> chosen;
  int moved = 0;
  for (const auto& c : motor_imagery_channels()) {
    if (c.rfind("CP", 0) == 0) {
      const Cell below{g.at(c).cell.row + 1, g.at(c).cell.col};
      for (const auto& e : g.electrodes()) {
        if (e.cell == below) {
          chosen.push_back(e.name);
          ++moved;
        }
      }
    } else {
      chosen.push_back(c);
    }
  }
  const double seven = emd(binary_map(chosen, g), base, Metric::Euclidean, MassMode::Raw).distance;

  std::ostringstream d;
  d << "self=" << self << "; displacement 0..4 -> ";
  for (double v : series) d << fmt(v, 6) << " ";
  d << "; 14 shared + " << moved << " one-cell moves -> " << fmt(seven, 10);
  d << " (published figures not reproducible without the trained relevance maps)";
  return self == 0.0 && monotone && moved == 7 && chosen.size() == 21 && seven == 7.0 ? pass(d.str())
                                                                                      : fail(d.str());
}

// ---- 6 ------------------------------------------------------------------------
Verdict ac6_mdm_fixture() {
  const auto t0 = Clock::now();
  const auto train = testkit::class_variance_fixture(8, {3, 7}, 100, 160, 2.0, 606);
  const auto test = testkit::class_variance_fixture(8, {3, 7}, 100, 160, 2.0, 607);
  const MDMModel model = mdm_fit(train.covs, train.labels);
  std::vector<int> preds;
  for (const auto& c : test.covs) preds.push_back(mdm_predict(model, c));
  const double acc = evaluate(preds, test.labels).overall;
  const SelectionTrace trace = backward_elimination(train.covs, train.labels, 2);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "held-out accuracy " << fmt(100 * acc, 5) << "%, elimination kept {";
  for (size_t i = 0; i < trace.final_subset.size(); ++i) d << (i ? "," : "") << trace.final_subset[i];
  d << "}, " << fmt(secs, 3) << " s";
  return acc >= 0.95 && trace.final_subset == std::vector<int>{3, 7} && secs < 120.0 ? pass(d.str())
                                                                                    : fail(d.str());
}

// ---- 7 ------------------------------------------------------------------------
Verdict ac7_geometry() {
  double worst_scalar = 0.0;
  for (int dim : {1, 2, 5, 21, 64}) {
    for (double c : {1e-3, 0.3, 2.0, 7.5, 1e3}) {
      const SPDMatrix i(Eigen::MatrixXd::Identity(dim, dim));
      const SPDMatrix ci(c * Eigen::MatrixXd::Identity(dim, dim));
      worst_scalar = std::max(worst_scalar,
                              std::abs(riemannian_distance(i, ci) - std::sqrt(dim) * std::abs(std::log(c))));
    }
  }
  std::mt19937_64 rng(707);
  double worst_affine = 0.0;
  for (int t = 0; t < 30; ++t) {
    const int dim = 2 + t % 9;
    const SPDMatrix a = testkit::random_spd(dim, rng);
    const SPDMatrix b = testkit::random_spd(dim, rng);
    const Eigen::MatrixXd w = testkit::gaussian(dim, dim, rng) + Eigen::MatrixXd::Identity(dim, dim);
    auto cong = [&](const SPDMatrix& m) {
      Eigen::MatrixXd x = w * m.values() * w.transpose();
      return SPDMatrix(0.5 * (x + x.transpose()));
    };
    const double d0 = riemannian_distance(a, b);
    worst_affine = std::max(worst_affine, std::abs(riemannian_distance(cong(a), cong(b)) - d0) / d0);
  }
  double worst_residual = 0.0;
  for (int t = 0; t < 5; ++t) {
    std::vector<SPDMatrix> mats;
    for (int k = 0; k < 10; ++k) mats.push_back(testkit::random_spd(4 + t, rng));
    worst_residual = std::max(worst_residual, frechet_mean(mats).residual);
  }
  const std::string d = "scalar-identity err " + fmt(worst_scalar, 3) + ", affine rel err " + fmt(worst_affine, 3) +
                        ", Frechet residual " + fmt(worst_residual, 3);
  return worst_scalar <= 1e-9 && worst_affine <= 1e-7 && worst_residual <= 1e-8 ? pass(d) : fail(d);
}

// ---- 8 ------------------------------------------------------------------------
Verdict ac8_preprocessing() {
  Recording rec;
  rec.channel_names = {"C3", "C4"};
  rec.sample_rate = 160.0;
  rec.data = Eigen::MatrixXd::Random(2, 160 * 6);
  rec.annotations = {{0, 160, "T0"}, {160, 640, "T2"}};
  const EpochingResult ep = epoch_trials(rec);
  bool shape_ok = ep.epochs.size() == 4;
  for (const auto& e : ep.epochs) shape_ok = shape_ok && e.data.cols() == 160 && e.data.rows() == 2;

  const auto sos = butterworth_bandpass(4, 8.0, 30.0, 160.0);
  auto response = [&](double hz) {
    const int n = 160 * 10;
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = std::sin(2.0 * std::numbers::pi * hz * i / 160.0);
    const Eigen::VectorXd y = filtfilt(sos, x);
    return y.segment(n / 4, n / 2).cwiseAbs().maxCoeff();
  };
  const double a20 = response(20.0);
  const double db2 = 20.0 * std::log10(response(2.0));
  const std::string d = std::to_string(ep.epochs.size()) + " epochs x " +
                        (ep.epochs.empty() ? std::string("0") : std::to_string(ep.epochs[0].data.cols())) +
                        " samples; 20 Hz gain " + fmt(a20, 5) + "; 2 Hz " + fmt(db2, 4) + " dB";
  return shape_ok && std::abs(a20 - 1.0) <= 0.05 && db2 <= -20.0 ? pass(d) : fail(d);
}

// ---- 9 ------------------------------------------------------------------------
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  }
  return files;
}

Verdict ac9_determinism() {
  const fs::path root = fs::temp_directory_path() / "eegemd_acceptance_determinism";
  fs::remove_all(root);
  testkit::write_synthetic_cohort(root / "data", layout(), {1, 2}, {3, 4}, 16, 1.6);
  const std::string cfg = "version = 1\ndataset_root = ../data\nsubjects = 1, 2\nruns = 3, 4\nseed = 1234\n";
  std::vector<std::map<std::string, std::string>> snaps;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    write_text_file(dir / "exp.cfg", cfg);
    const std::string c = (dir / "exp.cfg").string();
    std::ostringstream out, err;
    for (const std::vector<std::string>& args :
         {std::vector<std::string>{"prepare", "--config", c}, {"train-eval", "--config", c},
          {"report", "--config", c}, {"emd", "--config", c}}) {
      if (cli::run(args, out, err) != 0) return fail(args[0] + " failed: " + err.str());
    }
    const fs::path map = dir / "out" / "emd" / "maps" / "mdm_weighted.csv";
    if (cli::run({"plot", "--map", map.string(), "--out", (dir / "out" / "mdm_weighted.svg").string()}, out, err) !=
        0) {
      return fail("plot failed: " + err.str());
    }
    snaps.push_back(snapshot(dir / "out"));
  }
  size_t csv = 0, json = 0, svg = 0;
  for (const auto& [name, bytes] : snaps[0]) {
    csv += name.ends_with(".csv");
    json += name.ends_with(".json");
    svg += name.ends_with(".svg");
  }
  std::string diff;
  for (const auto& [name, bytes] : snaps[0]) {
    auto it = snaps[1].find(name);
    if (it == snaps[1].end() || it->second != bytes) diff += " " + name;
  }
  const std::string d = std::to_string(snaps[0].size()) + " files compared (" + std::to_string(csv) + " csv, " +
                        std::to_string(json) + " json, " + std::to_string(svg) + " svg)" +
                        (diff.empty() ? ", all identical" : ", differing:" + diff);
  fs::remove_all(root);
  return diff.empty() && snaps[0].size() == snaps[1].size() && svg > 0 ? pass(d) : fail(d);
}

// ---- 10 -----------------------------------------------------------------------
Verdict ac10_physionet() {
  const char* env = std::getenv("EEGEMD_PHYSIONET_ROOT");
  if (env == nullptr || !fs::is_directory(env)) {
    return {Outcome::Skip, "EEGEMD_PHYSIONET_ROOT not set to a local copy of the EEG Motor Movement/Imagery dataset"};
  }
  const fs::path out = fs::temp_directory_path() / "eegemd_acceptance_physionet";
  cli::ExperimentConfig cfg;
  cfg.dataset_root = env;
  cfg.subjects = {7, 12, 22, 42, 43, 48, 49, 53, 70, 80, 82, 85, 94, 102};
  cfg.channel_configs = {cli::ChannelConfig::All64};
  cfg.output_dir = out;
  std::ostringstream log;
  cli::cmd_prepare(cfg, log);
  const auto reports = cli::cmd_train_eval(cfg, log);
  std::vector<double> acc;
  int missing = 0;
  for (const auto& row : reports.at(0).rows) {
    if (row.status == "ok") {
      acc.push_back(row.overall);
    } else {
      ++missing;
    }
  }
  if (acc.empty()) return fail("no subject could be evaluated");
  const double mean = cohort_summary(acc).mean;
  const std::string d = "all-64 MDM mean " + fmt(mean, 5) + "% over " + std::to_string(acc.size()) +
                        " subjects (" + std::to_string(missing) + " unavailable); target 73.63 +/- 5";
  return std::abs(mean - 73.63) <= 5.0 && missing == 0 ? pass(d) : fail(d);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"AC1  EMD matches LP oracle", ac1_oracle},
      {"AC2  EMD metric axioms", ac2_axioms},
      {"AC3  Published table statistics", ac3_tables},
      {"AC4  Row ID 7 overall from recalls", ac4_row_consistency},
      {"AC5  EMD baseline properties", ac5_emd_properties},
      {"AC6  MDM + elimination fixture", ac6_mdm_fixture},
      {"AC7  Riemannian geometry suite", ac7_geometry},
      {"AC8  Preprocessing contract", ac8_preprocessing},
      {"AC9  End-to-end determinism", ac9_determinism},
      {"AC10 PhysioNet cohort mean", ac10_physionet},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Skip ? "SKIP" : "FAIL";
    failures += v.outcome == Outcome::Fail;
    std::cout << "[" << tag << "] " << name << " -- " << v.detail << std::endl;
  }
  std::cout << (failures == 0 ? "acceptance: all criteria met or skipped" : "acceptance: failures present")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
