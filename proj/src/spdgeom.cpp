#include "eegemd/spdgeom.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace eegemd {

namespace {

std::atomic<std::uint64_t> g_clamp_count{0};

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

template <typename F>
Eigen::MatrixXd apply_spectral(const Eigen::MatrixXd& a, F&& f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a));
  if (es.info() != Eigen::Success) throw Error("numeric", "eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = 1e-12 * ev.maxCoeff();
  if (!(ev.maxCoeff() > 0.0)) throw invalid_input("matrix is not positive definite");
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor) {
      ev(i) = floor;
      g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    }
    ev(i) = f(ev(i));
  }
  const Eigen::MatrixXd& v = es.eigenvectors();
  return symmetrize(v * ev.asDiagonal() * v.transpose());
}

}  // namespace

SPDMatrix make_spd_trusted(Eigen::MatrixXd values) {
  return SPDMatrix(symmetrize(values), SPDMatrix::Trusted{});
}

SPDMatrix::SPDMatrix(const Eigen::MatrixXd& values) {
  if (values.rows() != values.cols() || values.rows() == 0) {
    throw invalid_input("SPD matrix must be square and nonempty");
  }
  if (!values.allFinite()) throw invalid_input("SPD matrix has non-finite entries");
  const double scale = values.cwiseAbs().maxCoeff();
  if ((values - values.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw invalid_input("matrix is not symmetric");
  }
  values_ = symmetrize(values);
  Eigen::LLT<Eigen::MatrixXd> llt(values_);
  if (llt.info() != Eigen::Success) throw invalid_input("matrix is not positive definite");
}

SPDMatrix SPDMatrix::restrict_to(std::span<const int> channels) const {
  const std::vector<int> idx(channels.begin(), channels.end());
  for (int c : idx) {
    if (c < 0 || c >= dim()) throw invalid_input("channel index out of range");
  }
  return SPDMatrix(values_(idx, idx), Trusted{});
}

ConvergenceError::ConvergenceError(double residual, int iterations, Eigen::MatrixXd last)
    : Error("convergence", "Frechet mean did not converge after " + std::to_string(iterations) +
                               " iterations (residual " + std::to_string(residual) + ")"),
      residual_(residual),
      iterations_(iterations),
      last_(std::move(last)) {}

Eigen::MatrixXd sqrtm(const Eigen::MatrixXd& a) {
  return apply_spectral(a, [](double x) { return std::sqrt(x); });
}

Eigen::MatrixXd invsqrtm(const Eigen::MatrixXd& a) {
  return apply_spectral(a, [](double x) { return 1.0 / std::sqrt(x); });
}

Eigen::MatrixXd logm(const Eigen::MatrixXd& a) {
  return apply_spectral(a, [](double x) { return std::log(x); });
}

Eigen::MatrixXd expm_sym(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a));
  if (es.info() != Eigen::Success) throw Error("numeric", "eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues().array().exp();
  const Eigen::MatrixXd& v = es.eigenvectors();
  return symmetrize(v * ev.asDiagonal() * v.transpose());
}

std::uint64_t eigenvalue_clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }

SPDMatrix covariance(const Eigen::MatrixXd& epoch, double shrinkage) {
  if (!(shrinkage >= 0.0 && shrinkage < 1.0)) throw invalid_input("shrinkage must lie in [0, 1)");
  if (epoch.cols() < 2) throw invalid_input("covariance needs at least 2 samples");
  if (epoch.rows() < 1) throw invalid_input("covariance needs at least 1 channel");
  if (!epoch.allFinite()) throw invalid_input("epoch contains non-finite samples");
  const Eigen::MatrixXd centered = epoch.colwise() - epoch.rowwise().mean();
  Eigen::MatrixXd s = centered * centered.transpose() / static_cast<double>(epoch.cols() - 1);
  if (shrinkage > 0.0) {
    const double mu = s.trace() / static_cast<double>(s.rows());
    s *= (1.0 - shrinkage);
    s.diagonal().array() += shrinkage * mu;
  }
  return SPDMatrix(symmetrize(s));
}

double riemannian_distance(const SPDMatrix& a, const SPDMatrix& b) {
  if (a.dim() != b.dim()) throw invalid_input("dimension mismatch in riemannian_distance");
  // Eigenvalues of A^-1 B are those of A^-1/2 B A^-1/2.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(b.values(), a.values(),
                                                              Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("numeric", "generalized eigensolver failed");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = std::log(std::max(es.eigenvalues()(i), std::numeric_limits<double>::min()));
    sum += l * l;
  }
  return std::sqrt(sum);
}

namespace {

struct Whitening {
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd invsqrt;
};

Whitening whitening(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw Error("numeric", "eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = 1e-12 * ev.maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor) {
      ev(i) = floor;
      g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    }
  }
  const Eigen::MatrixXd& v = es.eigenvectors();
  return {v * ev.cwiseSqrt().asDiagonal() * v.transpose(),
          v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose()};
}

Eigen::MatrixXd log_map_sum(const Eigen::MatrixXd& invsqrt, std::span<const SPDMatrix> mats) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(invsqrt.rows(), invsqrt.cols());
  for (const SPDMatrix& a : mats) j += logm(invsqrt * a.values() * invsqrt);
  return j;
}

void check_common_dim(std::span<const SPDMatrix> mats) {
  if (mats.empty()) throw invalid_input("Frechet mean of an empty set");
  for (const SPDMatrix& a : mats) {
    if (a.dim() != mats.front().dim()) throw invalid_input("Frechet mean inputs differ in dimension");
  }
}

}  // namespace

double frechet_residual(const SPDMatrix& m, std::span<const SPDMatrix> mats) {
  check_common_dim(mats);
  if (m.dim() != mats.front().dim()) throw invalid_input("dimension mismatch in frechet_residual");
  return log_map_sum(whitening(m.values()).invsqrt, mats).norm();
}

FrechetResult frechet_mean(std::span<const SPDMatrix> mats, const FrechetOptions& opts) {
  check_common_dim(mats);
  const double n = static_cast<double>(mats.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(mats.front().dim(), mats.front().dim());
  for (const SPDMatrix& a : mats) m += a.values();
  m /= n;

  for (int iter = 0;; ++iter) {
    const Whitening w = whitening(m);
    const Eigen::MatrixXd j = log_map_sum(w.invsqrt, mats);
    const double residual = j.norm();
    if (residual <= opts.tol) return {make_spd_trusted(m), residual, iter};
    if (iter >= opts.max_iter) throw ConvergenceError(residual, iter, m);
    m = symmetrize(w.sqrt * expm_sym(j / n) * w.sqrt);
  }
}

namespace {

std::vector<int> sorted_classes(std::span<const int> labels) {
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

std::vector<SPDMatrix> class_means(std::span<const SPDMatrix> covs, std::span<const int> labels,
                                   const std::vector<int>& classes, const FrechetOptions& opts) {
  std::vector<SPDMatrix> centroids;
  for (int cls : classes) {
    std::vector<SPDMatrix> members;
    for (size_t i = 0; i < covs.size(); ++i) {
      if (labels[i] == cls) members.push_back(covs[i]);
    }
    centroids.push_back(frechet_mean(members, opts).mean);
  }
  return centroids;
}

void check_training_set(std::span<const SPDMatrix> covs, std::span<const int> labels) {
  if (covs.size() != labels.size()) throw invalid_input("covariances and labels differ in length");
  if (covs.empty()) throw invalid_input("no training examples");
  for (const SPDMatrix& c : covs) {
    if (c.dim() != covs.front().dim()) throw invalid_input("training covariances differ in dimension");
  }
  if (sorted_classes(labels).size() < 2) {
    throw invalid_input("MDM needs examples from at least two classes");
  }
}

}  // namespace

MDMModel mdm_fit(std::span<const SPDMatrix> covs, std::span<const int> labels,
                 std::vector<int> channel_subset, const FrechetOptions& opts) {
  check_training_set(covs, labels);
  const int dim = static_cast<int>(covs.front().dim());
  if (channel_subset.empty()) {
    channel_subset.resize(dim);
    std::iota(channel_subset.begin(), channel_subset.end(), 0);
  }
  std::vector<int> seen = channel_subset;
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw invalid_input("channel subset has duplicates");
  }
  std::vector<SPDMatrix> restricted;
  restricted.reserve(covs.size());
  for (const SPDMatrix& c : covs) restricted.push_back(c.restrict_to(channel_subset));

  MDMModel model;
  model.classes = sorted_classes(labels);
  model.channel_subset = std::move(channel_subset);
  model.centroids = class_means(restricted, labels, model.classes, opts);
  return model;
}

int mdm_predict(const MDMModel& model, const SPDMatrix& cov) {
  if (cov.dim() != model.dim()) throw invalid_input("covariance dimension does not match model");
  if (model.classes.empty()) throw invalid_input("model has no classes");
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < model.centroids.size(); ++k) {
    const double d = riemannian_distance(model.centroids[k], cov);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return model.classes[best];
}

int mdm_predict_full(const MDMModel& model, const SPDMatrix& full_cov) {
  return mdm_predict(model, full_cov.restrict_to(model.channel_subset));
}

double centroid_separation(std::span<const SPDMatrix> centroids, std::span<const int> subset) {
  std::vector<SPDMatrix> sub;
  sub.reserve(centroids.size());
  for (const SPDMatrix& c : centroids) sub.push_back(c.restrict_to(subset));
  double total = 0.0;
  for (size_t a = 0; a < sub.size(); ++a) {
    for (size_t b = a + 1; b < sub.size(); ++b) total += riemannian_distance(sub[a], sub[b]);
  }
  return total;
}

SelectionTrace backward_elimination_from_centroids(std::span<const SPDMatrix> centroids, int target_k) {
  if (centroids.size() < 2) throw invalid_input("elimination needs at least two class centroids");
  const int dim = static_cast<int>(centroids.front().dim());
  for (const SPDMatrix& c : centroids) {
    if (c.dim() != dim) throw invalid_input("centroids differ in dimension");
  }
  if (target_k < 2 || target_k >= dim) {
    throw invalid_input("target_k must satisfy 2 <= k < " + std::to_string(dim));
  }

  SelectionTrace trace;
  trace.initial_dim = dim;
  std::vector<int> subset(dim);
  std::iota(subset.begin(), subset.end(), 0);
  std::vector<int> trial;
  for (int iter = 0; static_cast<int>(subset.size()) > target_k; ++iter) {
    int best_channel = -1;
    double best_d = -std::numeric_limits<double>::infinity();
    for (int candidate : subset) {  // ascending, so ties keep the lowest index
      trial.clear();
      for (int c : subset) {
        if (c != candidate) trial.push_back(c);
      }
      const double d = centroid_separation(centroids, trial);
      if (d > best_d) {
        best_d = d;
        best_channel = candidate;
      }
    }
    subset.erase(std::find(subset.begin(), subset.end(), best_channel));
    trace.removal_order.push_back({iter, best_channel, best_d});
  }
  trace.final_subset = subset;

  const double full = centroid_separation(centroids, subset);
  std::vector<std::pair<double, int>> drops;
  for (int candidate : subset) {
    trial.clear();
    for (int c : subset) {
      if (c != candidate) trial.push_back(c);
    }
    drops.emplace_back(full - centroid_separation(centroids, trial), candidate);
  }
  std::stable_sort(drops.begin(), drops.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (const auto& d : drops) trace.ranking.push_back(d.second);
  for (auto it = trace.removal_order.rbegin(); it != trace.removal_order.rend(); ++it) {
    trace.ranking.push_back(it->removed);
  }
  return trace;
}

SelectionTrace backward_elimination(std::span<const SPDMatrix> covs, std::span<const int> labels,
                                    int target_k, const FrechetOptions& opts) {
  check_training_set(covs, labels);
  const std::vector<int> classes = sorted_classes(labels);
  const std::vector<SPDMatrix> centroids = class_means(covs, labels, classes, opts);
  return backward_elimination_from_centroids(centroids, target_k);
}

}  // namespace eegemd
