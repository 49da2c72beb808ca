#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eegemd/error.hpp"

namespace eegemd {

/// Symmetric positive-definite matrix. Construction validates symmetry
/// (1e-10 relative) and positive definiteness (Cholesky), then stores the
/// exactly symmetrised value.
class SPDMatrix {
 public:
  explicit SPDMatrix(const Eigen::MatrixXd& values);

  Eigen::Index dim() const { return values_.rows(); }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Principal submatrix on `channels` (in the given order).
  SPDMatrix restrict_to(std::span<const int> channels) const;

 private:
  struct Trusted {};
  SPDMatrix(Eigen::MatrixXd values, Trusted) : values_(std::move(values)) {}
  friend SPDMatrix make_spd_trusted(Eigen::MatrixXd values);

  Eigen::MatrixXd values_;
};

/// Raised when the Fréchet mean iteration stops before reaching `tol`.
class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, int iterations, Eigen::MatrixXd last);
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }
  const Eigen::MatrixXd& last_iterate() const { return last_; }

 private:
  double residual_;
  int iterations_;
  Eigen::MatrixXd last_;
};

// Symmetric matrix functions via eigendecomposition. Eigenvalues below
// 1e-12 of the largest are clamped, and every clamp bumps a process-wide
// counter (see eigenvalue_clamp_count).
Eigen::MatrixXd sqrtm(const Eigen::MatrixXd& a);
Eigen::MatrixXd invsqrtm(const Eigen::MatrixXd& a);
Eigen::MatrixXd logm(const Eigen::MatrixXd& a);
Eigen::MatrixXd expm_sym(const Eigen::MatrixXd& a);

std::uint64_t eigenvalue_clamp_count();

/// (1 - shrinkage) * S + shrinkage * tr(S)/dim * I, where S is the sample
/// covariance (n - 1 normalisation, rows are channels, mean removed).
SPDMatrix covariance(const Eigen::MatrixXd& epoch, double shrinkage = 0.05);

/// Affine-invariant distance ||log(A^-1/2 B A^-1/2)||_F.
double riemannian_distance(const SPDMatrix& a, const SPDMatrix& b);

struct FrechetOptions {
  double tol = 1e-8;
  int max_iter = 50;
};

struct FrechetResult {
  SPDMatrix mean;
  double residual;  // ||sum_i log(M^-1/2 A_i M^-1/2)||_F at `mean`
  int iterations;
};

/// Karcher mean by Riemannian gradient descent (unit step) started at the
/// arithmetic mean. Throws ConvergenceError if the residual is still above
/// `tol` after `max_iter` updates.
FrechetResult frechet_mean(std::span<const SPDMatrix> mats, const FrechetOptions& opts = {});

/// Gradient residual of `m` as a Karcher mean of `mats`.
double frechet_residual(const SPDMatrix& m, std::span<const SPDMatrix> mats);

/// Minimum-distance-to-mean classifier. `classes` is sorted ascending; that
/// order is also the tie-break order in prediction.
struct MDMModel {
  std::vector<int> classes;
  std::vector<SPDMatrix> centroids;
  std::vector<int> channel_subset;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(channel_subset.size()); }
};

/// Fits class centroids on `channel_subset` (empty = all channels).
MDMModel mdm_fit(std::span<const SPDMatrix> covs, std::span<const int> labels,
                 std::vector<int> channel_subset = {}, const FrechetOptions& opts = {});

/// `cov` must already be restricted to the model's channel subset.
int mdm_predict(const MDMModel& model, const SPDMatrix& cov);
/// Restricts a full-montage covariance to the model's subset, then predicts.
int mdm_predict_full(const MDMModel& model, const SPDMatrix& full_cov);

struct RemovalRecord {
  int iteration;
  int removed;
  double distance;  // inter-class centroid distance left after the removal
};

struct SelectionTrace {
  std::vector<RemovalRecord> removal_order;
  std::vector<int> final_subset;  // ascending channel indices
  int initial_dim = 0;

  /// All channels, most relevant first: final subset ordered by the distance
  /// lost when each is dropped (largest first), then removed channels in
  /// reverse removal order.
  std::vector<int> ranking;
};

/// Sum over class pairs of the Riemannian distance between centroid
/// submatrices on `subset`.
double centroid_separation(std::span<const SPDMatrix> centroids, std::span<const int> subset);

/// Greedy backward elimination on class centroids: each step drops the
/// channel whose removal keeps the largest centroid separation, lowest index
/// on ties, until `target_k` channels remain.
SelectionTrace backward_elimination(std::span<const SPDMatrix> covs, std::span<const int> labels,
                                    int target_k, const FrechetOptions& opts = {});
/// Same elimination starting from precomputed full-dimension centroids.
SelectionTrace backward_elimination_from_centroids(std::span<const SPDMatrix> centroids, int target_k);

}  // namespace eegemd
