#pragma once

// Cardinality-like invariants of finite Euclidean point clouds.
//
// For a cloud X = {x_1..x_n} with distance matrix D and similarity matrix
// Z = exp(-t D), a weighting is any w with Z w = 1; the magnitude is sum(w).
// The spread is sum_i 1 / sum_j Z_ij and needs no linear solve.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace cardloss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Absolute Euclidean distance below which two points are treated as one.
inline constexpr double kDedupTolerance = 1e-9;

/// Accepted weightings satisfy max|Z w - 1| <= this.
inline constexpr double kWeightingResidualTol = 1e-8;

/// Diagonal shift used by the last-resort weighting solve.
inline constexpr double kWeightingJitter = 1e-12;

/// Finite set of points in R^dim, one point per row. Never empty.
class PointCloud {
 public:
  /// Throws InvalidArgument on zero rows, zero columns or non-finite entries.
  explicit PointCloud(Matrix points);

  static PointCloud from_rows(const std::vector<std::vector<double>>& rows);

  Index cardinality() const noexcept { return points_.rows(); }
  Index dim() const noexcept { return points_.cols(); }
  const Matrix& points() const noexcept { return points_; }
  auto point(Index i) const { return points_.row(i); }

 private:
  Matrix points_;
};

class DistanceMatrix {
 public:
  explicit DistanceMatrix(Matrix entries) : entries_(std::move(entries)) {}

  const Matrix& entries() const noexcept { return entries_; }
  Index size() const noexcept { return entries_.rows(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

class SimilarityMatrix {
 public:
  SimilarityMatrix(Matrix entries, double scale)
      : entries_(std::move(entries)), scale_(scale) {}

  const Matrix& entries() const noexcept { return entries_; }
  double scale() const noexcept { return scale_; }
  Index size() const noexcept { return entries_.rows(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
  double scale_;
};

enum class SolveMethod { cholesky, pivoted_lu, jitter };

struct Weighting {
  Vector weights;
  /// max-norm of (Z w - 1), measured against the unregularized Z.
  double residual = 0.0;
  SolveMethod method = SolveMethod::cholesky;

  bool regularized() const noexcept { return method == SolveMethod::jitter; }
};

enum class Invariant { magnitude, spread };

const char* to_string(Invariant which) noexcept;

/// Value of an invariant together with its gradient, one row per point.
struct ValueAndGradient {
  double value = 0.0;
  Matrix gradient;
};

struct ScanPoint {
  double t = 0.0;
  /// Empty where the magnitude could not be evaluated.
  std::optional<double> value;
};

struct DedupResult {
  PointCloud cloud;
  /// multiplicities[k] = number of input points collapsed onto representative k.
  std::vector<Index> multiplicities;
  /// representative[i] = index in `cloud` of the group input point i joined.
  std::vector<Index> representative;
};

DistanceMatrix distance_matrix(const PointCloud& cloud);

/// exp(-t * D) elementwise. Throws InvalidScale unless t > 0.
SimilarityMatrix similarity_matrix(const DistanceMatrix& distances, double t = 1.0);

/// Solves Z w = 1: Cholesky, then full-pivot LU, then one retry with
/// Z + 1e-12 I. Throws SingularSimilarity when none reaches the residual
/// tolerance.
Weighting solve_weighting(const SimilarityMatrix& zeta);

double magnitude(const PointCloud& cloud, double t = 1.0);
double spread(const PointCloud& cloud, double t = 1.0);

/// Evaluates the chosen invariant of tX for each t of a strictly increasing,
/// positive grid. Magnitude failures become empty entries.
std::vector<ScanPoint> scale_scan(const PointCloud& cloud,
                                  std::span<const double> t_grid,
                                  Invariant which);

/// d|tX|/dx_k = sum_{j != k} 2 t w_k w_j exp(-t d_kj) (x_k - x_j) / d_kj.
/// Pairs at zero distance contribute nothing.
ValueAndGradient magnitude_with_gradient(const PointCloud& cloud, double t = 1.0);

/// dE/dx_k = sum_{l != k} (1/r_k^2 + 1/r_l^2) t exp(-t d_kl) (x_k - x_l) / d_kl
/// with r_i the i-th row sum of Z.
ValueAndGradient spread_with_gradient(const PointCloud& cloud, double t = 1.0);

/// Invariant of the set formed by the rows of `points`, rows within `tol`
/// merged greedily as in dedup() (tol < 0 disables merging), together with
/// the gradient for every original row: members of a merged group share the
/// representative's gradient equally. With `fixed_first_row`, row 0 is a
/// constant and its group receives no gradient.
ValueAndGradient set_invariant_with_gradient(Invariant which, const Matrix& points, double t,
                                             double tol, bool fixed_first_row = false);

Matrix magnitude_gradient(const PointCloud& cloud, double t = 1.0);
Matrix spread_gradient(const PointCloud& cloud, double t = 1.0);

/// Greedy collapse: each point joins the first representative within `tol`,
/// otherwise becomes a new representative. Throws InvalidArgument if tol < 0.
DedupResult dedup(const PointCloud& cloud, double tol = kDedupTolerance);

/// Largest pairwise distance; 0 for a single point.
double diameter(const PointCloud& cloud);

}  // namespace cardloss
