#include "cardloss/invariants.hpp"

#include "cardloss/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cardloss {

namespace {

void check_scale(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw InvalidScale("scale t must be a positive finite number, got " + std::to_string(t));
  }
}

double residual_of(const Matrix& zeta, const Vector& w) {
  if (!w.allFinite()) return std::numeric_limits<double>::infinity();
  return (zeta * w - Vector::Ones(zeta.rows())).lpNorm<Eigen::Infinity>();
}

// Shared by the value and gradient paths: distances of a cloud and Z for
// scale t, computed once.
struct Geometry {
  Matrix distance;
  Matrix zeta;
};

Geometry geometry_of(const PointCloud& cloud, double t) {
  check_scale(t);
  Geometry g{distance_matrix(cloud).entries(), Matrix()};
  g.zeta = (-t * g.distance.array()).exp().matrix();
  return g;
}

// Weighting by an unblocked left-looking Cholesky factorization Z = L L^T.
// For the matrix sizes of a training batch this avoids the setup cost of the
// blocked factorization. Returns false when Z is not numerically positive
// definite or the residual is too large; the caller then falls back to
// solve_weighting.
bool small_cholesky_weighting(const Matrix& zeta, Matrix& l, Vector& w, Vector& residual) {
  const Index k = zeta.rows();
  l = zeta;
  for (Index j = 0; j < k; ++j) {
    const Index below = k - j;
    if (j > 0) {
      l.col(j).tail(below).noalias() -= l.bottomLeftCorner(below, j) * l.row(j).head(j).transpose();
    }
    const double diag = l(j, j);
    if (!(diag > 0.0)) return false;
    const double root = std::sqrt(diag);
    l(j, j) = root;
    l.col(j).tail(below - 1) /= root;
  }

  w.setOnes(k);
  l.triangularView<Eigen::Lower>().solveInPlace(w);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(w);
  if (!w.allFinite()) return false;

  residual.noalias() = zeta * w;
  return (residual.array() - 1.0).abs().maxCoeff() <= kWeightingResidualTol;
}

// Copies the strict upper triangle of a square matrix onto the lower one,
// tile by tile to keep both sides in cache.
template <typename Derived>
void mirror_upper(Eigen::MatrixBase<Derived>& a) {
  constexpr Index kTile = 32;
  const Index n = a.rows();
  for (Index jb = 0; jb < n; jb += kTile) {
    for (Index ib = 0; ib <= jb; ib += kTile) {
      const Index j_end = std::min(jb + kTile, n);
      const Index i_end = std::min(ib + kTile, n);
      for (Index j = jb; j < j_end; ++j) {
        for (Index i = ib; i < std::min(i_end, j); ++i) a(j, i) = a(i, j);
      }
    }
  }
}

}  // namespace

const char* to_string(Invariant which) noexcept {
  return which == Invariant::magnitude ? "magnitude" : "spread";
}

PointCloud::PointCloud(Matrix points) : points_(std::move(points)) {
  if (points_.rows() < 1) throw InvalidArgument("point cloud must contain at least one point");
  if (points_.cols() < 1) throw InvalidArgument("point cloud dimension must be positive");
  if (!points_.allFinite()) throw InvalidArgument("point cloud contains non-finite coordinates");
}

PointCloud PointCloud::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidArgument("point cloud must contain at least one point");
  const auto dim = static_cast<Index>(rows.front().size());
  Matrix m(static_cast<Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Index>(rows[i].size()) != dim) {
      throw InvalidArgument("point " + std::to_string(i) + " has dimension " +
                            std::to_string(rows[i].size()) + ", expected " + std::to_string(dim));
    }
    for (Index j = 0; j < dim; ++j) m(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return PointCloud(std::move(m));
}

DistanceMatrix distance_matrix(const PointCloud& cloud) {
  const Matrix& p = cloud.points();
  const Index n = p.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double dij = (p.row(i) - p.row(j)).norm();
      d(i, j) = dij;
      d(j, i) = dij;
    }
  }
  return DistanceMatrix(std::move(d));
}

SimilarityMatrix similarity_matrix(const DistanceMatrix& distances, double t) {
  check_scale(t);
  Matrix z = (-t * distances.entries().array()).exp().matrix();
  return SimilarityMatrix(std::move(z), t);
}

Weighting solve_weighting(const SimilarityMatrix& zeta) {
  const Matrix& z = zeta.entries();
  const Index n = z.rows();
  const Vector ones = Vector::Ones(n);

  Weighting out;

  Eigen::LLT<Matrix> llt(z);
  if (llt.info() == Eigen::Success) {
    out.weights = llt.solve(ones);
    out.residual = residual_of(z, out.weights);
    out.method = SolveMethod::cholesky;
    if (out.residual <= kWeightingResidualTol) return out;
  }

  Eigen::FullPivLU<Matrix> lu(z);
  if (lu.isInvertible()) {
    out.weights = lu.solve(ones);
    out.residual = residual_of(z, out.weights);
    out.method = SolveMethod::pivoted_lu;
    if (out.residual <= kWeightingResidualTol) return out;
  }

  Matrix shifted = z;
  shifted.diagonal().array() += kWeightingJitter;
  Eigen::FullPivLU<Matrix> jittered(shifted);
  jittered.setThreshold(0.0);
  out.weights = jittered.solve(ones);
  out.residual = residual_of(z, out.weights);
  out.method = SolveMethod::jitter;
  if (out.residual <= kWeightingResidualTol) return out;

  throw SingularSimilarity("similarity matrix of size " + std::to_string(n) +
                           " admits no weighting (residual " + std::to_string(out.residual) +
                           "); coincident or numerically degenerate points");
}

double magnitude(const PointCloud& cloud, double t) {
  const Geometry g = geometry_of(cloud, t);
  return solve_weighting(SimilarityMatrix(g.zeta, t)).weights.sum();
}

double spread(const PointCloud& cloud, double t) {
  const Geometry g = geometry_of(cloud, t);
  return g.zeta.rowwise().sum().cwiseInverse().sum();
}

std::vector<ScanPoint> scale_scan(const PointCloud& cloud, std::span<const double> t_grid,
                                  Invariant which) {
  if (t_grid.empty()) throw InvalidArgument("scale grid is empty");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    check_scale(t_grid[i]);
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) {
      throw InvalidArgument("scale grid must be strictly increasing");
    }
  }

  const Matrix distance = distance_matrix(cloud).entries();
  std::vector<ScanPoint> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    ScanPoint sp{t, std::nullopt};
    Matrix zeta = (-t * distance.array()).exp().matrix();
    if (which == Invariant::spread) {
      sp.value = zeta.rowwise().sum().cwiseInverse().sum();
    } else {
      try {
        sp.value = solve_weighting(SimilarityMatrix(std::move(zeta), t)).weights.sum();
      } catch (const SingularSimilarity&) {
        // finitely many t may be singular; leave the entry empty
      }
    }
    out.push_back(sp);
  }
  return out;
}

ValueAndGradient magnitude_with_gradient(const PointCloud& cloud, double t) {
  return set_invariant_with_gradient(Invariant::magnitude, cloud.points(), t, -1.0);
}

ValueAndGradient spread_with_gradient(const PointCloud& cloud, double t) {
  return set_invariant_with_gradient(Invariant::spread, cloud.points(), t, -1.0);
}

ValueAndGradient set_invariant_with_gradient(Invariant which, const Matrix& points, double t,
                                             double tol, bool fixed_first_row) {
  check_scale(t);
  const Index m = points.rows();
  const Index dim = points.cols();
  if (m < 1 || dim < 1) throw InvalidArgument("set invariant of an empty point set");
  if (!points.allFinite()) throw InvalidArgument("point set contains non-finite coordinates");

  // Called once per training batch; buffers are reused across calls on a thread.
  struct Workspace {
    Matrix kept, dist, zeta, coeff, factor, rep_grad;
    Vector w, row_sum, scratch, acc;
    std::vector<Index> group;
    std::vector<double> multiplicity;
  };
  thread_local Workspace ws;

  // Greedy grouping. kept holds the representatives seen so far, one per row,
  // so each coordinate is contiguous over representatives. The distances from
  // a new representative to the earlier ones form the upper part of its
  // column of the distance matrix.
  if (ws.dist.rows() < m) ws.dist.resize(m, m);
  if (ws.kept.rows() < m || ws.kept.cols() != dim) ws.kept.resize(m, dim);
  ws.acc.resize(m);
  ws.multiplicity.clear();
  ws.group.resize(static_cast<std::size_t>(m));
  Index k = 0;
  for (Index i = 0; i < m; ++i) {
    auto acc = ws.acc.head(k);
    acc.setZero();
    for (Index c = 0; c < dim; ++c) {
      acc.array() += (ws.kept.col(c).head(k).array() - points(i, c)).square();
    }
    auto column = ws.dist.col(k).head(k);
    column = acc.cwiseSqrt();
    Index joined = -1;
    if (tol >= 0.0) {
      for (Index r = 0; r < k; ++r) {
        if (column(r) <= tol) {
          joined = r;
          break;
        }
      }
    }
    if (joined < 0) {
      joined = k;
      ws.dist(k, k) = 0.0;
      ws.kept.row(k) = points.row(i);
      ws.multiplicity.push_back(0.0);
      ++k;
    }
    ws.multiplicity[static_cast<std::size_t>(joined)] += 1.0;
    ws.group[static_cast<std::size_t>(i)] = joined;
  }

  auto dist = ws.dist.topLeftCorner(k, k);
  mirror_upper(dist);
  const auto kept = ws.kept.topRows(k);
  ws.zeta = (-t * dist.array()).exp();
  ws.row_sum = ws.zeta.colwise().sum().transpose();

  // gradient of representative a is sum_b coeff(a,b) (x_a - x_b)
  ws.coeff = (dist.array() > 0.0).select(ws.zeta.array() / dist.array(), 0.0);
  double value = 0.0;
  if (which == Invariant::magnitude) {
    if (!small_cholesky_weighting(ws.zeta, ws.factor, ws.w, ws.scratch)) {
      ws.w = solve_weighting(SimilarityMatrix(ws.zeta, t)).weights;
    }
    value = ws.w.sum();
    ws.scratch = (2.0 * t) * ws.w;
    ws.coeff = ws.scratch.asDiagonal() * ws.coeff * ws.w.asDiagonal();
  } else {
    value = ws.row_sum.cwiseInverse().sum();
    ws.scratch = t * ws.row_sum.array().square().inverse();
    ws.coeff = ws.scratch.asDiagonal() * ws.coeff + ws.coeff * ws.scratch.asDiagonal();
  }
  ws.scratch = ws.coeff.colwise().sum().transpose();
  ws.rep_grad.noalias() = ws.scratch.asDiagonal() * kept;
  ws.rep_grad.noalias() -= ws.coeff * kept;

  ValueAndGradient out{value, Matrix(m, dim)};
  for (Index i = 0; i < m; ++i) {
    const Index g = ws.group[static_cast<std::size_t>(i)];
    if (fixed_first_row && g == 0) {
      out.gradient.row(i).setZero();
    } else {
      out.gradient.row(i) = ws.rep_grad.row(g) / ws.multiplicity[static_cast<std::size_t>(g)];
    }
  }
  return out;
}

Matrix magnitude_gradient(const PointCloud& cloud, double t) {
  return magnitude_with_gradient(cloud, t).gradient;
}

Matrix spread_gradient(const PointCloud& cloud, double t) {
  return spread_with_gradient(cloud, t).gradient;
}

DedupResult dedup(const PointCloud& cloud, double tol) {
  if (!(tol >= 0.0)) throw InvalidArgument("dedup tolerance must be nonnegative");
  const Matrix& p = cloud.points();
  const Index n = p.rows();

  std::vector<Index> reps;  // original indices of representatives
  std::vector<Index> multiplicities;
  std::vector<Index> representative(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Index joined = -1;
    for (std::size_t r = 0; r < reps.size(); ++r) {
      if ((p.row(i) - p.row(reps[r])).norm() <= tol) {
        joined = static_cast<Index>(r);
        break;
      }
    }
    if (joined < 0) {
      joined = static_cast<Index>(reps.size());
      reps.push_back(i);
      multiplicities.push_back(0);
    }
    ++multiplicities[static_cast<std::size_t>(joined)];
    representative[static_cast<std::size_t>(i)] = joined;
  }

  Matrix kept(static_cast<Index>(reps.size()), p.cols());
  for (std::size_t r = 0; r < reps.size(); ++r) kept.row(static_cast<Index>(r)) = p.row(reps[r]);
  return DedupResult{PointCloud(std::move(kept)), std::move(multiplicities),
                     std::move(representative)};
}

double diameter(const PointCloud& cloud) {
  return distance_matrix(cloud).entries().maxCoeff();
}

}  // namespace cardloss
