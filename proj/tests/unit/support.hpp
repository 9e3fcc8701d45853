#pragma once

#include "cardloss/invariants.hpp"
#include "cardloss/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace cltest {

using cardloss::Index;
using cardloss::Matrix;

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Largest entrywise error of `analytic` against central differences of f,
// relative to max(1, |entry|) so near-zero entries are compared absolutely.
inline double fd_mismatch(const std::function<double(const Matrix&)>& f, const Matrix& at,
                          const Matrix& analytic, double h = 1e-5) {
  Matrix x = at;
  double worst = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + h;
      const double up = f(x);
      x(i, j) = keep - h;
      const double down = f(x);
      x(i, j) = keep;
      worst = std::max(worst, rel_err((up - down) / (2.0 * h), analytic(i, j)));
    }
  }
  return worst;
}

inline Matrix random_matrix(cardloss::Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Random cloud whose points are pairwise at least min_sep apart.
inline Matrix separated_cloud(cardloss::Rng& rng, Index n, Index dim, double min_sep,
                              double scale = 1.0) {
  Matrix m(n, dim);
  Index filled = 0;
  while (filled < n) {
    m.row(filled) = random_matrix(rng, 1, dim, scale);
    bool ok = true;
    for (Index k = 0; k < filled && ok; ++k) ok = (m.row(k) - m.row(filled)).norm() >= min_sep;
    if (ok) ++filled;
  }
  return m;
}

// Rows of softmax(z) for random logits z, and matching one-hot targets.
inline Matrix random_simplex(cardloss::Rng& rng, Index rows, Index cols, double spread = 2.0) {
  Matrix p = random_matrix(rng, rows, cols, spread);
  for (Index i = 0; i < rows; ++i) {
    p.row(i) = (p.row(i).array() - p.row(i).maxCoeff()).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline Matrix random_onehot(cardloss::Rng& rng, Index rows, Index cols) {
  Matrix t = Matrix::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i) t(i, static_cast<Index>(rng.below(static_cast<std::uint64_t>(cols)))) = 1.0;
  return t;
}

}  // namespace cltest
