#include "cardloss/losses.hpp"

#include "cardloss/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cardloss {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
}

void require_nonempty(const PredictionBatch& batch, const char* what) {
  require_same_shape(batch.y_true, batch.y_pred, what);
  if (batch.y_true.rows() == 0 || batch.y_true.cols() == 0) {
    throw InvalidArgument(std::string(what) + ": empty batch");
  }
}

// |{y_true - y_pred} u {0}| - 1 (or the spread analogue). Row 0 of the set is
// the zero vector, so errors within tolerance of zero join its group and get
// no gradient.
LossResult cardinality_loss(Invariant which, const PredictionBatch& batch, double tol) {
  require_nonempty(batch, to_string(which));
  const Index b = batch.batch_size();
  const Index n = batch.n_classes();

  Matrix points(b + 1, n);
  points.row(0).setZero();
  points.bottomRows(b) = batch.y_true - batch.y_pred;

  const ValueAndGradient vg = set_invariant_with_gradient(which, points, 1.0, tol, true);
  // error = y_true - y_pred, so d/dy_pred = -d/derror
  return LossResult{vg.value - 1.0, -vg.gradient.bottomRows(b)};
}

TripletLossResult division_loss(Invariant which, const TripletBatch& batch,
                                const TripletLossResult& base, DivisorSource source, double tol) {
  batch.validate();
  require_same_shape(base.grad_anchor_emb, batch.anchor_emb, "division loss base");

  const Matrix differences = source == DivisorSource::raw_inputs
                                 ? Matrix(batch.anchor_inputs - batch.negative_inputs)
                                 : Matrix(batch.anchor_emb - batch.negative_emb);
  const ValueAndGradient div = set_invariant_with_gradient(which, differences, 1.0, tol);

  TripletLossResult out;
  out.value = base.value / div.value;
  out.grad_anchor_emb = base.grad_anchor_emb / div.value;
  out.grad_positive_emb = base.grad_positive_emb / div.value;
  out.grad_negative_emb = base.grad_negative_emb / div.value;
  out.grad_anchor_inputs = Matrix::Zero(batch.anchor_inputs.rows(), batch.anchor_inputs.cols());
  out.grad_negative_inputs = Matrix::Zero(batch.negative_inputs.rows(), batch.negative_inputs.cols());

  // quotient rule: d(base/div) = -base/div^2 * d div
  const Matrix through_divisor = (-base.value / (div.value * div.value)) * div.gradient;
  if (source == DivisorSource::raw_inputs) {
    out.grad_anchor_inputs += through_divisor;
    out.grad_negative_inputs -= through_divisor;
  } else {
    out.grad_anchor_emb += through_divisor;
    out.grad_negative_emb -= through_divisor;
  }
  return out;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

PredictionBatch PredictionBatch::checked(Matrix y_true, Matrix y_pred) {
  PredictionBatch batch{std::move(y_true), std::move(y_pred)};
  require_nonempty(batch, "prediction batch");
  for (Index i = 0; i < batch.batch_size(); ++i) {
    const auto t = batch.y_true.row(i);
    const Index ones = (t.array() == 1.0).count();
    const Index zeros = (t.array() == 0.0).count();
    if (ones != 1 || ones + zeros != t.size()) {
      throw InvalidArgument("y_true row " + std::to_string(i) + " is not one-hot");
    }
    const auto p = batch.y_pred.row(i);
    if (!p.allFinite() || p.minCoeff() < 0.0 || p.maxCoeff() > 1.0 ||
        std::abs(p.sum() - 1.0) > 1e-6) {
      throw InvalidArgument("y_pred row " + std::to_string(i) + " is not on the probability simplex");
    }
  }
  return batch;
}

const char* to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::magnitude: return "magnitude";
    case LossKind::spread: return "spread";
    case LossKind::cce: return "cce";
    case LossKind::mse: return "mse";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "magnitude") return LossKind::magnitude;
  if (name == "spread") return LossKind::spread;
  if (name == "cce") return LossKind::cce;
  if (name == "mse") return LossKind::mse;
  throw InvalidArgument("unknown loss '" + std::string(name) +
                        "' (expected magnitude, spread, cce or mse)");
}

LossResult magnitude_loss(const PredictionBatch& batch, double dedup_tol) {
  return cardinality_loss(Invariant::magnitude, batch, dedup_tol);
}

LossResult spread_loss(const PredictionBatch& batch, double dedup_tol) {
  return cardinality_loss(Invariant::spread, batch, dedup_tol);
}

LossResult cce_loss(const PredictionBatch& batch) {
  require_nonempty(batch, "cce");
  const Index b = batch.batch_size();
  LossResult out{0.0, Matrix::Zero(b, batch.n_classes())};
  for (Index i = 0; i < b; ++i) {
    Index label = 0;
    batch.y_true.row(i).maxCoeff(&label);
    const double raw = batch.y_pred(i, label);
    const double p = std::clamp(raw, kCceClamp, 1.0 - kCceClamp);
    out.value -= std::log(p);
    if (raw > kCceClamp && raw < 1.0 - kCceClamp) {
      out.grad(i, label) = -1.0 / (p * static_cast<double>(b));
    }
  }
  out.value /= static_cast<double>(b);
  return out;
}

LossResult mse_loss(const PredictionBatch& batch) {
  require_nonempty(batch, "mse");
  const double count = static_cast<double>(batch.y_pred.size());
  const Matrix diff = batch.y_pred - batch.y_true;
  return LossResult{diff.squaredNorm() / count, (2.0 / count) * diff};
}

LossResult evaluate_loss(LossKind kind, const PredictionBatch& batch) {
  switch (kind) {
    case LossKind::magnitude: return magnitude_loss(batch);
    case LossKind::spread: return spread_loss(batch);
    case LossKind::cce: return cce_loss(batch);
    case LossKind::mse: return mse_loss(batch);
  }
  throw InvalidArgument("unknown loss kind");
}

double welsch_leclerc(const Eigen::Ref<const Vector>& y_true, const Eigen::Ref<const Vector>& y_pred) {
  if (y_true.size() != y_pred.size()) throw InvalidArgument("welsch_leclerc: length mismatch");
  return -std::expm1(-0.5 * (y_true - y_pred).squaredNorm());
}

void TripletBatch::validate() const {
  const Index b = anchor_emb.rows();
  if (b == 0) throw InvalidArgument("triplet batch is empty");
  require_same_shape(anchor_emb, positive_emb, "triplet embeddings");
  require_same_shape(anchor_emb, negative_emb, "triplet embeddings");
  require_same_shape(anchor_inputs, negative_inputs, "triplet inputs");
  if (anchor_inputs.rows() != b) throw InvalidArgument("triplet inputs and embeddings disagree on batch size");
  if (!anchor_inputs.allFinite() || !negative_inputs.allFinite() || !anchor_emb.allFinite() ||
      !positive_emb.allFinite() || !negative_emb.allFinite()) {
    throw InvalidArgument("triplet batch contains non-finite values");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("temperature must be positive");
  }
}

TripletLossResult contrastive_base_loss(const TripletBatch& batch) {
  batch.validate();
  const Index b = batch.batch_size();
  const double tau = batch.temperature;

  TripletLossResult out;
  out.grad_anchor_emb = Matrix::Zero(b, batch.anchor_emb.cols());
  out.grad_positive_emb = Matrix::Zero(b, batch.anchor_emb.cols());
  out.grad_negative_emb = Matrix::Zero(b, batch.anchor_emb.cols());
  out.grad_anchor_inputs = Matrix::Zero(b, batch.anchor_inputs.cols());
  out.grad_negative_inputs = Matrix::Zero(b, batch.anchor_inputs.cols());

  for (Index i = 0; i < b; ++i) {
    const auto a = batch.anchor_emb.row(i);
    const auto gap = (batch.positive_emb.row(i) - batch.negative_emb.row(i)).eval();
    const double margin = a.dot(gap);
    out.value += softplus(-margin / tau);
    // d log(1 + e^{-m/tau}) / dm = -sigmoid(-m/tau) / tau
    const double g = -logistic(-margin / tau) / (tau * static_cast<double>(b));
    out.grad_anchor_emb.row(i) = g * gap;
    out.grad_positive_emb.row(i) = g * a;
    out.grad_negative_emb.row(i) = -g * a;
  }
  out.value /= static_cast<double>(b);
  return out;
}

TripletLossResult division_magnitude_loss(const TripletBatch& batch, const TripletLossResult& base,
                                          DivisorSource source, double dedup_tol) {
  return division_loss(Invariant::magnitude, batch, base, source, dedup_tol);
}

TripletLossResult division_spread_loss(const TripletBatch& batch, const TripletLossResult& base,
                                       DivisorSource source, double dedup_tol) {
  return division_loss(Invariant::spread, batch, base, source, dedup_tol);
}

}  // namespace cardloss
