#pragma once

// Classification and triplet losses. Every loss returns its value together
// with the gradient with respect to its differentiable inputs.
//
// The cardinality losses treat the batch of error vectors y_true - y_pred as
// a set: the zero vector is added, near-identical vectors are merged, and the
// invariant of the resulting cloud minus one is the loss. A batch that repeats
// one mistake k times therefore costs the same as the single mistake.

#include "cardloss/invariants.hpp"

#include <string_view>

namespace cardloss {

/// One batch of one-hot targets and simplex predictions, both b x n.
struct PredictionBatch {
  Matrix y_true;
  Matrix y_pred;

  /// Builds a batch after checking one-hot targets and simplex rows
  /// (entries in [0,1], row sums within 1e-6 of 1). Throws InvalidArgument.
  static PredictionBatch checked(Matrix y_true, Matrix y_pred);

  Index batch_size() const noexcept { return y_true.rows(); }
  Index n_classes() const noexcept { return y_true.cols(); }
};

struct LossResult {
  double value = 0.0;
  /// d value / d y_pred, same shape as y_pred.
  Matrix grad;
};

enum class LossKind { magnitude, spread, cce, mse };

const char* to_string(LossKind kind) noexcept;
/// Accepts "magnitude", "spread", "cce", "mse". Throws InvalidArgument.
LossKind parse_loss_kind(std::string_view name);

/// Probabilities are clamped to [kCceClamp, 1 - kCceClamp] before the log.
inline constexpr double kCceClamp = 1e-7;

LossResult magnitude_loss(const PredictionBatch& batch, double dedup_tol = kDedupTolerance);
LossResult spread_loss(const PredictionBatch& batch, double dedup_tol = kDedupTolerance);
LossResult cce_loss(const PredictionBatch& batch);
LossResult mse_loss(const PredictionBatch& batch);

LossResult evaluate_loss(LossKind kind, const PredictionBatch& batch);

/// 1 - exp(-|y_true - y_pred|^2 / 2). Not used in training.
double welsch_leclerc(const Eigen::Ref<const Vector>& y_true, const Eigen::Ref<const Vector>& y_pred);

/// Triplets (s, p, n): raw anchor/negative inputs plus the network's
/// embeddings of anchor, positive and negative. All b x k (inputs b x m).
struct TripletBatch {
  Matrix anchor_inputs;
  Matrix negative_inputs;
  Matrix anchor_emb;
  Matrix positive_emb;
  Matrix negative_emb;
  double temperature = 1.0;

  /// Throws InvalidArgument on shape mismatch, non-finite data or temperature <= 0.
  void validate() const;
  Index batch_size() const noexcept { return anchor_emb.rows(); }
};

struct TripletLossResult {
  double value = 0.0;
  Matrix grad_anchor_emb;
  Matrix grad_positive_emb;
  Matrix grad_negative_emb;
  /// Nonzero only when the divisor is built from raw inputs.
  Matrix grad_anchor_inputs;
  Matrix grad_negative_inputs;
};

/// mean_i log(1 + exp(-(a_i . p_i - a_i . n_i) / tau)).
TripletLossResult contrastive_base_loss(const TripletBatch& batch);

/// Which difference set the division losses measure.
enum class DivisorSource {
  raw_inputs,  ///< s - n
  embeddings,  ///< N(s) - N(n)
};

/// base.value / |{s - n}| at scale 1, no zero vector appended. `base` must
/// come from contrastive_base_loss on the same batch.
TripletLossResult division_magnitude_loss(const TripletBatch& batch, const TripletLossResult& base,
                                          DivisorSource source = DivisorSource::raw_inputs,
                                          double dedup_tol = kDedupTolerance);

/// As division_magnitude_loss with the spread as divisor.
TripletLossResult division_spread_loss(const TripletBatch& batch, const TripletLossResult& base,
                                       DivisorSource source = DivisorSource::raw_inputs,
                                       double dedup_tol = kDedupTolerance);

}  // namespace cardloss
