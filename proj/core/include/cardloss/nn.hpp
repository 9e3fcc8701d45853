#pragma once

// One-hidden-layer ReLU classifier with a softmax head, trained by plain
// mini-batch SGD against any of the classification losses.

#include "cardloss/errors.hpp"
#include "cardloss/losses.hpp"
#include "cardloss/metrics.hpp"
#include "cardloss/synthdata.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace cardloss {

inline constexpr int kDefaultHidden = 32;

struct MLPModel {
  Matrix w1;  ///< hidden x input
  Vector b1;
  Matrix w2;  ///< classes x hidden
  Vector b2;

  Index input_dim() const noexcept { return w1.cols(); }
  Index hidden_dim() const noexcept { return w1.rows(); }
  Index n_classes() const noexcept { return w2.rows(); }
  bool all_finite() const;
};

/// Parameter gradient, laid out like MLPModel.
struct ModelGradient {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 100;
  int batch_size = 32;
  LossKind loss = LossKind::cce;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;           ///< 1-based
  double train_loss = 0.0; ///< mean batch loss over the epoch
  MetricsReport test;
  double seconds = 0.0;    ///< wall time of the epoch's training pass
};

struct TrainTrace {
  std::vector<EpochRecord> records;
};

/// Thrown by train(); carries the epochs that completed before divergence.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const DivergenceError& cause, TrainTrace partial)
      : DivergenceError(cause), partial_(std::move(partial)) {}

  const TrainTrace& partial() const noexcept { return partial_; }

 private:
  TrainTrace partial_;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MLPModel init_model(int input_dim, int hidden_dim, int n_classes, std::uint64_t seed);

/// softmax(W2 relu(W1 x + b1) + b2) per row. Throws InvalidArgument on
/// non-finite input or a dimension mismatch.
Matrix forward(const MLPModel& model, const Matrix& inputs);

struct LossAndGradient {
  double value = 0.0;
  ModelGradient grad;
};

/// Loss of the model on one batch and its gradient over every parameter.
LossAndGradient loss_and_gradient(const MLPModel& model, const Matrix& inputs,
                                  const Matrix& targets_onehot, LossKind loss);

/// One SGD update in place; returns the batch loss before the update.
/// Throws DivergenceError (epoch/batch -1) on a non-finite loss or gradient.
double train_step(MLPModel& model, const Matrix& inputs, const Matrix& targets_onehot,
                  LossKind loss, double learning_rate);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded per-epoch shuffle, mini-batches with the short tail kept, test-set
/// evaluation after each epoch. Throws TrainingDiverged.
TrainTrace train(MLPModel& model, const SplitDataset& data, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

}  // namespace cardloss
