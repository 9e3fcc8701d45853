#include "cardloss/nn.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace cardloss {

namespace {

struct Activations {
  Matrix pre_hidden;  // X W1^T + b1
  Matrix hidden;      // relu(pre_hidden)
  Matrix probs;
};

Activations run_forward(const MLPModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw InvalidArgument("forward: input has " + std::to_string(inputs.cols()) +
                          " features, model expects " + std::to_string(model.input_dim()));
  }
  if (!inputs.allFinite()) throw InvalidArgument("forward: non-finite input");

  Activations a;
  a.pre_hidden = inputs * model.w1.transpose();
  a.pre_hidden.rowwise() += model.b1.transpose();
  a.hidden = a.pre_hidden.cwiseMax(0.0);
  Matrix logits = a.hidden * model.w2.transpose();
  logits.rowwise() += model.b2.transpose();

  const Vector row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  a.probs = logits.array().exp().matrix();
  const Vector row_sum = a.probs.rowwise().sum();
  a.probs.array().colwise() /= row_sum.array();
  return a;
}

}  // namespace

bool MLPModel::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be a nonnegative finite number");
  }
  if (epochs < 0) throw InvalidArgument("epochs must be nonnegative");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
}

MLPModel init_model(int input_dim, int hidden_dim, int n_classes, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || n_classes < 1) {
    throw InvalidArgument("init_model: dimensions must be positive");
  }
  Rng rng(seed);
  const auto glorot = [&rng](Index rows, Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    }
    return m;
  };
  MLPModel m;
  m.w1 = glorot(hidden_dim, input_dim);
  m.b1 = Vector::Zero(hidden_dim);
  m.w2 = glorot(n_classes, hidden_dim);
  m.b2 = Vector::Zero(n_classes);
  return m;
}

Matrix forward(const MLPModel& model, const Matrix& inputs) {
  return run_forward(model, inputs).probs;
}

LossAndGradient loss_and_gradient(const MLPModel& model, const Matrix& inputs,
                                  const Matrix& targets_onehot, LossKind loss) {
  if (inputs.rows() == 0) throw InvalidArgument("empty batch");
  if (targets_onehot.rows() != inputs.rows() || targets_onehot.cols() != model.n_classes()) {
    throw InvalidArgument("targets do not match batch size and class count");
  }
  const Activations a = run_forward(model, inputs);
  const LossResult lr = evaluate_loss(loss, PredictionBatch{targets_onehot, a.probs});

  // softmax Jacobian: dL/dz = p * (g - <g, p>) row by row
  const Vector inner = (lr.grad.array() * a.probs.array()).rowwise().sum();
  Matrix d_logits = a.probs.array() * (lr.grad.colwise() - inner).array();

  LossAndGradient out;
  out.value = lr.value;
  out.grad.w2 = d_logits.transpose() * a.hidden;
  out.grad.b2 = d_logits.colwise().sum().transpose();
  Matrix d_hidden = d_logits * model.w2;
  d_hidden.array() *= (a.pre_hidden.array() > 0.0).cast<double>();
  out.grad.w1 = d_hidden.transpose() * inputs;
  out.grad.b1 = d_hidden.colwise().sum().transpose();
  return out;
}

double train_step(MLPModel& model, const Matrix& inputs, const Matrix& targets_onehot,
                  LossKind loss, double learning_rate) {
  const LossAndGradient lg = loss_and_gradient(model, inputs, targets_onehot, loss);
  if (!std::isfinite(lg.value) || !lg.grad.w1.allFinite() || !lg.grad.b1.allFinite() ||
      !lg.grad.w2.allFinite() || !lg.grad.b2.allFinite()) {
    throw DivergenceError(std::string("non-finite ") + to_string(loss) + " loss or gradient", -1, -1);
  }
  model.w1 -= learning_rate * lg.grad.w1;
  model.b1 -= learning_rate * lg.grad.b1;
  model.w2 -= learning_rate * lg.grad.w2;
  model.b2 -= learning_rate * lg.grad.b2;
  if (!model.all_finite()) {
    throw DivergenceError("parameters became non-finite", -1, -1);
  }
  return lg.value;
}

TrainTrace train(MLPModel& model, const SplitDataset& data, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
  config.validate();
  const Dataset& tr = data.train;
  if (tr.n_samples() == 0 || data.test.n_samples() == 0) throw InvalidArgument("train: empty split");
  if (tr.features.cols() != model.input_dim()) throw InvalidArgument("train: feature count mismatch");
  if (tr.n_classes > model.n_classes() || data.test.n_classes > model.n_classes()) {
    throw InvalidArgument("train: dataset has more classes than the model");
  }

  const auto n_classes = static_cast<int>(model.n_classes());
  const Matrix train_targets = one_hot(tr.labels, n_classes);
  // decorrelate the shuffle stream from a model initialised with the same seed
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> order(static_cast<std::size_t>(tr.n_samples()));
  for (Index i = 0; i < tr.n_samples(); ++i) order[static_cast<std::size_t>(i)] = i;

  TrainTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.epochs));
  Matrix batch_x;
  Matrix batch_y;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      const auto rows = static_cast<Index>(end - begin);
      batch_x.resize(rows, tr.features.cols());
      batch_y.resize(rows, n_classes);
      for (Index r = 0; r < rows; ++r) {
        const Index src = order[begin + static_cast<std::size_t>(r)];
        batch_x.row(r) = tr.features.row(src);
        batch_y.row(r) = train_targets.row(src);
      }
      try {
        loss_sum += train_step(model, batch_x, batch_y, config.loss, config.learning_rate);
      } catch (const DivergenceError& e) {
        throw TrainingDiverged(DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                                   ", batch " + std::to_string(batches + 1),
                                               epoch, batches + 1),
                               std::move(trace));
      }
      ++batches;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batches;
    rec.test = evaluate_predictions(data.test.labels, forward(model, data.test.features));
    rec.seconds = seconds;
    trace.records.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return trace;
}

}  // namespace cardloss
