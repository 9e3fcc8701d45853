#include "cardloss/metrics.hpp"

#include "cardloss/errors.hpp"
#include "cardloss/losses.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

namespace cardloss {

namespace {

void require_labels(std::span<const int> labels, int n_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw InvalidArgument("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                            " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
}

}  // namespace

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Matrix one_hot(std::span<const int> labels, int n_classes) {
  require_labels(labels, n_classes);
  Matrix out = Matrix::Zero(static_cast<Index>(labels.size()), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) out(static_cast<Index>(i), labels[i]) = 1.0;
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 int n_classes) {
  if (y_true.size() != y_pred.size()) throw InvalidArgument("confusion_matrix: length mismatch");
  require_labels(y_true, n_classes);
  require_labels(y_pred, n_classes);
  ConfusionMatrix cm{IndexMatrix::Zero(n_classes, n_classes)};
  for (std::size_t i = 0; i < y_true.size(); ++i) ++cm.counts(y_true[i], y_pred[i]);
  return cm;
}

double accuracy(std::span<const int> y_true, const Matrix& probabilities) {
  if (y_true.empty()) throw InvalidArgument("accuracy: empty input");
  if (static_cast<Index>(y_true.size()) != probabilities.rows()) {
    throw InvalidArgument("accuracy: length mismatch");
  }
  const std::vector<int> predicted = argmax_rows(probabilities);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hits += predicted[i] == y_true[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

F1Scores f1_scores(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.empty()) throw InvalidArgument("f1_scores: empty input");
  if (y_true.size() != y_pred.size()) throw InvalidArgument("f1_scores: length mismatch");

  std::set<int> classes(y_true.begin(), y_true.end());
  classes.insert(y_pred.begin(), y_pred.end());

  double tp_total = 0.0;
  double fp_total = 0.0;
  double fn_total = 0.0;
  double f1_sum = 0.0;
  for (int c : classes) {
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool is_true = y_true[i] == c;
      const bool is_pred = y_pred[i] == c;
      tp += (is_true && is_pred) ? 1.0 : 0.0;
      fp += (!is_true && is_pred) ? 1.0 : 0.0;
      fn += (is_true && !is_pred) ? 1.0 : 0.0;
    }
    const double denom = 2.0 * tp + fp + fn;
    f1_sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
    tp_total += tp;
    fp_total += fp;
    fn_total += fn;
  }

  F1Scores out;
  out.macro = f1_sum / static_cast<double>(classes.size());
  const double denom = 2.0 * tp_total + fp_total + fn_total;
  out.micro = denom > 0.0 ? 2.0 * tp_total / denom : 0.0;
  return out;
}

double average_precision(std::span<const double> scores, std::span<const char> positive) {
  if (scores.size() != positive.size()) throw InvalidArgument("average_precision: length mismatch");
  const auto n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), char{1}));
  if (n_pos == 0.0) throw UndefinedMetric("average precision is undefined without positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (positive[order[k]]) tp += 1.0; else fp += 1.0;
    // close a step only after the last member of a tie group
    if (k + 1 < order.size() && scores[order[k + 1]] == scores[order[k]]) continue;
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return ap;
}

double pr_auc(const Matrix& y_true_onehot, const Matrix& scores) {
  if (y_true_onehot.size() == 0) throw InvalidArgument("pr_auc: empty input");
  if (y_true_onehot.rows() != scores.rows() || y_true_onehot.cols() != scores.cols()) {
    throw InvalidArgument("pr_auc: shape mismatch");
  }
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<double> flat(n);
  std::vector<char> positive(n);
  for (Index i = 0; i < scores.size(); ++i) {
    flat[static_cast<std::size_t>(i)] = scores.data()[i];
    positive[static_cast<std::size_t>(i)] = y_true_onehot.data()[i] > 0.5 ? 1 : 0;
  }
  return average_precision(flat, positive);
}

double pr_auc_macro(const Matrix& y_true_onehot, const Matrix& scores) {
  if (y_true_onehot.size() == 0) throw InvalidArgument("pr_auc_macro: empty input");
  if (y_true_onehot.rows() != scores.rows() || y_true_onehot.cols() != scores.cols()) {
    throw InvalidArgument("pr_auc_macro: shape mismatch");
  }
  double sum = 0.0;
  int counted = 0;
  const auto rows = static_cast<std::size_t>(scores.rows());
  std::vector<double> column(rows);
  std::vector<char> positive(rows);
  for (Index c = 0; c < scores.cols(); ++c) {
    for (Index i = 0; i < scores.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = scores(i, c);
      positive[static_cast<std::size_t>(i)] = y_true_onehot(i, c) > 0.5 ? 1 : 0;
    }
    if (std::find(positive.begin(), positive.end(), char{1}) == positive.end()) continue;
    sum += average_precision(column, positive);
    ++counted;
  }
  if (counted == 0) throw UndefinedMetric("pr_auc_macro: no class has positive labels");
  return sum / counted;
}

MetricsReport evaluate_predictions(std::span<const int> y_true, const Matrix& probabilities) {
  const int n_classes = static_cast<int>(probabilities.cols());
  const Matrix truth = one_hot(y_true, n_classes);
  const std::vector<int> predicted = argmax_rows(probabilities);

  MetricsReport r;
  r.accuracy = accuracy(y_true, probabilities);
  const F1Scores f1 = f1_scores(y_true, predicted);
  r.f1_micro = f1.micro;
  r.f1_macro = f1.macro;
  r.pr_auc = pr_auc(truth, probabilities);
  r.pr_auc_macro = pr_auc_macro(truth, probabilities);
  const PredictionBatch batch{truth, probabilities};
  r.cce = cce_loss(batch).value;
  r.mse = mse_loss(batch).value;
  return r;
}

}  // namespace cardloss
