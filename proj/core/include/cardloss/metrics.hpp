#pragma once

#include "cardloss/invariants.hpp"

#include <span>
#include <vector>

namespace cardloss {

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  IndexMatrix counts;

  Index total() const { return counts.sum(); }
};

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double f1_micro = 0.0;
  double f1_macro = 0.0;
  double pr_auc = 0.0;        ///< micro-averaged average precision
  double pr_auc_macro = 0.0;  ///< mean per-class average precision
  double cce = 0.0;
  double mse = 0.0;
};

/// Per-row argmax; ties go to the lowest class index.
std::vector<int> argmax_rows(const Matrix& scores);

/// Throws InvalidArgument on a label outside [0, n_classes).
Matrix one_hot(std::span<const int> labels, int n_classes);

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 int n_classes);

/// Fraction of rows whose argmax equals the label. Throws on empty input.
double accuracy(std::span<const int> y_true, const Matrix& probabilities);

/// One-vs-rest F1 over the classes occurring in either labeling; a class with
/// no predicted or no true members scores 0 (0/0 := 0).
F1Scores f1_scores(std::span<const int> y_true, std::span<const int> y_pred);

/// Step-wise average precision sum (R_k - R_{k-1}) P_k over distinct score
/// thresholds, descending. Throws UndefinedMetric without positives.
double average_precision(std::span<const double> scores, std::span<const char> positive);

/// Micro-averaged PR-AUC: all (score, label) pairs of all classes pooled.
double pr_auc(const Matrix& y_true_onehot, const Matrix& scores);

/// Mean per-class average precision over classes with at least one positive.
double pr_auc_macro(const Matrix& y_true_onehot, const Matrix& scores);

/// Every metric of the trace for one evaluation pass.
MetricsReport evaluate_predictions(std::span<const int> y_true, const Matrix& probabilities);

}  // namespace cardloss
