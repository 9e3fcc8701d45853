#pragma once

// Multi-loss, multi-seed comparison runs and their CSV/SVG artefacts.

#include "cardloss/nn.hpp"
#include "cardloss/synthdata.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cardloss {

/// Columns of a per-run trace file, in order.
inline constexpr const char* kTraceHeader = "epoch,train_loss,acc,f1_micro,f1_macro,pr_auc,cce,mse,sec";

/// Rows of a comparison table, in order.
inline constexpr const char* kTableRows[] = {"Acc.", "PR-AUC", "F1Macro", "Loss", "CCE", "MSE"};

enum class TraceColumn { train_loss, acc, f1_micro, f1_macro, pr_auc, pr_auc_macro, cce, mse, sec };

double column_value(const EpochRecord& rec, TraceColumn column);
std::vector<double> column_series(const TrainTrace& trace, TraceColumn column);

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);
/// Throws IoError / ParseError.
TrainTrace read_trace_csv(const std::filesystem::path& path);

/// Extremes of one run: maxima for scores, minima for losses.
struct RunSummary {
  LossKind loss = LossKind::cce;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  ///< set when the run failed
  TrainTrace trace;

  double max_accuracy = 0.0;
  double max_pr_auc = 0.0;
  double max_pr_auc_macro = 0.0;
  double max_f1_macro = 0.0;
  double max_f1_micro = 0.0;
  double min_train_loss = 0.0;
  double min_cce = 0.0;
  double min_mse = 0.0;
  double mean_seconds = 0.0;
};

RunSummary summarize_run(LossKind loss, std::uint64_t seed, TrainTrace trace);

/// Value of table row `row` (one of kTableRows) for a run.
double table_value(const RunSummary& run, std::string_view row);

struct ExperimentConfig {
  DatasetSpec dataset;
  std::optional<std::filesystem::path> data_csv;  ///< overrides `dataset` when set
  double split_ratio = 0.7;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  int hidden = kDefaultHidden;
  std::vector<LossKind> losses{LossKind::magnitude, LossKind::spread, LossKind::cce, LossKind::mse};
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = ".";
  int threads = 1;

  /// Throws InvalidArgument unless there is at least one loss and one seed.
  void validate() const;
};

/// Generates or loads the data and splits it as configured.
SplitDataset prepare_data(const ExperimentConfig& config);

struct ComparisonReport {
  std::vector<LossKind> losses;
  std::vector<std::uint64_t> seeds;
  std::vector<RunSummary> runs;  ///< loss-major, seed-minor

  const RunSummary* find(LossKind loss, std::uint64_t seed) const;
  /// Median of table row over the successful seeds of `loss`; nullopt if none.
  std::optional<double> median(LossKind loss, std::string_view row) const;
  /// Per-epoch median of a trace column across the successful seeds.
  std::vector<double> median_series(LossKind loss, TraceColumn column) const;
  std::vector<std::string> failures() const;
};

using RunCallback = std::function<void(const RunSummary&)>;

/// Trains every (loss, seed) pair on the same split. Runs execute on up to
/// config.threads workers; a failed run is recorded and the rest continue.
ComparisonReport run_comparison(const ExperimentConfig& config, const SplitDataset& data,
                                const RunCallback& on_run = {});

/// Writes table_seed<k>.csv per seed, median.csv, one trace CSV per run and
/// one SVG chart per plotted metric. Returns the paths written.
std::vector<std::filesystem::path> write_comparison(const ComparisonReport& report,
                                                    const std::filesystem::path& out_dir);

/// Median accuracy of magnitude and CCE at a few epochs, for eyeballing the
/// warm-up behaviour. Empty when either loss is missing.
std::string warmup_summary(const ComparisonReport& report, std::vector<int> epochs);

struct BenchRow {
  LossKind loss = LossKind::cce;
  int batch_size = 0;
  int epochs = 0;
  double mean_seconds = 0.0;
  double stddev_seconds = 0.0;
};

/// Serial timing of each loss over `epochs` epochs at `batch_size`.
std::vector<BenchRow> run_bench(const SplitDataset& data, const std::vector<LossKind>& losses,
                                int batch_size, int epochs, std::uint64_t seed,
                                double learning_rate = 0.01, int hidden = kDefaultHidden);

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

}  // namespace cardloss
