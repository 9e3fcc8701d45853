#include "cardloss/experiment.hpp"

#include "cardloss/errors.hpp"
#include "cardloss/svg.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace cardloss {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

template <class Pick>
double extreme(const TrainTrace& trace, Pick pick, bool want_max) {
  double best = want_max ? -std::numeric_limits<double>::infinity()
                         : std::numeric_limits<double>::infinity();
  for (const EpochRecord& r : trace.records) {
    const double v = pick(r);
    best = want_max ? std::max(best, v) : std::min(best, v);
  }
  return best;
}

struct ChartColumn {
  TraceColumn column;
  const char* file;
  const char* label;
};

constexpr ChartColumn kCharts[] = {
    {TraceColumn::acc, "accuracy", "Accuracy"},
    {TraceColumn::pr_auc, "pr_auc", "PR-AUC"},
    {TraceColumn::f1_macro, "f1_macro", "F1 macro"},
    {TraceColumn::f1_micro, "f1_micro", "F1 micro"},
    {TraceColumn::cce, "cce", "Test CCE"},
    {TraceColumn::mse, "mse", "Test MSE"},
};

}  // namespace

double column_value(const EpochRecord& rec, TraceColumn column) {
  switch (column) {
    case TraceColumn::train_loss: return rec.train_loss;
    case TraceColumn::acc: return rec.test.accuracy;
    case TraceColumn::f1_micro: return rec.test.f1_micro;
    case TraceColumn::f1_macro: return rec.test.f1_macro;
    case TraceColumn::pr_auc: return rec.test.pr_auc;
    case TraceColumn::pr_auc_macro: return rec.test.pr_auc_macro;
    case TraceColumn::cce: return rec.test.cce;
    case TraceColumn::mse: return rec.test.mse;
    case TraceColumn::sec: return rec.seconds;
  }
  return 0.0;
}

std::vector<double> column_series(const TrainTrace& trace, TraceColumn column) {
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (const EpochRecord& r : trace.records) out.push_back(column_value(r, column));
  return out;
}

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << kTraceHeader << '\n';
  for (const EpochRecord& r : trace.records) {
    os << r.epoch << ',' << num(r.train_loss) << ',' << num(r.test.accuracy) << ','
       << num(r.test.f1_micro) << ',' << num(r.test.f1_macro) << ',' << num(r.test.pr_auc) << ','
       << num(r.test.cce) << ',' << num(r.test.mse) << ',' << num(r.seconds) << '\n';
  }
  if (!os) throw IoError("write to " + path.string() + " failed");
}

TrainTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError(path.string() + ": empty file", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError(path.string() + ":1: unexpected trace header", 1);

  TrainTrace trace;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'",
                         line_no);
      }
      cells.push_back(v);
    }
    if (cells.size() != 9) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 9 columns", line_no);
    }
    EpochRecord r;
    r.epoch = static_cast<int>(cells[0]);
    r.train_loss = cells[1];
    r.test.accuracy = cells[2];
    r.test.f1_micro = cells[3];
    r.test.f1_macro = cells[4];
    r.test.pr_auc = cells[5];
    r.test.cce = cells[6];
    r.test.mse = cells[7];
    r.seconds = cells[8];
    trace.records.push_back(r);
  }
  return trace;
}

RunSummary summarize_run(LossKind loss, std::uint64_t seed, TrainTrace trace) {
  RunSummary s;
  s.loss = loss;
  s.seed = seed;
  s.ok = !trace.records.empty();
  if (!s.ok) s.error = "no completed epochs";
  s.trace = std::move(trace);
  if (!s.ok) return s;
  const TrainTrace& t = s.trace;
  s.max_accuracy = extreme(t, [](const EpochRecord& r) { return r.test.accuracy; }, true);
  s.max_pr_auc = extreme(t, [](const EpochRecord& r) { return r.test.pr_auc; }, true);
  s.max_pr_auc_macro = extreme(t, [](const EpochRecord& r) { return r.test.pr_auc_macro; }, true);
  s.max_f1_macro = extreme(t, [](const EpochRecord& r) { return r.test.f1_macro; }, true);
  s.max_f1_micro = extreme(t, [](const EpochRecord& r) { return r.test.f1_micro; }, true);
  s.min_train_loss = extreme(t, [](const EpochRecord& r) { return r.train_loss; }, false);
  s.min_cce = extreme(t, [](const EpochRecord& r) { return r.test.cce; }, false);
  s.min_mse = extreme(t, [](const EpochRecord& r) { return r.test.mse; }, false);
  double total = 0.0;
  for (const EpochRecord& r : t.records) total += r.seconds;
  s.mean_seconds = total / static_cast<double>(t.records.size());
  return s;
}

double table_value(const RunSummary& run, std::string_view row) {
  if (row == "Acc.") return run.max_accuracy;
  if (row == "PR-AUC") return run.max_pr_auc;
  if (row == "F1Macro") return run.max_f1_macro;
  if (row == "F1Micro") return run.max_f1_micro;
  if (row == "Loss") return run.min_train_loss;
  if (row == "CCE") return run.min_cce;
  if (row == "MSE") return run.min_mse;
  if (row == "s/epoch") return run.mean_seconds;
  throw InvalidArgument("unknown table row '" + std::string(row) + "'");
}

void ExperimentConfig::validate() const {
  if (losses.empty()) throw InvalidArgument("at least one loss is required");
  if (seeds.empty()) throw InvalidArgument("at least one seed is required");
  if (hidden < 1) throw InvalidArgument("hidden width must be positive");
  if (threads < 1) throw InvalidArgument("threads must be positive");
  train.validate();
}

SplitDataset prepare_data(const ExperimentConfig& config) {
  const Dataset data = config.data_csv ? load_csv(*config.data_csv) : generate(config.dataset);
  return split(data, config.split_ratio, config.split_seed);
}

const RunSummary* ComparisonReport::find(LossKind loss, std::uint64_t seed) const {
  for (const RunSummary& r : runs) {
    if (r.loss == loss && r.seed == seed) return &r;
  }
  return nullptr;
}

std::optional<double> ComparisonReport::median(LossKind loss, std::string_view row) const {
  std::vector<double> values;
  for (const RunSummary& r : runs) {
    if (r.loss == loss && r.ok) values.push_back(table_value(r, row));
  }
  if (values.empty()) return std::nullopt;
  return median_of(std::move(values));
}

std::vector<double> ComparisonReport::median_series(LossKind loss, TraceColumn column) const {
  std::vector<const RunSummary*> ok;
  std::size_t length = 0;
  for (const RunSummary& r : runs) {
    if (r.loss != loss || !r.ok) continue;
    ok.push_back(&r);
    length = std::max(length, r.trace.records.size());
  }
  std::vector<double> out;
  for (std::size_t e = 0; e < length; ++e) {
    std::vector<double> values;
    for (const RunSummary* r : ok) {
      if (e < r->trace.records.size()) values.push_back(column_value(r->trace.records[e], column));
    }
    out.push_back(median_of(std::move(values)));
  }
  return out;
}

std::vector<std::string> ComparisonReport::failures() const {
  std::vector<std::string> out;
  for (const RunSummary& r : runs) {
    if (!r.ok) out.push_back(std::string(to_string(r.loss)) + " seed " + std::to_string(r.seed) + ": " + r.error);
  }
  return out;
}

ComparisonReport run_comparison(const ExperimentConfig& config, const SplitDataset& data,
                                const RunCallback& on_run) {
  config.validate();
  ComparisonReport report;
  report.losses = config.losses;
  report.seeds = config.seeds;
  for (LossKind loss : config.losses) {
    for (std::uint64_t seed : config.seeds) {
      RunSummary s;
      s.loss = loss;
      s.seed = seed;
      report.runs.push_back(std::move(s));
    }
  }

  const auto n_classes = std::max(data.train.n_classes, data.test.n_classes);
  const auto input_dim = static_cast<int>(data.train.features.cols());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;

  const auto worker = [&]() {
    for (std::size_t i = next++; i < report.runs.size(); i = next++) {
      RunSummary& slot = report.runs[i];
      TrainConfig tc = config.train;
      tc.loss = slot.loss;
      tc.seed = slot.seed;
      MLPModel model = init_model(input_dim, config.hidden, n_classes, slot.seed);
      try {
        slot = summarize_run(slot.loss, slot.seed, train(model, data, tc));
      } catch (const TrainingDiverged& e) {
        slot = summarize_run(slot.loss, slot.seed, e.partial());
        slot.ok = false;
        slot.error = e.what();
      } catch (const std::exception& e) {
        slot.ok = false;
        slot.error = e.what();
      }
      if (on_run) {
        std::lock_guard lock(callback_mutex);
        on_run(slot);
      }
    }
  };

  const int n_threads = std::min<int>(config.threads, static_cast<int>(report.runs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return report;
}

std::vector<std::filesystem::path> write_comparison(const ComparisonReport& report,
                                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;

  const auto write_table = [&](const std::filesystem::path& path, auto value_of) {
    std::ofstream os = open_out(path);
    os << "metric";
    for (LossKind loss : report.losses) os << ',' << to_string(loss);
    os << '\n';
    for (const char* row : kTableRows) {
      os << row;
      for (LossKind loss : report.losses) {
        const std::optional<double> v = value_of(loss, row);
        os << ',';
        if (v) os << num(*v);
      }
      os << '\n';
    }
    if (!os) throw IoError("write to " + path.string() + " failed");
    written.push_back(path);
  };

  for (std::uint64_t seed : report.seeds) {
    write_table(out_dir / ("table_seed" + std::to_string(seed) + ".csv"),
                [&](LossKind loss, const char* row) -> std::optional<double> {
                  const RunSummary* r = report.find(loss, seed);
                  if (r == nullptr || !r->ok) return std::nullopt;
                  return table_value(*r, row);
                });
  }
  write_table(out_dir / "median.csv",
              [&](LossKind loss, const char* row) { return report.median(loss, row); });

  for (const RunSummary& r : report.runs) {
    if (r.trace.records.empty()) continue;
    const auto path = out_dir / ("trace_" + std::string(to_string(r.loss)) + "_" + std::to_string(r.seed) + ".csv");
    write_trace_csv(r.trace, path);
    written.push_back(path);
  }

  for (const ChartColumn& c : kCharts) {
    std::vector<Series> series;
    for (LossKind loss : report.losses) {
      Series s;
      s.name = to_string(loss);
      s.y = report.median_series(loss, c.column);
      for (std::size_t e = 0; e < s.y.size(); ++e) s.x.push_back(static_cast<double>(e + 1));
      series.push_back(std::move(s));
    }
    const auto path = out_dir / (std::string(c.file) + ".svg");
    write_line_chart(path, ChartSpec{c.label, "epoch", c.label}, series);
    written.push_back(path);
  }
  return written;
}

std::string warmup_summary(const ComparisonReport& report, std::vector<int> epochs) {
  const auto has = [&](LossKind k) {
    return std::find(report.losses.begin(), report.losses.end(), k) != report.losses.end();
  };
  if (!has(LossKind::magnitude) || !has(LossKind::cce)) return {};
  const std::vector<double> mag = report.median_series(LossKind::magnitude, TraceColumn::acc);
  const std::vector<double> cce = report.median_series(LossKind::cce, TraceColumn::acc);
  std::ostringstream os;
  os << "warm-up (median test accuracy, magnitude vs cce):";
  for (int e : epochs) {
    const auto i = static_cast<std::size_t>(e - 1);
    if (e < 1 || i >= mag.size() || i >= cce.size()) continue;
    char buf[96];
    std::snprintf(buf, sizeof buf, " epoch %d: %.4f vs %.4f;", e, mag[i], cce[i]);
    os << buf;
  }
  return os.str();
}

std::vector<BenchRow> run_bench(const SplitDataset& data, const std::vector<LossKind>& losses,
                                int batch_size, int epochs, std::uint64_t seed, double learning_rate,
                                int hidden) {
  if (epochs < 1) throw InvalidArgument("bench needs at least one epoch");
  const auto n_classes = std::max(data.train.n_classes, data.test.n_classes);
  std::vector<BenchRow> rows;
  for (LossKind loss : losses) {
    MLPModel model = init_model(static_cast<int>(data.train.features.cols()), hidden, n_classes, seed);
    TrainConfig tc;
    tc.loss = loss;
    tc.seed = seed;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.learning_rate = learning_rate;
    const TrainTrace trace = train(model, data, tc);
    const std::vector<double> secs = column_series(trace, TraceColumn::sec);
    double mean = 0.0;
    for (double s : secs) mean += s;
    mean /= static_cast<double>(secs.size());
    double var = 0.0;
    for (double s : secs) var += (s - mean) * (s - mean);
    var = secs.size() > 1 ? var / static_cast<double>(secs.size() - 1) : 0.0;
    rows.push_back(BenchRow{loss, batch_size, epochs, mean, std::sqrt(var)});
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
  std::ofstream os = open_out(path);
  os << "loss,batch_size,epochs,mean_sec,std_sec\n";
  for (const BenchRow& r : rows) {
    os << to_string(r.loss) << ',' << r.batch_size << ',' << r.epochs << ',' << num(r.mean_seconds) << ','
       << num(r.stddev_seconds) << '\n';
  }
  if (!os) throw IoError("write to " + path.string() + " failed");
}

}  // namespace cardloss
