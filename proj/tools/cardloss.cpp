// cardloss: dataset generation, training runs, loss comparisons, invariant
// scans and timing benchmarks.
//
// Exit codes: 0 success, 2 usage, 3 I/O, 4 divergence.

#include "cardloss/errors.hpp"
#include "cardloss/experiment.hpp"
#include "cardloss/invariants.hpp"
#include "cardloss/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace cardloss;
using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CARDLOSS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("CARDLOSS_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

// Values given in a JSON config file apply to every flag not set on the
// command line.
class ConfigOverlay {
 public:
  void load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path);
    try {
      is >> doc_;
    } catch (const json::parse_error& e) {
      throw ParseError("config " + path + ": " + e.what(), 0);
    }
    if (!doc_.is_object()) throw ParseError("config " + path + ": top level must be an object", 0);
  }

  template <class T>
  void apply(const CLI::App& app, const std::string& name, T& target) const {
    if (!doc_.contains(name) || app.get_option("--" + name)->count() > 0) return;
    try {
      target = doc_.at(name).get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument("config key '" + name + "': " + e.what());
    }
  }

 private:
  json doc_ = json::object();
};

struct DataFlags {
  std::string data;  // CSV path, overrides the generator
  DatasetSpec spec;
  double split = 0.7;

  void add(CLI::App& app, double default_majority) {
    spec.majority_fraction = default_majority;
    app.add_option("--data", data, "Dataset CSV (f0..f{d-1},label); overrides generator flags");
    app.add_option("--samples", spec.n_samples, "Generated sample count")->capture_default_str();
    app.add_option("--classes", spec.n_classes, "Class count")->capture_default_str();
    app.add_option("--informative", spec.n_informative, "Informative features")->capture_default_str();
    app.add_option("--redundant", spec.n_redundant, "Redundant features")->capture_default_str();
    app.add_option("--majority", spec.majority_fraction, "Majority class fraction")->capture_default_str();
    app.add_option("--class-sep", spec.class_sep, "Hypercube half-side")->capture_default_str();
    app.add_option("--data-seed", spec.seed, "Generator and split seed")->capture_default_str();
    app.add_option("--split", split, "Train fraction")->capture_default_str();
  }

  void overlay(const CLI::App& app, const ConfigOverlay& cfg) {
    cfg.apply(app, "data", data);
    cfg.apply(app, "samples", spec.n_samples);
    cfg.apply(app, "classes", spec.n_classes);
    cfg.apply(app, "informative", spec.n_informative);
    cfg.apply(app, "redundant", spec.n_redundant);
    cfg.apply(app, "majority", spec.majority_fraction);
    cfg.apply(app, "class-sep", spec.class_sep);
    cfg.apply(app, "data-seed", spec.seed);
    cfg.apply(app, "split", split);
  }

  void into(ExperimentConfig& ec) const {
    ec.dataset = spec;
    if (!data.empty()) ec.data_csv = fs::path(data);
    ec.split_ratio = split;
    ec.split_seed = spec.seed;
  }
};

struct TrainFlags {
  double lr = 0.01;
  int epochs = 100;
  int batch_size = 32;
  int hidden = kDefaultHidden;
  std::string out_dir = ".";
  std::string config;

  void add(CLI::App& app) {
    app.add_option("--lr", lr, "SGD learning rate")->capture_default_str();
    app.add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app.add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
    app.add_option("--hidden", hidden, "Hidden units")->capture_default_str();
    app.add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
    app.add_option("--config", config, "JSON config; keys mirror flag names, flags win");
  }

  void overlay(const CLI::App& app, const ConfigOverlay& cfg) {
    cfg.apply(app, "lr", lr);
    cfg.apply(app, "epochs", epochs);
    cfg.apply(app, "batch-size", batch_size);
    cfg.apply(app, "hidden", hidden);
    cfg.apply(app, "out-dir", out_dir);
  }

  void into(ExperimentConfig& ec) const {
    ec.train.learning_rate = lr;
    ec.train.epochs = epochs;
    ec.train.batch_size = batch_size;
    ec.hidden = hidden;
    ec.out_dir = out_dir;
  }
};

std::vector<LossKind> parse_losses(const std::vector<std::string>& names) {
  std::vector<LossKind> out;
  for (const std::string& n : names) out.push_back(parse_loss_kind(n));
  return out;
}

void print_histogram(const Dataset& data) {
  std::vector<long> counts(static_cast<std::size_t>(data.n_classes), 0);
  for (int l : data.labels) ++counts[static_cast<std::size_t>(l)];
  std::cout << "rows " << data.n_samples() << ", features " << data.features.cols() << "\nclass counts:";
  for (std::size_t c = 0; c < counts.size(); ++c) std::cout << ' ' << c << '=' << counts[c];
  std::cout << '\n';
}

void print_run(const RunSummary& r) {
  if (!r.ok) {
    std::cerr << "warning: " << to_string(r.loss) << " seed " << r.seed << " failed: " << r.error << '\n';
    return;
  }
  std::printf("%-9s seed %-3llu max acc %.4f  pr-auc %.4f  f1-macro %.4f  f1-micro %.4f  "
              "min loss %.4f  cce %.4f  mse %.4f  %.4f s/epoch\n",
              to_string(r.loss), static_cast<unsigned long long>(r.seed), r.max_accuracy, r.max_pr_auc,
              r.max_f1_macro, r.max_f1_micro, r.min_train_loss, r.min_cce, r.min_mse, r.mean_seconds);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

struct GenDataCmd {
  DatasetSpec spec;
  std::string out;

  void add(CLI::App& parent) {
    CLI::App* app = parent.add_subcommand("gen-data", "Generate a synthetic imbalanced dataset as CSV");
    app->add_option("--samples", spec.n_samples, "Sample count")->capture_default_str();
    app->add_option("--classes", spec.n_classes, "Class count")->capture_default_str();
    app->add_option("--informative", spec.n_informative, "Informative features")->capture_default_str();
    app->add_option("--redundant", spec.n_redundant, "Redundant features")->capture_default_str();
    app->add_option("--majority", spec.majority_fraction, "Majority class fraction")->capture_default_str();
    app->add_option("--class-sep", spec.class_sep, "Hypercube half-side")->capture_default_str();
    app->add_option("--seed", spec.seed, "Generator seed (default $CARDLOSS_SEED or 0)");
    app->add_option("--out", out, "Output CSV path")->required();
    app->callback([this] { run(); });
  }

  void run() {
    const Dataset data = generate(spec);
    save_csv(data, out);
    print_histogram(data);
    std::cout << "wrote " << out << '\n';
  }
};

struct TrainCmd {
  DataFlags data;
  TrainFlags tf;
  std::string loss = "magnitude";
  std::uint64_t seed = 0;
  CLI::App* app = nullptr;

  void add(CLI::App& parent) {
    app = parent.add_subcommand("train", "Train one model and write trace_<loss>_<seed>.csv");
    data.add(*app, 0.5);
    tf.add(*app);
    app->add_option("--loss", loss, "magnitude | spread | cce | mse")->capture_default_str();
    app->add_option("--seed", seed, "Init/shuffle seed (default $CARDLOSS_SEED or 0)");
    app->callback([this] { run(); });
  }

  void run() {
    ConfigOverlay cfg;
    if (!tf.config.empty()) cfg.load(tf.config);
    data.overlay(*app, cfg);
    tf.overlay(*app, cfg);
    cfg.apply(*app, "loss", loss);
    cfg.apply(*app, "seed", seed);

    ExperimentConfig ec;
    data.into(ec);
    tf.into(ec);
    ec.train.loss = parse_loss_kind(loss);
    ec.train.seed = seed;
    ec.validate();

    const SplitDataset split_data = prepare_data(ec);
    fs::create_directories(ec.out_dir);
    const fs::path trace_path = ec.out_dir / ("trace_" + loss + "_" + std::to_string(seed) + ".csv");
    MLPModel model = init_model(static_cast<int>(split_data.train.features.cols()), ec.hidden,
                                std::max(split_data.train.n_classes, split_data.test.n_classes), seed);
    try {
      const TrainTrace trace = train(model, split_data, ec.train, [](const EpochRecord& r) {
        std::printf("epoch %3d  loss %.5f  acc %.4f  f1-macro %.4f  %.3fs\n", r.epoch, r.train_loss,
                    r.test.accuracy, r.test.f1_macro, r.seconds);
        std::fflush(stdout);
      });
      write_trace_csv(trace, trace_path);
      print_run(summarize_run(ec.train.loss, seed, trace));
      std::cout << "wrote " << trace_path.string() << '\n';
    } catch (const TrainingDiverged& e) {
      write_trace_csv(e.partial(), trace_path);
      std::cerr << "partial trace (" << e.partial().records.size() << " epochs) in " << trace_path.string()
                << '\n';
      throw;
    }
  }
};

struct CompareCmd {
  DataFlags data;
  TrainFlags tf;
  std::vector<std::string> losses{"magnitude", "spread", "cce", "mse"};
  std::vector<std::uint64_t> seeds;
  int threads = 1;
  CLI::App* app = nullptr;

  void add(CLI::App& parent) {
    app = parent.add_subcommand("compare", "Train every loss over every seed; write tables and charts");
    data.add(*app, 0.5);
    tf.add(*app);
    app->add_option("--losses", losses, "Losses to compare")->delimiter(',')->capture_default_str();
    app->add_option("--seeds", seeds, "Seeds (default $CARDLOSS_SEED or 0)")->delimiter(',');
    app->add_option("--threads", threads, "Parallel runs")->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() {
    ConfigOverlay cfg;
    if (!tf.config.empty()) cfg.load(tf.config);
    data.overlay(*app, cfg);
    tf.overlay(*app, cfg);
    cfg.apply(*app, "losses", losses);
    cfg.apply(*app, "seeds", seeds);
    cfg.apply(*app, "threads", threads);
    if (seeds.empty()) seeds.push_back(default_seed());

    ExperimentConfig ec;
    data.into(ec);
    tf.into(ec);
    ec.losses = parse_losses(losses);
    ec.seeds = seeds;
    ec.threads = threads;
    ec.validate();

    const SplitDataset split_data = prepare_data(ec);
    const ComparisonReport report = run_comparison(ec, split_data, print_run);
    const auto written = write_comparison(report, ec.out_dir);
    write_summary_json(report, ec.out_dir / "summary.json");

    std::cout << "\nmedian over " << seeds.size() << " seed(s):\n";
    std::ifstream median(ec.out_dir / "median.csv");
    std::cout << median.rdbuf() << '\n';
    const std::string warm = warmup_summary(report, {5, ec.train.epochs});
    if (!warm.empty()) std::cout << warm << '\n';
    for (const std::string& f : report.failures()) std::cerr << "warning: run failed: " << f << '\n';
    std::cout << "wrote " << written.size() + 1 << " files to " << ec.out_dir.string() << '\n';
  }

  static void write_summary_json(const ComparisonReport& report, const fs::path& path) {
    json runs = json::array();
    for (const RunSummary& r : report.runs) {
      runs.push_back({{"loss", to_string(r.loss)},
                      {"seed", r.seed},
                      {"ok", r.ok},
                      {"error", r.error},
                      {"epochs", r.trace.records.size()},
                      {"max_accuracy", r.max_accuracy},
                      {"max_pr_auc", r.max_pr_auc},
                      {"max_pr_auc_macro", r.max_pr_auc_macro},
                      {"max_f1_macro", r.max_f1_macro},
                      {"max_f1_micro", r.max_f1_micro},
                      {"min_train_loss", r.min_train_loss},
                      {"min_cce", r.min_cce},
                      {"min_mse", r.min_mse},
                      {"mean_sec_per_epoch", r.mean_seconds}});
    }
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << json{{"runs", runs}}.dump(2) << '\n';
  }
};

struct ScanCmd {
  std::string points;
  std::optional<double> two_point;
  double t_min = 0.01;
  double t_max = 10.0;
  int steps = 100;
  bool log_grid = false;
  std::string out;
  std::string svg;

  void add(CLI::App& parent) {
    CLI::App* app = parent.add_subcommand("scan", "Tabulate magnitude and spread of tX over a t grid");
    auto* pts = app->add_option("--points", points, "CSV of points, one per row (header optional)");
    auto* two = app->add_option("--two-point", two_point, "Built-in two-point cloud at distance l");
    pts->excludes(two);
    app->add_option("--t-min", t_min, "Smallest t")->capture_default_str();
    app->add_option("--t-max", t_max, "Largest t")->capture_default_str();
    app->add_option("--steps", steps, "Grid size")->capture_default_str();
    app->add_flag("--log", log_grid, "Logarithmic grid spacing");
    app->add_option("--out", out, "Output CSV (default stdout)");
    app->add_option("--svg", svg, "Also draw both functions to this SVG");
    app->callback([this] { run(); });
  }

  PointCloud cloud() const {
    if (two_point) {
      if (!(*two_point >= 0.0)) throw InvalidArgument("--two-point distance must be nonnegative");
      return PointCloud::from_rows({{0.0}, {*two_point}});
    }
    if (points.empty()) throw InvalidArgument("one of --points or --two-point is required");
    std::ifstream is(points);
    if (!is) throw IoError("cannot open " + points);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      bool numeric = true;
      while (std::getline(ss, cell, ',')) {
        try {
          std::size_t used = 0;
          row.push_back(std::stod(cell, &used));
          if (used != cell.size()) numeric = false;
        } catch (const std::exception&) {
          numeric = false;
        }
      }
      if (!numeric) {
        if (line_no == 1 && rows.empty()) continue;  // header
        throw ParseError(points + ":" + std::to_string(line_no) + ": non-numeric value", line_no);
      }
      rows.push_back(std::move(row));
    }
    return PointCloud::from_rows(rows);
  }

  void run() {
    if (!(t_min > 0.0) || !(t_max > t_min) || steps < 2) {
      throw InvalidArgument("need 0 < --t-min < --t-max and --steps >= 2");
    }
    std::vector<double> grid(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      const double f = static_cast<double>(i) / (steps - 1);
      grid[static_cast<std::size_t>(i)] =
          log_grid ? t_min * std::pow(t_max / t_min, f) : t_min + (t_max - t_min) * f;
    }
    const PointCloud pc = cloud();
    const auto mag = scale_scan(pc, grid, Invariant::magnitude);
    const auto spr = scale_scan(pc, grid, Invariant::spread);

    std::ostringstream os;
    os << "t,magnitude,spread\n";
    char buf[96];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", grid[i]);
      os << buf;
      if (mag[i].value) {
        std::snprintf(buf, sizeof buf, "%.17g", *mag[i].value);
        os << buf;
      }
      std::snprintf(buf, sizeof buf, ",%.17g\n", *spr[i].value);
      os << buf;
    }
    if (out.empty()) {
      std::cout << os.str();
    } else {
      std::ofstream f(out, std::ios::binary);
      if (!f) throw IoError("cannot open " + out + " for writing");
      f << os.str();
    }

    if (!svg.empty()) {
      Series m{"magnitude", {}, {}};
      Series s{"spread", {}, {}};
      for (std::size_t i = 0; i < grid.size(); ++i) {
        m.x.push_back(grid[i]);
        m.y.push_back(mag[i].value.value_or(std::nan("")));
        s.x.push_back(grid[i]);
        s.y.push_back(*spr[i].value);
      }
      write_line_chart(svg, ChartSpec{"Magnitude and spread of tX", "t", "value"}, {m, s});
    }
  }
};

struct BenchCmd {
  DataFlags data;
  std::vector<std::string> losses{"magnitude", "spread", "cce", "mse"};
  int epochs = 10;
  int batch_size = 32;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::string out = "bench.csv";

  void add(CLI::App& parent) {
    CLI::App* app = parent.add_subcommand("bench", "Time seconds per epoch for each loss");
    data.add(*app, 0.5);
    app->add_option("--losses", losses, "Losses to time")->delimiter(',')->capture_default_str();
    app->add_option("--epochs", epochs, "Timed epochs per loss")->capture_default_str();
    app->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--lr", lr, "SGD learning rate")->capture_default_str();
    app->add_option("--seed", seed, "Init/shuffle seed (default $CARDLOSS_SEED or 0)");
    app->add_option("--out", out, "Output CSV")->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() {
    ExperimentConfig ec;
    data.into(ec);
    const SplitDataset split_data = prepare_data(ec);
    const auto rows = run_bench(split_data, parse_losses(losses), batch_size, epochs, seed, lr);
    write_bench_csv(rows, out);
    for (const BenchRow& r : rows) {
      std::printf("%-9s batch %-5d %.5f +- %.5f s/epoch\n", to_string(r.loss), r.batch_size, r.mean_seconds,
                  r.stddev_seconds);
    }
    std::cout << "wrote " << out << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardloss: cardinality-augmented losses for imbalanced classification"};
  app.require_subcommand(1);

  GenDataCmd gen;
  TrainCmd train_cmd;
  CompareCmd compare;
  ScanCmd scan;
  BenchCmd bench;

  try {
    const std::uint64_t seed = default_seed();
    gen.spec.seed = seed;
    train_cmd.seed = seed;
    bench.seed = seed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  gen.add(app);
  train_cmd.add(app);
  compare.add(app);
  scan.add(app);
  bench.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
