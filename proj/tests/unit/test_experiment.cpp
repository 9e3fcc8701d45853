#include "cardloss/experiment.hpp"
#include "cardloss/svg.hpp"
#include "tempdir.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace cardloss;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

TrainTrace fake_trace() {
  TrainTrace t;
  const double acc[] = {0.5, 0.8, 0.7};
  const double loss[] = {2.0, 1.0, 1.5};
  for (int e = 0; e < 3; ++e) {
    EpochRecord r;
    r.epoch = e + 1;
    r.train_loss = loss[e];
    r.test.accuracy = acc[e];
    r.test.f1_micro = acc[e];
    r.test.f1_macro = acc[e] / 2;
    r.test.pr_auc = 0.1 * (e + 1);
    r.test.pr_auc_macro = 0.2 * (e + 1);
    r.test.cce = 3.0 - e;
    r.test.mse = 0.1 / (e + 1);
    r.seconds = 0.25 * (e + 1);
    t.records.push_back(r);
  }
  return t;
}

ExperimentConfig tiny_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.dataset.n_samples = 300;
  c.dataset.majority_fraction = 0.5;
  c.train.epochs = 3;
  c.hidden = 8;
  c.seeds = {0, 1};
  c.out_dir = out;
  c.threads = 2;
  return c;
}

}  // namespace

TEST_CASE("trace csv round trip") {
  cltest::TempDir dir;
  const TrainTrace t = fake_trace();
  write_trace_csv(t, dir / "t.csv");
  const std::string text = slurp(dir / "t.csv");
  CHECK(text.rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  const TrainTrace back = read_trace_csv(dir / "t.csv");
  REQUIRE(back.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.records[i].epoch == t.records[i].epoch);
    for (TraceColumn c : {TraceColumn::train_loss, TraceColumn::acc, TraceColumn::f1_micro, TraceColumn::f1_macro,
                          TraceColumn::pr_auc, TraceColumn::cce, TraceColumn::mse, TraceColumn::sec}) {
      CHECK(column_value(back.records[i], c) == column_value(t.records[i], c));
    }
  }
  write_trace_csv(back, dir / "t2.csv");
  CHECK(slurp(dir / "t2.csv") == text);
}

TEST_CASE("trace csv errors") {
  cltest::TempDir dir;
  CHECK_THROWS_AS(read_trace_csv(dir / "missing.csv"), IoError);
  spit(dir / "empty.csv", "");
  CHECK_THROWS_AS(read_trace_csv(dir / "empty.csv"), ParseError);
  spit(dir / "hdr.csv", "epoch,loss\n1,2\n");
  CHECK_THROWS_AS(read_trace_csv(dir / "hdr.csv"), ParseError);
  spit(dir / "short.csv", std::string(kTraceHeader) + "\n1,2,3\n");
  try {
    read_trace_csv(dir / "short.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  spit(dir / "nan.csv", std::string(kTraceHeader) + "\n1,x,0,0,0,0,0,0,0\n");
  CHECK_THROWS_AS(read_trace_csv(dir / "nan.csv"), ParseError);
  CHECK_THROWS_AS(write_trace_csv(fake_trace(), dir / "no" / "such" / "dir.csv"), IoError);
}

TEST_CASE("summaries") {
  const RunSummary s = summarize_run(LossKind::spread, 4, fake_trace());
  CHECK(s.ok);
  CHECK(s.seed == 4);
  CHECK(s.max_accuracy == 0.8);
  CHECK(s.max_f1_macro == 0.4);
  CHECK(s.max_pr_auc == doctest::Approx(0.3));
  CHECK(s.max_pr_auc_macro == doctest::Approx(0.6));
  CHECK(s.min_train_loss == 1.0);
  CHECK(s.min_cce == 1.0);
  CHECK(s.min_mse == doctest::Approx(0.1 / 3));
  CHECK(s.mean_seconds == doctest::Approx(0.5));
  CHECK(table_value(s, "Acc.") == 0.8);
  CHECK(table_value(s, "Loss") == 1.0);
  CHECK(table_value(s, "MSE") == s.min_mse);
  CHECK_THROWS_AS(table_value(s, "Recall"), InvalidArgument);

  const RunSummary empty = summarize_run(LossKind::cce, 0, TrainTrace{});
  CHECK_FALSE(empty.ok);
  CHECK_FALSE(empty.error.empty());
}

TEST_CASE("experiment config validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.losses.size() == 4);
  c.losses.clear();
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ExperimentConfig{};
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ExperimentConfig{};
  c.threads = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("comparison run and artefacts") {
  cltest::TempDir dir;
  const ExperimentConfig cfg = tiny_config(dir.path());
  const SplitDataset data = prepare_data(cfg);
  CHECK(data.train.n_samples() == 210);

  int callbacks = 0;
  const ComparisonReport rep = run_comparison(cfg, data, [&](const RunSummary&) { ++callbacks; });
  CHECK(callbacks == 8);
  REQUIRE(rep.runs.size() == 8);
  CHECK(rep.runs[0].loss == LossKind::magnitude);
  CHECK(rep.runs[1].seed == 1);
  CHECK(rep.failures().empty());
  for (const RunSummary& r : rep.runs) CHECK(r.trace.records.size() == 3);

  // threads do not change the results
  ExperimentConfig serial = cfg;
  serial.threads = 1;
  const ComparisonReport rep1 = run_comparison(serial, data);
  for (std::size_t i = 0; i < rep.runs.size(); ++i) {
    CHECK(rep.runs[i].max_f1_macro == rep1.runs[i].max_f1_macro);
    CHECK(rep.runs[i].min_train_loss == rep1.runs[i].min_train_loss);
  }

  const RunSummary* a = rep.find(LossKind::cce, 0);
  const RunSummary* b = rep.find(LossKind::cce, 1);
  REQUIRE(a != nullptr);
  REQUIRE(b != nullptr);
  CHECK(rep.find(LossKind::cce, 7) == nullptr);
  CHECK(*rep.median(LossKind::cce, "Acc.") == doctest::Approx(0.5 * (a->max_accuracy + b->max_accuracy)));
  const std::vector<double> ms = rep.median_series(LossKind::cce, TraceColumn::acc);
  REQUIRE(ms.size() == 3);
  CHECK(ms[2] == doctest::Approx(0.5 * (a->trace.records[2].test.accuracy + b->trace.records[2].test.accuracy)));

  const auto files = write_comparison(rep, dir.path());
  CHECK(std::filesystem::exists(dir / "table_seed0.csv"));
  CHECK(std::filesystem::exists(dir / "table_seed1.csv"));
  CHECK(std::filesystem::exists(dir / "median.csv"));
  CHECK(std::filesystem::exists(dir / "trace_spread_1.csv"));
  CHECK(files.size() == 2 + 1 + 8 + 6);

  const std::string median = slurp(dir / "median.csv");
  CHECK(median.rfind("metric,magnitude,spread,cce,mse\n", 0) == 0);
  CHECK(count_of(median, "\n") == 7);
  const std::string svg = slurp(dir / "accuracy.svg");
  CHECK(count_of(svg, "<polyline") == 4);
  CHECK(svg.find("<svg") != std::string::npos);

  const std::string warm = warmup_summary(rep, {1, 3, 50});
  CHECK(warm.find("epoch 1:") != std::string::npos);
  CHECK(warm.find("epoch 3:") != std::string::npos);
  CHECK(warm.find("epoch 50") == std::string::npos);
  ComparisonReport no_mag = rep;
  no_mag.losses = {LossKind::cce};
  CHECK(warmup_summary(no_mag, {1}).empty());
}

TEST_CASE("bench rows") {
  cltest::TempDir dir;
  DatasetSpec s;
  s.n_samples = 200;
  const SplitDataset data = split(generate(s), 0.7, 0);
  const auto rows = run_bench(data, {LossKind::cce, LossKind::spread}, 16, 2, 0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].loss == LossKind::spread);
  CHECK(rows[0].epochs == 2);
  CHECK(rows[0].mean_seconds > 0.0);
  CHECK(rows[0].stddev_seconds >= 0.0);
  CHECK_THROWS_AS(run_bench(data, {LossKind::cce}, 16, 0, 0), InvalidArgument);
  write_bench_csv(rows, dir / "bench.csv");
  const std::string text = slurp(dir / "bench.csv");
  CHECK(text.rfind("loss,batch_size,epochs,mean_sec,std_sec\ncce,16,2,", 0) == 0);
  CHECK(count_of(text, "\n") == 3);
}

TEST_CASE("line chart") {
  const std::string svg = render_line_chart(ChartSpec{"T<&>", "x", "y"},
                                            {Series{"a", {1, 2, 3}, {0.1, std::nan(""), 0.3}},
                                             Series{"b", {1, 2}, {1.0, 2.0}}});
  CHECK(count_of(svg, "<polyline") == 2);
  CHECK(svg.find("T&lt;&amp;&gt;") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(render_line_chart(ChartSpec{}, {}).find("<svg") != std::string::npos);
}
