#include "cardloss/losses.hpp"
#include "cardloss/nn.hpp"
#include "cardloss/synthdata.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace cardloss;

// Softmax outputs of an untrained network on one-hot targets: a realistic
// spread of error vectors.
PredictionBatch make_batch(int b, int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix logits(b, n);
  Matrix truth = Matrix::Zero(b, n);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < n; ++j) logits(i, j) = 2.0 * rng.normal();
    truth(i, static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)))) = 1.0;
  }
  Matrix probs = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  probs.array().colwise() /= probs.rowwise().sum().array();
  return PredictionBatch{truth, probs};
}

template <LossKind Kind>
void BM_Loss(benchmark::State& state) {
  const PredictionBatch batch = make_batch(static_cast<int>(state.range(0)), 10, 7);
  for (auto _ : state) {
    LossResult r = evaluate_loss(Kind, batch);
    benchmark::DoNotOptimize(r.value);
    benchmark::DoNotOptimize(r.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK_TEMPLATE(BM_Loss, LossKind::cce)->Arg(32)->Arg(256)->Arg(2048);
BENCHMARK_TEMPLATE(BM_Loss, LossKind::mse)->Arg(32)->Arg(256)->Arg(2048);
BENCHMARK_TEMPLATE(BM_Loss, LossKind::spread)->Arg(32)->Arg(256)->Arg(2048);
BENCHMARK_TEMPLATE(BM_Loss, LossKind::magnitude)->Arg(32)->Arg(256)->Arg(2048)->Unit(benchmark::kMicrosecond);

// Full SGD step of the default 20-32-10 network, the denominator for the
// per-epoch overhead of each loss.
template <LossKind Kind>
void BM_TrainStep(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  const PredictionBatch batch = make_batch(b, 10, 3);
  Rng rng(11);
  Matrix x(b, 20);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  MLPModel model = init_model(20, kDefaultHidden, 10, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, x, batch.y_true, Kind, 0.0));
  }
}

BENCHMARK_TEMPLATE(BM_TrainStep, LossKind::cce)->Arg(32);
BENCHMARK_TEMPLATE(BM_TrainStep, LossKind::magnitude)->Arg(32);
BENCHMARK_TEMPLATE(BM_TrainStep, LossKind::spread)->Arg(32);

}  // namespace
