#include "cardloss/errors.hpp"
#include "cardloss/losses.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace cardloss;
using cltest::rel_err;

namespace {

// Batch of a single error vector of norm d: y_true = 0, y_pred = -e.
PredictionBatch single_error(double d, Index n = 10) {
  Matrix e = Matrix::Zero(1, n);
  e(0, 0) = 0.6 * d;
  e(0, 1) = -0.8 * d;
  return PredictionBatch{Matrix::Zero(1, n), -e};
}

PredictionBatch random_batch(cardloss::Rng& rng, Index b, Index n = 10) {
  return PredictionBatch::checked(cltest::random_onehot(rng, b, n), cltest::random_simplex(rng, b, n));
}

PredictionBatch repeat_rows(const PredictionBatch& batch, Index row, Index times) {
  PredictionBatch out{Matrix(times, batch.n_classes()), Matrix(times, batch.n_classes())};
  for (Index i = 0; i < times; ++i) {
    out.y_true.row(i) = batch.y_true.row(row);
    out.y_pred.row(i) = batch.y_pred.row(row);
  }
  return out;
}

double pred_loss(LossKind kind, const Matrix& y_true, const Matrix& y_pred) {
  return evaluate_loss(kind, PredictionBatch{y_true, y_pred}).value;
}

TripletBatch random_triplets(cardloss::Rng& rng, Index b, Index k = 4, Index m = 6) {
  TripletBatch t;
  t.anchor_inputs = cltest::random_matrix(rng, b, m);
  t.negative_inputs = cltest::random_matrix(rng, b, m);
  t.anchor_emb = cltest::random_matrix(rng, b, k, 0.7);
  t.positive_emb = cltest::random_matrix(rng, b, k, 0.7);
  t.negative_emb = cltest::random_matrix(rng, b, k, 0.7);
  t.temperature = rng.uniform(0.5, 2.0);
  return t;
}

using DivisionFn = TripletLossResult (*)(const TripletBatch&, const TripletLossResult&, DivisorSource,
                                         double);

double division_value(DivisionFn fn, const TripletBatch& t, DivisorSource source) {
  return fn(t, contrastive_base_loss(t), source, kDedupTolerance).value;
}

}  // namespace

TEST_CASE("prediction batch validation") {
  Matrix t = Matrix::Zero(2, 3);
  t(0, 1) = 1.0;
  t(1, 2) = 1.0;
  Matrix p = Matrix::Constant(2, 3, 1.0 / 3.0);
  CHECK_NOTHROW(PredictionBatch::checked(t, p));

  Matrix two_hot = t;
  two_hot(0, 0) = 1.0;
  CHECK_THROWS_AS(PredictionBatch::checked(two_hot, p), InvalidArgument);
  Matrix half = t;
  half(1, 2) = 0.5;
  CHECK_THROWS_AS(PredictionBatch::checked(half, p), InvalidArgument);
  Matrix off_simplex = p;
  off_simplex(0, 0) += 0.01;
  CHECK_THROWS_AS(PredictionBatch::checked(t, off_simplex), InvalidArgument);
  Matrix negative = p;
  negative(0, 0) = -0.1;
  negative(0, 1) += 0.1 + 1.0 / 3.0;
  negative(0, 2) = 1.0 - negative(0, 0) - negative(0, 1);
  CHECK_THROWS_AS(PredictionBatch::checked(t, negative), InvalidArgument);
  CHECK_THROWS_AS(PredictionBatch::checked(t, Matrix::Constant(2, 4, 0.25)), InvalidArgument);
  CHECK_THROWS_AS(PredictionBatch::checked(Matrix(0, 3), Matrix(0, 3)), InvalidArgument);
}

TEST_CASE("loss names") {
  for (LossKind k : {LossKind::magnitude, LossKind::spread, LossKind::cce, LossKind::mse}) {
    CHECK(parse_loss_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_loss_kind("hinge"), InvalidArgument);
  CHECK_THROWS_AS(parse_loss_kind(""), InvalidArgument);
}

TEST_CASE("cardinality losses: closed forms") {
  cardloss::Rng rng(3);
  const Matrix t = cltest::random_onehot(rng, 6, 10);
  for (LossKind kind : {LossKind::magnitude, LossKind::spread}) {
    const LossResult perfect = evaluate_loss(kind, PredictionBatch{t, t});
    CHECK(std::abs(perfect.value) <= 1e-12);
    CHECK(perfect.grad.isZero(0.0));
  }
  for (double d : {0.1, 1.0, 3.0}) {
    const PredictionBatch b = single_error(d);
    CHECK(rel_err(magnitude_loss(b).value, std::tanh(0.5 * d)) <= 1e-10);
    CHECK(rel_err(spread_loss(b).value, std::tanh(0.5 * d)) <= 1e-10);
  }
}

TEST_CASE("cardinality losses: set semantics") {
  cardloss::Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const PredictionBatch base = random_batch(rng, 1);
    const double mag1 = magnitude_loss(base).value;
    const double spr1 = spread_loss(base).value;
    for (Index k : {2, 5, 32}) {
      const PredictionBatch rep = repeat_rows(base, 0, k);
      const LossResult mag = magnitude_loss(rep);
      const LossResult spr = spread_loss(rep);
      CHECK(std::abs(mag.value - mag1) <= 1e-9);
      CHECK(std::abs(spr.value - spr1) <= 1e-9);
      // the single error's gradient is shared among its k copies
      CHECK((mag.grad.colwise().sum() - magnitude_loss(base).grad.row(0)).norm() <= 1e-12);
    }
  }
}

TEST_CASE("cardinality losses: invariances and bounds") {
  cardloss::Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Index b = 2 + static_cast<Index>(rng.below(15));
    const PredictionBatch batch = random_batch(rng, b);
    std::vector<Index> order(static_cast<std::size_t>(b));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    PredictionBatch shuffled{Matrix(b, 10), Matrix(b, 10)};
    PredictionBatch doubled{Matrix(b + 1, 10), Matrix(b + 1, 10)};
    for (Index i = 0; i < b; ++i) {
      shuffled.y_true.row(i) = batch.y_true.row(order[static_cast<std::size_t>(i)]);
      shuffled.y_pred.row(i) = batch.y_pred.row(order[static_cast<std::size_t>(i)]);
    }
    doubled.y_true.topRows(b) = batch.y_true;
    doubled.y_pred.topRows(b) = batch.y_pred;
    const Index dup = static_cast<Index>(rng.below(static_cast<std::uint64_t>(b)));
    doubled.y_true.row(b) = batch.y_true.row(dup);
    doubled.y_pred.row(b) = batch.y_pred.row(dup);

    for (LossKind kind : {LossKind::magnitude, LossKind::spread}) {
      const double v = evaluate_loss(kind, batch).value;
      CHECK(v > 0.0);
      CHECK(v <= static_cast<double>(b));
      CHECK(std::abs(evaluate_loss(kind, shuffled).value - v) <= 1e-9);
      CHECK(std::abs(evaluate_loss(kind, doubled).value - v) <= 1e-9);
    }
  }
}

TEST_CASE("cardinality losses: zero-group errors get no gradient") {
  cardloss::Rng rng(13);
  PredictionBatch batch = random_batch(rng, 4);
  batch.y_pred.row(2) = batch.y_true.row(2);
  batch.y_pred.row(3) = batch.y_true.row(3);
  batch.y_pred(3, 0) += 1e-12;  // within the merge tolerance of zero
  for (LossKind kind : {LossKind::magnitude, LossKind::spread}) {
    const LossResult r = evaluate_loss(kind, batch);
    CHECK(r.grad.row(2).isZero(0.0));
    CHECK(r.grad.row(3).isZero(0.0));
    CHECK(r.grad.row(0).norm() > 0.0);
    // and equal to the loss of the two remaining errors
    PredictionBatch rest{batch.y_true.topRows(2), batch.y_pred.topRows(2)};
    CHECK(std::abs(evaluate_loss(kind, rest).value - r.value) <= 1e-12);
  }
  // two-point deduplicated set: magnitude and spread agree
  PredictionBatch pair = repeat_rows(random_batch(rng, 1), 0, 3);
  pair.y_true.conservativeResize(4, Eigen::NoChange);
  pair.y_pred.conservativeResize(4, Eigen::NoChange);
  pair.y_true.row(3) = pair.y_true.row(0);
  pair.y_pred.row(3) = pair.y_true.row(0);
  CHECK(std::abs(magnitude_loss(pair).value - spread_loss(pair).value) <= 1e-12);
}

TEST_CASE("loss gradients match central differences") {
  cardloss::Rng rng(21);
  for (LossKind kind : {LossKind::magnitude, LossKind::spread, LossKind::cce, LossKind::mse}) {
    double worst = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
      const Index b = 1 + static_cast<Index>(rng.below(16));
      const PredictionBatch batch = random_batch(rng, b);
      const auto f = [&](const Matrix& p) { return pred_loss(kind, batch.y_true, p); };
      // -1/p is steep for small probabilities, so cce needs a finer step
      const double h = kind == LossKind::cce ? 1e-8 : 1e-5;
      worst = std::max(worst, cltest::fd_mismatch(f, batch.y_pred, evaluate_loss(kind, batch).grad, h));
    }
    INFO("loss " << std::string(to_string(kind)));
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("cce") {
  Matrix t = Matrix::Zero(2, 10);
  t(0, 3) = 1.0;
  t(1, 7) = 1.0;
  const LossResult perfect = cce_loss(PredictionBatch{t, t});
  CHECK(perfect.value == doctest::Approx(-std::log1p(-kCceClamp)).epsilon(1e-9));
  CHECK(perfect.grad.isZero(0.0));  // clamp active

  const Matrix uniform = Matrix::Constant(2, 10, 0.1);
  const LossResult u = cce_loss(PredictionBatch{t, uniform});
  CHECK(u.value == doctest::Approx(2.302585092994046).epsilon(1e-12));
  CHECK(u.grad(0, 3) == doctest::Approx(-1.0 / (0.1 * 2.0)));
  CHECK(u.grad(0, 4) == 0.0);

  Matrix mixed = uniform;
  mixed.row(1).setConstant(0.0);
  mixed(1, 7) = 0.5;
  mixed(1, 0) = 0.5;
  const double row0 = -std::log(0.1);
  const double row1 = -std::log(0.5);
  CHECK(cce_loss(PredictionBatch{t, mixed}).value == doctest::Approx(0.5 * (row0 + row1)));

  Matrix zero_prob = uniform;
  zero_prob(0, 3) = 0.0;
  CHECK(cce_loss(PredictionBatch{t, zero_prob}).value ==
        doctest::Approx(0.5 * (-std::log(kCceClamp) + row0)));
  CHECK_THROWS_AS(cce_loss(PredictionBatch{t, Matrix::Constant(2, 9, 0.1)}), InvalidArgument);
}

TEST_CASE("mse") {
  Matrix t = Matrix::Zero(1, 10);
  t(0, 2) = 1.0;
  CHECK(mse_loss(PredictionBatch{t, t}).value == 0.0);
  const Matrix uniform = Matrix::Constant(1, 10, 0.1);
  const LossResult r = mse_loss(PredictionBatch{t, uniform});
  CHECK(r.value == doctest::Approx(0.09).epsilon(1e-14));
  CHECK(r.grad(0, 2) == doctest::Approx(2.0 * (0.1 - 1.0) / 10.0));
  Matrix t2(2, 10);
  t2 << t, t;
  Matrix u2(2, 10);
  u2 << uniform, uniform;
  CHECK(mse_loss(PredictionBatch{t2, u2}).value == doctest::Approx(r.value).epsilon(1e-15));
}

TEST_CASE("welsch-leclerc") {
  Vector a(3), b(3);
  a << 1.0, 2.0, 3.0;
  CHECK(welsch_leclerc(a, a) == 0.0);
  b = a;
  b(0) += 1.0;
  CHECK(welsch_leclerc(a, b) == doctest::Approx(0.3934693402873666).epsilon(1e-14));
  CHECK_THROWS_AS(welsch_leclerc(a, Vector::Zero(2)), InvalidArgument);

  // both WL and the batch-size-1 cardinality loss start at 0 and increase in d
  double prev_wl = 0.0, prev_mag = 0.0;
  Vector zero = Vector::Zero(10);
  for (int i = 1; i <= 40; ++i) {
    const double d = 0.1 * i;
    const PredictionBatch batch = single_error(d);
    const Vector e = -batch.y_pred.row(0).transpose();
    const double wl = welsch_leclerc(zero, e);
    const double mag = magnitude_loss(batch).value;
    CHECK(wl > prev_wl);
    CHECK(mag > prev_mag);
    prev_wl = wl;
    prev_mag = mag;
  }
}

TEST_CASE("triplet batch validation") {
  cardloss::Rng rng(40);
  TripletBatch t = random_triplets(rng, 3);
  CHECK_NOTHROW(t.validate());
  TripletBatch bad = t;
  bad.temperature = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = t;
  bad.positive_emb = Matrix::Zero(3, 5);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = t;
  bad.negative_inputs = Matrix::Zero(2, 6);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = t;
  bad.anchor_inputs = Matrix::Zero(2, 6);
  bad.negative_inputs = Matrix::Zero(2, 6);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = t;
  bad.anchor_emb(0, 0) = INFINITY;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = t;
  bad.anchor_emb.resize(0, 4);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(contrastive_base_loss(bad), InvalidArgument);
}

TEST_CASE("contrastive base loss") {
  TripletBatch t;
  t.anchor_inputs = Matrix::Zero(1, 2);
  t.negative_inputs = Matrix::Ones(1, 2);
  t.anchor_emb = (Matrix(1, 2) << 1.0, 0.0).finished();
  t.positive_emb = (Matrix(1, 2) << 1.0, 0.0).finished();
  t.negative_emb = (Matrix(1, 2) << 1.0, 0.0).finished();
  CHECK(contrastive_base_loss(t).value == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  t.positive_emb(0, 0) = 1000.0;  // positive far more similar
  CHECK(contrastive_base_loss(t).value <= 1e-300);

  t.temperature = 0.5;
  t.positive_emb(0, 0) = 0.5;  // difference -0.5 = -tau
  CHECK(contrastive_base_loss(t).value == doctest::Approx(1.3132616875182228).epsilon(1e-14));

  t.positive_emb(0, 0) = -1e6;  // large negative margin stays finite
  CHECK(std::isfinite(contrastive_base_loss(t).value));
  CHECK(contrastive_base_loss(t).grad_anchor_emb.allFinite());
}

TEST_CASE("contrastive base gradients match central differences") {
  cardloss::Rng rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const TripletBatch t = random_triplets(rng, 1 + static_cast<Index>(rng.below(16)));
    const TripletLossResult r = contrastive_base_loss(t);
    worst = std::max(worst, cltest::fd_mismatch([&](const Matrix& m) {
      TripletBatch c = t;
      c.anchor_emb = m;
      return contrastive_base_loss(c).value;
    }, t.anchor_emb, r.grad_anchor_emb));
    worst = std::max(worst, cltest::fd_mismatch([&](const Matrix& m) {
      TripletBatch c = t;
      c.positive_emb = m;
      return contrastive_base_loss(c).value;
    }, t.positive_emb, r.grad_positive_emb));
    worst = std::max(worst, cltest::fd_mismatch([&](const Matrix& m) {
      TripletBatch c = t;
      c.negative_emb = m;
      return contrastive_base_loss(c).value;
    }, t.negative_emb, r.grad_negative_emb));
    CHECK(r.grad_anchor_inputs.isZero(0.0));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("division losses: closed forms") {
  cardloss::Rng rng(50);
  TripletBatch t = random_triplets(rng, 4);
  // identical differences: single deduplicated point, divisor 1
  for (Index i = 1; i < 4; ++i) {
    t.negative_inputs.row(i) = t.anchor_inputs.row(i) - (t.anchor_inputs.row(0) - t.negative_inputs.row(0));
  }
  const TripletLossResult base = contrastive_base_loss(t);
  for (DivisionFn fn : {DivisionFn{&division_magnitude_loss}, DivisionFn{&division_spread_loss}}) {
    const TripletLossResult r = fn(t, base, DivisorSource::raw_inputs, kDedupTolerance);
    CHECK(rel_err(r.value, base.value) <= 1e-12);
  }

  TripletBatch far = random_triplets(rng, 2);
  far.negative_inputs = far.anchor_inputs;
  far.negative_inputs(1, 0) -= 40.0;  // differences 0 and 40 e_0
  const TripletLossResult far_base = contrastive_base_loss(far);
  for (DivisionFn fn : {DivisionFn{&division_magnitude_loss}, DivisionFn{&division_spread_loss}}) {
    const TripletLossResult r = fn(far, far_base, DivisorSource::raw_inputs, kDedupTolerance);
    CHECK(std::abs(r.value - far_base.value / 2.0) <= 1e-9);
  }
}

TEST_CASE("division losses: bounds on random batches") {
  cardloss::Rng rng(51);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index b = 1 + static_cast<Index>(rng.below(16));
    const TripletBatch t = random_triplets(rng, b);
    const TripletLossResult base = contrastive_base_loss(t);
    for (DivisorSource src : {DivisorSource::raw_inputs, DivisorSource::embeddings}) {
      const double mag = division_magnitude_loss(t, base, src).value;
      const double spr = division_spread_loss(t, base, src).value;
      const double lo = base.value / static_cast<double>(b) - 1e-12;
      const double hi = base.value + 1e-12;
      if (!(mag >= lo && mag <= hi && spr >= lo && spr <= hi)) ++violations;
    }
    const Matrix diffs = t.anchor_inputs - t.negative_inputs;
    const double divisor = base.value / division_spread_loss(t, base).value;
    if (divisor > std::exp(diameter(PointCloud(diffs))) + 1e-9) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("division loss gradients match central differences") {
  cardloss::Rng rng(52);
  for (DivisionFn fn : {DivisionFn{&division_magnitude_loss}, DivisionFn{&division_spread_loss}}) {
    double worst = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
      const TripletBatch t = random_triplets(rng, 1 + static_cast<Index>(rng.below(16)));
      for (DivisorSource src : {DivisorSource::raw_inputs, DivisorSource::embeddings}) {
        const TripletLossResult r = fn(t, contrastive_base_loss(t), src, kDedupTolerance);
        const auto with = [&](auto setter) {
          return [&, setter](const Matrix& m) {
            TripletBatch c = t;
            setter(c, m);
            return division_value(fn, c, src);
          };
        };
        worst = std::max(worst, cltest::fd_mismatch(with([](TripletBatch& c, const Matrix& m) { c.anchor_emb = m; }),
                                                    t.anchor_emb, r.grad_anchor_emb));
        worst = std::max(worst, cltest::fd_mismatch(with([](TripletBatch& c, const Matrix& m) { c.positive_emb = m; }),
                                                    t.positive_emb, r.grad_positive_emb));
        worst = std::max(worst, cltest::fd_mismatch(with([](TripletBatch& c, const Matrix& m) { c.negative_emb = m; }),
                                                    t.negative_emb, r.grad_negative_emb));
        worst = std::max(worst, cltest::fd_mismatch(with([](TripletBatch& c, const Matrix& m) { c.anchor_inputs = m; }),
                                                    t.anchor_inputs, r.grad_anchor_inputs));
        worst = std::max(worst, cltest::fd_mismatch(with([](TripletBatch& c, const Matrix& m) { c.negative_inputs = m; }),
                                                    t.negative_inputs, r.grad_negative_inputs));
        if (src == DivisorSource::embeddings) {
          CHECK(r.grad_anchor_inputs.isZero(0.0));
        }
      }
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("division losses reject a mismatched base") {
  cardloss::Rng rng(53);
  const TripletBatch t = random_triplets(rng, 3);
  const TripletLossResult other = contrastive_base_loss(random_triplets(rng, 4));
  CHECK_THROWS_AS(division_magnitude_loss(t, other), InvalidArgument);
}
