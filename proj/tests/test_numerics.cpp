#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wordacq/errors.hpp"
#include "wordacq/numerics.hpp"
#include "wordacq/rng.hpp"

using namespace wordacq;

TEST_CASE("softmax cross entropy on equal logits") {
  Vec logits = Vec::Zero(4);
  auto r = softmax_cross_entropy(logits, 2);
  CHECK(r.loss_nats == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(r.loss_nats / M_LN2 == doctest::Approx(2.0).epsilon(1e-14));  // 2 bits
  CHECK(r.grad.sum() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy saturates at a dominant logit") {
  Vec logits = Vec::Zero(6);
  logits(3) = 1e9;
  auto r = softmax_cross_entropy(logits, 3);
  CHECK(r.loss_nats == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("single-option distribution is certainty") {
  Vec logits(1);
  logits(0) = -7.3;
  auto r = softmax_cross_entropy(logits, 0);
  CHECK(r.loss_nats == 0.0);
  CHECK(surprisal_bits(logits, 0) == 0.0);
}

TEST_CASE("softmax cross entropy matches the naive formula") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Vec logits(10);
    for (int i = 0; i < 10; ++i) logits(i) = 4.0 * rng.next_gaussian();
    const int target = static_cast<int>(rng.next_below(10));
    auto r = softmax_cross_entropy(logits, target);
    // naive: -ln(exp(z_t) / sum exp(z))
    double z = 0.0;
    for (int i = 0; i < 10; ++i) z += std::exp(logits(i));
    const double naive = -std::log(std::exp(logits(target)) / z);
    CHECK(r.loss_nats == doctest::Approx(naive).epsilon(1e-12));
    CHECK(r.loss_nats >= 0.0);
    CHECK(r.grad.sum() == doctest::Approx(0.0).epsilon(1e-9));
    // gradient vs finite differences on a few coordinates
    for (int j : {0, 3, target}) {
      const double eps = 1e-6;
      Vec up = logits, down = logits;
      up(j) += eps;
      down(j) -= eps;
      const double num = (softmax_cross_entropy(up, target).loss_nats -
                          softmax_cross_entropy(down, target).loss_nats) /
                         (2 * eps);
      CHECK(r.grad(j) == doctest::Approx(num).epsilon(1e-6));
    }
  }
}

TEST_CASE("softmax cross entropy rejects non-finite logits") {
  Vec logits = Vec::Zero(3);
  logits(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(softmax_cross_entropy(logits, 0), NumericalError);
}

TEST_CASE("column-batched cross entropy agrees with the single-vector path") {
  Rng rng(11);
  Mat logits(7, 5);
  std::vector<int32_t> targets;
  for (int c = 0; c < 5; ++c) {
    for (int r = 0; r < 7; ++r) logits(r, c) = rng.next_gaussian();
    targets.push_back(static_cast<int32_t>(rng.next_below(7)));
  }
  Mat dlogits;
  const double total = softmax_xent_cols(logits, targets, dlogits);
  double expected = 0.0;
  for (int c = 0; c < 5; ++c) {
    auto r = softmax_cross_entropy(logits.col(c), targets[c]);
    expected += r.loss_nats;
    for (int i = 0; i < 7; ++i) CHECK(dlogits(i, c) == doctest::Approx(r.grad(i)).epsilon(1e-14));
  }
  CHECK(total == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("learning rate schedule: ramp, peak, decay") {
  LrSchedule s{1e-4, 10000, 1000000};
  CHECK(lr_at(0, s) == 0.0);
  CHECK(lr_at(5000, s) == doctest::Approx(5e-5).epsilon(1e-15));
  CHECK(lr_at(10000, s) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(lr_at(1000000, s) == 0.0);
  CHECK_THROWS_AS(lr_at(1000001, s), ConfigError);
  CHECK_THROWS_AS(lr_at(-1, s), ConfigError);

  // exact piecewise linearity on both sides of the warmup knee
  CHECK(lr_at(9999, s) == doctest::Approx(s.base * 9999.0 / 10000.0).epsilon(1e-14));
  CHECK(lr_at(10001, s) ==
        doctest::Approx(s.base * (1000000.0 - 10001.0) / (1000000.0 - 10000.0)).epsilon(1e-14));
  // one-step jumps are bounded by the ramp slope (continuity)
  CHECK(std::abs(lr_at(10000, s) - lr_at(9999, s)) <= s.base / 10000.0 + 1e-18);
  CHECK(std::abs(lr_at(10001, s) - lr_at(10000, s)) <= s.base / 10000.0 + 1e-18);
}

namespace {

std::vector<NamedParam> single(Tensor& t, const char* name = "w") {
  return {{name, &t}};
}

}  // namespace

TEST_CASE("adam first step moves by about lr in the gradient sign direction") {
  Tensor w(2, 3);
  w.value.setConstant(1.0);
  w.ensure_grad();
  w.grad.setConstant(0.5);
  w.grad(0, 0) = -0.5;
  AdamConfig cfg;
  cfg.eps = 1e-12;  // negligible
  Adam adam(single(w), cfg);
  adam.step(single(w), 1e-3);
  CHECK(w.value(0, 0) == doctest::Approx(1.0 + 1e-3).epsilon(1e-9));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      if (!(i == 0 && j == 0)) CHECK(w.value(i, j) == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  Tensor w(3, 3);
  w.value.setRandom();
  w.ensure_grad();
  const Mat before = w.value;
  Adam adam(single(w), {});
  adam.step(single(w), 1e-2);
  CHECK((w.value - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam matches a hand-executed scalar recurrence") {
  const double g1 = 0.3, g2 = -0.7, lr = 1e-2;
  AdamConfig cfg;  // beta1 0.9, beta2 0.999, eps 1e-6
  Tensor w(1, 1);
  w.value(0, 0) = 0.25;
  w.ensure_grad();
  Adam adam(single(w), cfg);

  double m = 0.0, v = 0.0, theta = 0.25;
  auto hand_step = [&](double g, int t) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mhat = m / (1 - std::pow(cfg.beta1, t));
    const double vhat = v / (1 - std::pow(cfg.beta2, t));
    theta -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  };

  w.grad(0, 0) = g1;
  adam.step(single(w), lr);
  hand_step(g1, 1);
  CHECK(w.value(0, 0) == doctest::Approx(theta).epsilon(1e-12));

  w.grad(0, 0) = g2;
  adam.step(single(w), lr);
  hand_step(g2, 2);
  CHECK(w.value(0, 0) == doctest::Approx(theta).epsilon(1e-12));
}

TEST_CASE("adam step 1 is odd under simultaneous sign flips") {
  Rng rng(8);
  Tensor a(4, 4), b(4, 4);
  for (int i = 0; i < 16; ++i) {
    a.value.data()[i] = rng.next_gaussian();
    b.value.data()[i] = -a.value.data()[i];
  }
  a.ensure_grad();
  b.ensure_grad();
  for (int i = 0; i < 16; ++i) {
    a.grad.data()[i] = rng.next_gaussian();
    b.grad.data()[i] = -a.grad.data()[i];
  }
  Adam adam_a(single(a), {}), adam_b(single(b), {});
  adam_a.step(single(a), 1e-3);
  adam_b.step(single(b), 1e-3);
  CHECK((a.value + b.value).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("global norm clipping") {
  Tensor w(1, 4);
  w.ensure_grad();
  w.grad << 3.0, 0.0, 4.0, 0.0;  // norm 5
  const double norm = clip_global_norm(single(w), 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(w.grad(0, 0) == doctest::Approx(0.6));
  CHECK(w.grad(0, 2) == doctest::Approx(0.8));
  // under the limit: untouched
  const double norm2 = clip_global_norm(single(w), 10.0);
  CHECK(norm2 == doctest::Approx(1.0));
  CHECK(w.grad(0, 0) == doctest::Approx(0.6));
}

TEST_CASE("gradient check on a purely linear scoring model is exact") {
  // loss = sum_i c_i w_i over a fixed random c
  Rng rng(15);
  Tensor w(5, 4);
  w.value.setZero();
  w.ensure_grad();
  Mat c(5, 4);
  for (int i = 0; i < 20; ++i) c.data()[i] = rng.next_gaussian();
  auto loss = [&]() { return (c.array() * w.value.array()).sum(); };
  auto grads = [&]() {
    w.zero_grad();
    w.grad = c;
  };
  const double err = gradient_check(loss, grads, single(w), 1e-5, 200, 3);
  CHECK(err < 1e-9);
}

TEST_CASE("gradient check rejects a non-positive epsilon") {
  Tensor w(1, 1);
  w.ensure_grad();
  auto loss = [&]() { return w.value(0, 0); };
  auto grads = [&]() { w.grad(0, 0) = 1.0; };
  CHECK_THROWS_AS(gradient_check(loss, grads, single(w), 0.0, 10, 1), ConfigError);
}

TEST_CASE("layer norm backward matches finite differences") {
  Rng rng(21);
  const int rows = 3, cols = 6;
  Mat x(rows, cols);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  RowVec gamma(cols), beta(cols);
  for (int j = 0; j < cols; ++j) {
    gamma(j) = 1.0 + 0.1 * rng.next_gaussian();
    beta(j) = 0.1 * rng.next_gaussian();
  }
  Mat dy(rows, cols);
  for (int i = 0; i < dy.size(); ++i) dy.data()[i] = rng.next_gaussian();

  auto forward_loss = [&](const Mat& xx, const RowVec& g, const RowVec& b) {
    LayerNormCache cache;
    Mat y = layer_norm_forward(xx, g, b, cache);
    return (y.array() * dy.array()).sum();
  };

  LayerNormCache cache;
  layer_norm_forward(x, gamma, beta, cache);
  RowVec dgamma = RowVec::Zero(cols), dbeta = RowVec::Zero(cols);
  Mat dx = layer_norm_backward(dy, cache, gamma, dgamma, dbeta);

  const double eps = 1e-6;
  for (int i = 0; i < x.size(); ++i) {
    Mat xp = x, xm = x;
    xp.data()[i] += eps;
    xm.data()[i] -= eps;
    const double num = (forward_loss(xp, gamma, beta) - forward_loss(xm, gamma, beta)) / (2 * eps);
    CHECK(dx.data()[i] == doctest::Approx(num).epsilon(1e-5));
  }
  for (int j = 0; j < cols; ++j) {
    RowVec gp = gamma, gm = gamma;
    gp(j) += eps;
    gm(j) -= eps;
    const double num = (forward_loss(x, gp, beta) - forward_loss(x, gm, beta)) / (2 * eps);
    CHECK(dgamma(j) == doctest::Approx(num).epsilon(1e-5));
    RowVec bp = beta, bm = beta;
    bp(j) += eps;
    bm(j) -= eps;
    const double numb = (forward_loss(x, gamma, bp) - forward_loss(x, gamma, bm)) / (2 * eps);
    CHECK(dbeta(j) == doctest::Approx(numb).epsilon(1e-5));
  }
}

TEST_CASE("softmax backward matches finite differences") {
  Rng rng(33);
  RowVec z(8), upstream(8);
  for (int i = 0; i < 8; ++i) {
    z(i) = rng.next_gaussian();
    upstream(i) = rng.next_gaussian();
  }
  auto loss_of = [&](const RowVec& zz) {
    RowVec y = zz;
    softmax_inplace(y);
    return y.dot(upstream);
  };
  RowVec y = z;
  softmax_inplace(y);
  RowVec dz = upstream;
  softmax_backward_inplace(y, dz);
  const double eps = 1e-7;
  for (int i = 0; i < 8; ++i) {
    RowVec zp = z, zm = z;
    zp(i) += eps;
    zm(i) -= eps;
    const double num = (loss_of(zp) - loss_of(zm)) / (2 * eps);
    CHECK(dz(i) == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("log2_softmax agrees with surprisal_bits") {
  Rng rng(44);
  Vec logits(12);
  for (int i = 0; i < 12; ++i) logits(i) = 3.0 * rng.next_gaussian();
  Vec l2p;
  log2_softmax(logits, l2p);
  double sum = 0.0;
  for (int i = 0; i < 12; ++i) {
    sum += std::exp2(l2p(i));
    CHECK(-l2p(i) == doctest::Approx(surprisal_bits(logits, i)).epsilon(1e-12));
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}
