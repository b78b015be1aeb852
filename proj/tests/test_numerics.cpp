#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iafm/grad_check.hpp"
#include "iafm/ops.hpp"
#include "iafm/optim.hpp"

using namespace iafm;

namespace {

Tensor<double> randt(Shape s, Rng& rng, bool rg = true, double stddev = 1.0) {
  return Tensor<double>::randn(std::move(s), rng, stddev, rg);
}

}  // namespace

TEST_CASE("softmax symmetry and shift invariance") {
  auto x = Tensor<double>::from_vector({2}, {0.0, 0.0});
  auto y = softmax(x, 0);
  CHECK(y.ptr()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.ptr()[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto c = Tensor<double>::full({4}, 3.7);
  auto yc = softmax(c, 0);
  for (int i = 0; i < 4; ++i) CHECK(yc.ptr()[i] == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng(11);
  auto v = randt({64}, rng, false);
  auto sv = softmax(v, 0);
  double sum = 0;
  for (int i = 0; i < 64; ++i) sum += sv.ptr()[i];
  CHECK(std::abs(sum - 1.0) < 1e-6);
  auto shifted = Tensor<double>::zeros({64});
  for (int i = 0; i < 64; ++i) shifted.ptr()[i] = v.ptr()[i] + 100.0;
  auto ss = softmax(shifted, 0);
  for (int i = 0; i < 64; ++i) CHECK(std::abs(ss.ptr()[i] - sv.ptr()[i]) < 1e-6);
}

TEST_CASE("softmax axis handling and errors") {
  auto x = Tensor<double>::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
  auto y1 = softmax(x, 1);
  for (int i = 0; i < 2; ++i) {
    double s = 0;
    for (int j = 0; j < 3; ++j) s += y1.ptr()[i * 3 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  auto y0 = softmax(x, 0);
  for (int j = 0; j < 3; ++j)
    CHECK(y0.ptr()[j] + y0.ptr()[3 + j] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(softmax(x, 2));
  CHECK_THROWS(softmax(x, -1));
  auto bad = Tensor<double>::from_vector({2}, {1.0, std::nan("")});
  CHECK_THROWS(softmax(bad, 0));
}

TEST_CASE("cross entropy analytic values") {
  auto uniform = Tensor<double>::zeros({1, 8});
  int64_t counted = 0;
  auto l = cross_entropy_sum(uniform, {3}, -1, &counted);
  CHECK(counted == 1);
  CHECK(std::abs(l.item() - std::log(8.0)) < 1e-9);

  auto confident = Tensor<double>::from_vector({1, 2}, {30.0, -30.0});
  auto l2 = cross_entropy_sum(confident, {0});
  CHECK(l2.item() >= 0.0);
  CHECK(l2.item() < 1e-12);

  Rng rng(5);
  auto logits = randt({3, 6}, rng, false);
  auto all3 = cross_entropy_sum(logits, {1, -1, 4}, -1, &counted);
  CHECK(counted == 2);
  std::vector<double> rows02;
  for (int j = 0; j < 6; ++j) rows02.push_back(logits.ptr()[j]);
  for (int j = 0; j < 6; ++j) rows02.push_back(logits.ptr()[2 * 6 + j]);
  auto sub = Tensor<double>::from_vector({2, 6}, rows02);
  auto lsub = cross_entropy_sum(sub, {1, 4});
  CHECK(all3.item() == doctest::Approx(lsub.item()).epsilon(1e-12));

  CHECK_THROWS(cross_entropy_sum(logits, {1, 2, 6}));
  CHECK_THROWS(cross_entropy_sum(logits, {1, 2}));
}

TEST_CASE("grad check on x squared") {
  auto x = Tensor<double>::from_vector({1}, {3.0}, true);
  std::vector<Tensor<double>> params = {x};
  auto f = [&]() { return mul(x, x); };
  double err = grad_check<double>(f, params, 1e-5);
  CHECK(err < 1e-8);
  CHECK(x.grad_ptr()[0] == doctest::Approx(6.0).epsilon(1e-10));
}

TEST_CASE("grad check on softmax dot weights") {
  Rng rng(17);
  auto x = randt({16}, rng);
  auto w = randt({16}, rng, false);
  std::vector<Tensor<double>> params = {x};
  auto f = [&]() { return sum_all(mul(softmax(x, 0), w)); };
  CHECK(grad_check<double>(f, params, 1e-6) < 1e-6);
}

TEST_CASE("grad check per elementwise and matrix op") {
  Rng rng(23);
  auto a = randt({4, 5}, rng);
  auto b = randt({4, 5}, rng);
  auto w45 = randt({4, 5}, rng, false);
  auto w53 = randt({5, 3}, rng);
  auto wt35 = randt({3, 5}, rng);
  auto w43 = randt({4, 3}, rng, false);
  auto bias = randt({5}, rng);

  auto probe = [&](std::function<Tensor<double>()> f, std::vector<Tensor<double>> params) {
    double err = grad_check<double>(f, params, 1e-6);
    CHECK(err < 1e-6);
  };
  probe([&]() { return sum_all(mul(add(a, b), w45)); }, {a, b});
  probe([&]() { return sum_all(mul(sub(a, b), w45)); }, {a, b});
  probe([&]() { return sum_all(mul(mul(a, b), w45)); }, {a, b});
  probe([&]() { return sum_all(mul(scale(a, 1.7), w45)); }, {a});
  probe([&]() { return sum_all(mul(add_rows(a, bias), w45)); }, {a, bias});
  probe([&]() { return sum_all(mul(gelu(a), w45)); }, {a});
  probe([&]() { return sum_all(mul(matmul(a, w53), w43)); }, {a, w53});
  probe([&]() { return sum_all(mul(matmul_nt(a, wt35), w43)); }, {a, wt35});
  probe([&]() { return sum_all(mul(softmax(a, 1), w45)); }, {a});
  probe([&]() { return sum_all(mul(sum_rows(a), sum_rows(w45))); }, {a});
}

TEST_CASE("grad check across gather scatter concat slice") {
  Rng rng(29);
  auto table = randt({7, 6}, rng);
  auto x = randt({5, 6}, rng);
  std::vector<Tensor<double>> params = {table, x};
  std::vector<int> ids = {1, 3, 3, 0};
  std::vector<int> sel = {0, 2, 4};
  auto f = [&]() {
    auto e = embedding(table, ids);                       // [4,6]
    auto g = gather_rows(x, sel);                         // [3,6]
    auto cat = concat_rows<double>({e, g});               // [7,6]
    auto sc = row_scatter(9, {0, 2, 3, 4, 5, 6, 8}, cat); // [9,6]
    auto left = slice_cols(sc, 0, 3);
    auto right = slice_cols(sc, 3, 3);
    auto both = concat_cols<double>({right, left});
    auto t = tile_rows(sum_rows(both), 2);
    return sum_all(mul(t, t));
  };
  CHECK(grad_check<double>(f, params, 1e-6) < 1e-6);
}

TEST_CASE("grad check layer norm and softmax rows additive") {
  Rng rng(31);
  auto x = randt({4, 8}, rng);
  auto gamma = randt({8}, rng);
  auto beta = randt({8}, rng);
  auto w = randt({4, 8}, rng, false);
  auto w2 = randt({4, 4}, rng, false);
  {
    std::vector<Tensor<double>> params = {x, gamma, beta};
    auto f = [&]() { return sum_all(mul(layer_norm(x, gamma, beta), w)); };
    CHECK(grad_check<double>(f, params, 1e-6) < 1e-6);
  }
  {
    auto mask = Tensor<double>::zeros({4, 4});
    const double ninf = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) mask.ptr()[i * 4 + j] = ninf;
    std::vector<Tensor<double>> params = {x};
    auto f = [&]() {
      auto att = softmax_rows_additive(matmul_nt(x, x), mask);
      return sum_all(mul(matmul(att, x), w));
    };
    CHECK(grad_check<double>(f, params, 1e-6) < 1e-6);
  }
}

TEST_CASE("grad check cross entropy") {
  Rng rng(37);
  auto logits = randt({5, 9}, rng);
  std::vector<Tensor<double>> params = {logits};
  std::vector<int> targets = {0, 4, -1, 8, 2};
  auto f = [&]() { return cross_entropy_sum(logits, targets, -1); };
  CHECK(grad_check<double>(f, params, 1e-6) < 1e-6);
}

TEST_CASE("adamw fixed point and decoupled decay") {
  auto p = Tensor<double>::from_vector({2}, {2.0, -1.5}, true);
  std::vector<Tensor<double>> params = {p};
  auto st = AdamState<double>::init(params);
  AdamHyper h;
  h.weight_decay = 0.0;
  p.zero_grad();
  adamw_step(params, st, h, 0.01);
  CHECK(st.step == 1);
  CHECK(p.ptr()[0] == 2.0);
  CHECK(p.ptr()[1] == -1.5);

  h.weight_decay = 0.1;
  adamw_step(params, st, h, 0.01);
  CHECK(p.ptr()[0] == doctest::Approx(2.0 * (1.0 - 0.01 * 0.1)).epsilon(1e-15));
  CHECK(st.step == 2);
}

TEST_CASE("adamw single step matches scalar oracle") {
  // Independent scalar re-implementation of the update equations.
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 1e-3, wd = 0.0;
  const double g = 0.5;
  double m = (1 - beta1) * g;
  double v = (1 - beta2) * g * g;
  double mhat = m / (1 - beta1);
  double vhat = v / (1 - beta2);
  const double expected = 1.0 - lr * (mhat / (std::sqrt(vhat) + eps) + wd * 1.0);

  auto p = Tensor<double>::from_vector({1}, {1.0}, true);
  p.grad_ptr()[0] = g;
  std::vector<Tensor<double>> params = {p};
  auto st = AdamState<double>::init(params);
  AdamHyper h;
  h.weight_decay = wd;
  adamw_step(params, st, h, lr);
  CHECK(p.ptr()[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("adamw validation") {
  auto p = Tensor<double>::from_vector({1}, {1.0}, true);
  std::vector<Tensor<double>> params = {p};
  auto st = AdamState<double>::init(params);
  AdamHyper h;
  h.weight_decay = -0.1;
  CHECK_THROWS(adamw_step(params, st, h, 1e-3));
}

TEST_CASE("lr schedule endpoints and midpoint") {
  LrSchedule s;
  s.peak_lr = 1e-4;
  s.warmup_steps = 50;
  s.total_steps = 1050;
  s.min_lr = 0.0;
  CHECK(lr_at(0, s) == 0.0);
  CHECK(lr_at(50, s) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(lr_at(1050, s) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lr_at(550, s) == doctest::Approx((1e-4 + 0.0) / 2).epsilon(1e-9));

  s.min_lr = 2e-5;
  CHECK(lr_at(1050, s) == doctest::Approx(2e-5).epsilon(1e-12));
  CHECK(lr_at(550, s) == doctest::Approx((1e-4 + 2e-5) / 2).epsilon(1e-9));

  CHECK_THROWS(lr_at(-1, s));
  CHECK_THROWS(lr_at(1051, s));
}

TEST_CASE("lr schedule continuity bound") {
  LrSchedule s;
  s.peak_lr = 1e-4;
  s.warmup_steps = 20;
  s.total_steps = 120;
  s.min_lr = 1e-6;
  const double bound = s.peak_lr * (1.0 / 20 + 3.141592653589793 / 100);
  for (int64_t i = 0; i < 120; ++i)
    CHECK(std::abs(lr_at(i + 1, s) - lr_at(i, s)) <= bound);
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS(Tensor<double>::from_vector({2, 3}, {1, 2, 3}));
  auto t = Tensor<float>::zeros({2, 2}, true);
  CHECK(t.numel() == 4);
  CHECK(t.grad->size() == 4);
  auto nf = Tensor<double>::from_vector({2}, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_FALSE(nf.all_finite());
}

TEST_CASE("no grad guard suppresses graph construction") {
  auto a = Tensor<double>::from_vector({2}, {1, 2}, true);
  {
    NoGradGuard ng;
    auto y = add(a, a);
    CHECK_FALSE(y.requires_grad);
    CHECK(y.node == nullptr);
  }
  auto y = add(a, a);
  CHECK(y.requires_grad);
  CHECK(y.node != nullptr);
}

TEST_CASE("float32 grad check tolerance") {
  Rng rng(41);
  auto x = Tensor<float>::randn({8}, rng, 1.0, true);
  auto w = Tensor<float>::randn({8}, rng, 1.0, false);
  std::vector<Tensor<float>> params = {x};
  auto f = [&]() { return sum_all(mul(softmax(x, 0), w)); };
  CHECK(grad_check<float>(f, params, 1e-2) < 1e-3);
}
