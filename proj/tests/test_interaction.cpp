#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "shine/errors.hpp"
#include "shine/gradcheck.hpp"
#include "shine/interaction.hpp"
#include "testutil.hpp"

using namespace shine;

TEST_CASE("rep_to_distribution: pooling and normalization") {
  {
    // a constant row repeated k times pools to the same distribution as k=1
    Tensor one(1, 4), rep(3, 4);
    for (int j = 0; j < 4; ++j) {
      one.at(0, j) = 0.3 * j - 0.5;
      for (int i = 0; i < 3; ++i) rep.at(i, j) = one.at(0, j);
    }
    Tape t;
    const Tensor& d1 = t.val(rep_to_distribution(t, t.input(one)));
    const Tensor& d3 = t.val(rep_to_distribution(t, t.input(rep)));
    CHECK(d1.max_abs_diff(d3) < 1e-12);
  }
  {
    // all-zero row -> uniform
    Tape t;
    const Tensor& d = t.val(rep_to_distribution(t, t.input(Tensor(1, 8))));
    for (int j = 0; j < 8; ++j) CHECK(d.at(0, j) == doctest::Approx(1.0 / 8).epsilon(1e-12));
  }
  {
    // matches independent mean-then-softmax arithmetic
    std::mt19937_64 gen(20);
    for (int iter = 0; iter < 50; ++iter) {
      int k = 1 + static_cast<int>(gen() % 5), d = 2 + static_cast<int>(gen() % 6);
      Tensor block = testutil::random_tensor(gen, k, d);
      Tape t;
      const Tensor& got = t.val(rep_to_distribution(t, t.input(block)));
      std::vector<double> mean(d, 0.0);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j) mean[j] += block.at(i, j) / k;
      double mx = *std::max_element(mean.begin(), mean.end());
      double denom = 0.0;
      std::vector<double> want(d);
      for (int j = 0; j < d; ++j) denom += (want[j] = std::exp(mean[j] - mx));
      for (int j = 0; j < d; ++j) CHECK(got.at(0, j) == doctest::Approx(want[j] / denom).epsilon(1e-12));
    }
  }
}

TEST_CASE("sym_kl: identity, worked value, symmetry") {
  Tape t;
  Tensor p = Tensor::row({0.5, 0.5});
  CHECK(t.scalar(sym_kl(t, t.input(p), t.input(p))) == doctest::Approx(0.0).epsilon(1e-9));

  // KL(p||q) = ln(5/3), KL(q||p) ~= 0.36806; total ~= 0.87889 nats
  Tensor q = Tensor::row({0.9, 0.1});
  double v = t.scalar(sym_kl(t, t.input(p), t.input(q)));
  CHECK(v == doctest::Approx(0.8788898).epsilon(1e-3));

  std::mt19937_64 gen(21);
  for (int iter = 0; iter < 100; ++iter) {
    int n = 2 + static_cast<int>(gen() % 6);
    Tensor a = testutil::random_distribution_row(gen, n);
    Tensor b = testutil::random_distribution_row(gen, n);
    Tape tt;
    double ab = tt.scalar(sym_kl(tt, tt.input(a), tt.input(b)));
    double ba = tt.scalar(sym_kl(tt, tt.input(b), tt.input(a)));
    CHECK(ab == ba);  // exact: the two terms swap
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("global loss: zero at equality, non-negative, gradients") {
  std::mt19937_64 gen(22);
  Tensor h = testutil::random_tensor(gen, 5, 6);
  Mask mask(5, 1);
  {
    Tape t;
    CHECK(t.scalar(global_loss(t, t.input(h), t.input(h), mask)) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
  for (int iter = 0; iter < 30; ++iter) {
    Tensor a = testutil::random_tensor(gen, 4, 5);
    Tensor b = testutil::random_tensor(gen, 4, 5);
    Tape t;
    CHECK(t.scalar(global_loss(t, t.input(a), t.input(b), Mask(4, 1))) >= 0.0);
  }
  {
    Parameter a("a", testutil::random_tensor(gen, 4, 5));
    Parameter b("b", testutil::random_tensor(gen, 4, 5));
    auto fn = [&](Tape& t) { return global_loss(t, t.param(a), t.param(b), Mask(4, 1)); };
    CHECK(gradient_check(fn, {&a, &b}, 1e-4).passed());
  }
  {
    Tape t;
    CHECK_THROWS_AS(global_loss(t, t.input(h), t.input(h), Mask(5, 0)), ValidationError);
  }
}

TEST_CASE("local loss: window arithmetic and reference loop") {
  std::mt19937_64 gen(23);
  {
    // L = P: one window, equals the global loss exactly
    Tensor a = testutil::random_tensor(gen, 4, 5);
    Tensor b = testutil::random_tensor(gen, 4, 5);
    Tape t;
    double local = t.scalar(local_loss(t, t.input(a), t.input(b), 4, Mask(4, 1)));
    double global = t.scalar(global_loss(t, t.input(a), t.input(b), Mask(4, 1)));
    CHECK(local == doctest::Approx(global).epsilon(1e-12));
  }
  {
    // L < P: one whole-sentence window
    Tensor a = testutil::random_tensor(gen, 2, 5);
    Tensor b = testutil::random_tensor(gen, 2, 5);
    Tape t;
    double local = t.scalar(local_loss(t, t.input(a), t.input(b), 4, Mask(2, 1)));
    double global = t.scalar(global_loss(t, t.input(a), t.input(b), Mask(2, 1)));
    CHECK(local == doctest::Approx(global).epsilon(1e-12));
  }
  {
    // L=6, P=4 -> T=3 windows; compare against an independent loop
    Tensor a = testutil::random_tensor(gen, 6, 5);
    Tensor b = testutil::random_tensor(gen, 6, 5);
    Tape t;
    double got = t.scalar(local_loss(t, t.input(a), t.input(b), 4, Mask(6, 1)));
    double want = 0.0;
    for (int start = 0; start <= 2; ++start) {
      Tensor wa(4, 5), wb(4, 5);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) {
          wa.at(i, j) = a.at(start + i, j);
          wb.at(i, j) = b.at(start + i, j);
        }
      Tape tt;
      want += tt.scalar(
          sym_kl(tt, rep_to_distribution(tt, tt.input(wa)), rep_to_distribution(tt, tt.input(wb))));
    }
    want /= 3.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
  {
    Parameter a("a", testutil::random_tensor(gen, 6, 4));
    Parameter b("b", testutil::random_tensor(gen, 6, 4));
    auto fn = [&](Tape& t) { return local_loss(t, t.param(a), t.param(b), 3, Mask(6, 1)); };
    CHECK(gradient_check(fn, {&a, &b}, 1e-4).passed());
  }
}

TEST_CASE("task-level loss: empty set, whole-sentence mention, reference") {
  std::mt19937_64 gen(24);
  Tensor a = testutil::random_tensor(gen, 5, 4);
  Tensor b = testutil::random_tensor(gen, 5, 4);
  {
    Tape t;
    CHECK(t.scalar(task_level_loss(t, t.input(a), t.input(b), {})) == 0.0);
  }
  {
    Tape t;
    double task = t.scalar(task_level_loss(t, t.input(a), t.input(b), {{0, 4}}));
    double global = t.scalar(global_loss(t, t.input(a), t.input(b), Mask(5, 1)));
    CHECK(task == doctest::Approx(global).epsilon(1e-12));
  }
  {
    MentionSet mentions = {{0, 1}, {3, 4}};
    Tape t;
    double got = t.scalar(task_level_loss(t, t.input(a), t.input(b), mentions));
    double want = 0.0;
    for (auto [s, e] : mentions) {
      Tensor wa(e - s + 1, 4), wb(e - s + 1, 4);
      for (int i = s; i <= e; ++i)
        for (int j = 0; j < 4; ++j) {
          wa.at(i - s, j) = a.at(i, j);
          wb.at(i - s, j) = b.at(i, j);
        }
      Tape tt;
      want += tt.scalar(
          sym_kl(tt, rep_to_distribution(tt, tt.input(wa)), rep_to_distribution(tt, tt.input(wb))));
    }
    want /= 2.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
  {
    Parameter pa("a", a), pb("b", b);
    auto fn = [&](Tape& t) {
      return task_level_loss(t, t.param(pa), t.param(pb), {{0, 1}, {2, 4}});
    };
    CHECK(gradient_check(fn, {&pa, &pb}, 1e-4).passed());
  }
  {
    Tape t;
    CHECK_THROWS_AS(task_level_loss(t, t.input(a), t.input(b), {{3, 9}}), ValidationError);
  }
}

TEST_CASE("combined interaction: composition and level toggles") {
  std::mt19937_64 gen(25);
  Tensor a = testutil::random_tensor(gen, 6, 4);
  Tensor b = testutil::random_tensor(gen, 6, 4);
  Mask mask(6, 1);
  MentionSet mentions = {{1, 2}};
  InteractionConfig cfg;
  cfg.span_length = 3;

  Tape t;
  InteractionTerms terms = interaction_loss(t, t.input(a), t.input(b), mentions, mask, cfg);
  double g = t.scalar(global_loss(t, t.input(a), t.input(b), mask));
  double l = t.scalar(local_loss(t, t.input(a), t.input(b), 3, mask));
  double tk = t.scalar(task_level_loss(t, t.input(a), t.input(b), mentions));
  CHECK(t.scalar(terms.total) == doctest::Approx(g + l + tk).epsilon(1e-12));

  // disabling a level subtracts exactly its standalone value
  InteractionConfig no_local = cfg;
  no_local.local_level = false;
  Tape t2;
  InteractionTerms terms2 = interaction_loss(t2, t2.input(a), t2.input(b), mentions, mask, no_local);
  CHECK(t2.scalar(terms2.total) == doctest::Approx(g + tk).epsilon(1e-12));

  InteractionConfig none = cfg;
  none.global_level = none.local_level = none.task_level = false;
  Tape t3;
  CHECK(t3.scalar(interaction_loss(t3, t3.input(a), t3.input(b), mentions, mask, none).total) ==
        0.0);

  // identical representations zero out every level
  Tape t4;
  InteractionTerms eq = interaction_loss(t4, t4.input(a), t4.input(a), mentions, mask, cfg);
  CHECK(t4.scalar(eq.total) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("pooling is order-invariant within a block") {
  std::mt19937_64 gen(26);
  Tensor a = testutil::random_tensor(gen, 4, 5);
  Tensor swapped = a;
  for (int j = 0; j < 5; ++j) std::swap(swapped.at(1, j), swapped.at(2, j));
  Tape t;
  const Tensor& d1 = t.val(rep_to_distribution(t, t.input(a)));
  const Tensor& d2 = t.val(rep_to_distribution(t, t.input(swapped)));
  CHECK(d1.max_abs_diff(d2) < 1e-15);
}

TEST_CASE("per-token pooling mode is a valid alternative") {
  std::mt19937_64 gen(27);
  Tensor a = testutil::random_tensor(gen, 5, 4);
  Tensor b = testutil::random_tensor(gen, 5, 4);
  Mask mask(5, 1);
  Tape t;
  double v = t.scalar(
      global_loss(t, t.input(a), t.input(b), mask, InteractionConfig::Pooling::per_token));
  CHECK(v >= 0.0);
  Tape t2;
  CHECK(t2.scalar(global_loss(t2, t2.input(a), t2.input(a), mask,
                              InteractionConfig::Pooling::per_token)) ==
        doctest::Approx(0.0).epsilon(1e-9));
  Parameter pa("a", a), pb("b", b);
  auto fn = [&](Tape& tt) {
    return local_loss(tt, tt.param(pa), tt.param(pb), 3, mask,
                      InteractionConfig::Pooling::per_token);
  };
  CHECK(gradient_check(fn, {&pa, &pb}, 1e-4).passed());
}
