#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "shine/encoder.hpp"
#include "shine/errors.hpp"
#include "shine/gradcheck.hpp"
#include "testutil.hpp"

using namespace shine;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.contextual_layers = 1;
  cfg.feature_layers = 1;
  cfg.fusion_layers = 1;
  cfg.dropout = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("frequency attention: all-ones F reduces to plain attention") {
  std::mt19937_64 gen(10);
  for (int iter = 0; iter < 20; ++iter) {
    int L = 2 + static_cast<int>(gen() % 6), d = 4;
    Tensor q = testutil::random_tensor(gen, L, d);
    Tensor k = testutil::random_tensor(gen, L, d);
    Tensor v = testutil::random_tensor(gen, L, d);
    Mask mask(L, 1);
    Tape t;
    Tape::Var plain = attention(t, t.input(q), t.input(k), t.input(v), mask);
    Tape::Var mod =
        frequency_attention(t, t.input(q), t.input(k), t.input(v), Tensor::full(L, L, 1.0), mask);
    CHECK(t.val(plain).max_abs_diff(t.val(mod)) < 1e-6);
  }
}

TEST_CASE("frequency attention: worked two-token case") {
  // identical Q and K rows force A = [[0.5,0.5],[0.5,0.5]]; F = [[1,2],[2,1]]
  // gives modulated weights [1/3, 2/3] in each row.
  Tensor q(2, 3), k(2, 3);
  for (int j = 0; j < 3; ++j) {
    q.at(0, j) = q.at(1, j) = 0.7;
    k.at(0, j) = k.at(1, j) = -0.2;
  }
  Tensor v(2, 3);
  v.at(0, 0) = 1.0;
  v.at(1, 0) = 2.0;
  Tensor f(2, 2);
  f.at(0, 0) = f.at(1, 1) = 1.0;
  f.at(0, 1) = f.at(1, 0) = 2.0;
  Mask mask(2, 1);
  Tape t;
  Tape::Var out = frequency_attention(t, t.input(q), t.input(k), t.input(v), f, mask);
  // row 0: (1/3)*v0 + (2/3)*v1 in column 0
  CHECK(t.val(out).at(0, 0) == doctest::Approx(1.0 / 3.0 + 2.0 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(t.val(out).at(1, 0) == doctest::Approx(2.0 / 3.0 + 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("frequency attention: modulated rows sum to one and invariances hold") {
  std::mt19937_64 gen(11);
  for (int iter = 0; iter < 30; ++iter) {
    int L = 2 + static_cast<int>(gen() % 6);
    Tensor q = testutil::random_tensor(gen, L, 4);
    Tensor k = testutil::random_tensor(gen, L, 4);
    Tensor f = Tensor::full(L, L, 1.0);
    for (int i = 0; i < L; ++i)
      for (int j = i + 1; j < L; ++j) {
        double val = 1.0 + static_cast<double>(gen() % 4);
        f.at(i, j) = f.at(j, i) = val;
      }
    Mask mask(L, 1);

    // direct recomputation of G(A) rows
    Tape t;
    Tape::Var a = t.softmax_rows_masked(
        t.scale(t.matmul_nt(t.input(q), t.input(k)), 1.0 / std::sqrt(4.0)), mask);
    Tape::Var m = t.mul(a, t.input(f));
    Tape::Var g = t.div_colvec(m, t.row_sum(m));
    const Tensor& G = t.val(g);
    for (int i = 0; i < L; ++i) {
      double sum = 0.0;
      for (int j = 0; j < L; ++j) sum += G.at(i, j);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    // scaling F by a positive constant leaves G(A) unchanged
    Tensor f2 = f;
    for (std::size_t i2 = 0; i2 < f2.size(); ++i2) f2[i2] *= 3.7;
    Tape t2;
    Tape::Var a2 = t2.softmax_rows_masked(
        t2.scale(t2.matmul_nt(t2.input(q), t2.input(k)), 1.0 / std::sqrt(4.0)), mask);
    Tape::Var m2 = t2.mul(a2, t2.input(f2));
    Tape::Var g2 = t2.div_colvec(m2, t2.row_sum(m2));
    CHECK(t2.val(g2).max_abs_diff(G) < 1e-9);

    // monotone modulation: raising one off-diagonal F entry raises that weight
    int i = static_cast<int>(gen() % L);
    int j = (i + 1) % L;
    Tensor f3 = f;
    f3.at(i, j) += 2.0;
    Tape t3;
    Tape::Var a3 = t3.softmax_rows_masked(
        t3.scale(t3.matmul_nt(t3.input(q), t3.input(k)), 1.0 / std::sqrt(4.0)), mask);
    Tape::Var m3 = t3.mul(a3, t3.input(f3));
    Tape::Var g3 = t3.div_colvec(m3, t3.row_sum(m3));
    CHECK(t3.val(g3).at(i, j) > G.at(i, j));
  }
}

TEST_CASE("frequency attention gradients pass finite differences") {
  std::mt19937_64 gen(12);
  int L = 5, d = 4;
  Parameter q("q", testutil::random_tensor(gen, L, d));
  Parameter k("k", testutil::random_tensor(gen, L, d));
  Parameter v("v", testutil::random_tensor(gen, L, d));
  Tensor f = Tensor::full(L, L, 1.0);
  f.at(1, 2) = f.at(2, 1) = 3.0;
  f.at(0, 3) = f.at(3, 0) = 2.0;
  Mask mask(L, 1);
  auto fn = [&](Tape& t) {
    Tape::Var out = frequency_attention(t, t.param(q), t.param(k), t.param(v), f, mask);
    return t.sum_all(t.mul(out, out));
  };
  CHECK(gradient_check(fn, {&q, &k, &v}, 1e-4).passed());
}

TEST_CASE("frequency attention rejects an all-masked sentence") {
  Tape t;
  Tensor q(2, 4), k(2, 4), v(2, 4);
  Mask dead(2, 0);
  CHECK_THROWS_AS(frequency_attention(t, t.input(q), t.input(k), t.input(v),
                                      Tensor::full(2, 2, 1.0), dead),
                  NumericError);
}

TEST_CASE("contextual encoder: shapes, mask contract, gradients") {
  EncoderConfig cfg = tiny_config();
  Rng rng(100);
  ParamStore store;
  ContextualEncoder enc = ContextualEncoder::create(store, cfg, 12, rng);

  {
    Tape t;
    Tape::Var h = enc.forward(t, cfg, {3}, Mask{1}, nullptr);
    CHECK(t.val(h).rows() == 1);
    CHECK(t.val(h).cols() == cfg.d_model);
  }
  {
    // changing the content of PAD-masked tail positions must not affect
    // unmasked rows, and the masked rows themselves are zeroed
    Mask mask = {1, 1, 1, 0, 0};
    Tape t1, t2;
    const Tensor& h1 = t1.val(enc.forward(t1, cfg, {3, 5, 7, 2, 4}, mask, nullptr));
    const Tensor& h2 = t2.val(enc.forward(t2, cfg, {3, 5, 7, 4, 2}, mask, nullptr));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < cfg.d_model; ++j)
        CHECK(h1.at(i, j) == doctest::Approx(h2.at(i, j)).epsilon(1e-15));
    for (int i = 3; i < 5; ++i)
      for (int j = 0; j < cfg.d_model; ++j) CHECK(h1.at(i, j) == 0.0);
  }
  {
    Tape t;
    CHECK_THROWS_AS(enc.forward(t, cfg, {99}, Mask{1}, nullptr), ValidationError);
  }
  {
    std::vector<int> ids = {1, 5, 9};
    Mask mask(3, 1);
    auto fn = [&](Tape& t) {
      Tape::Var h = enc.forward(t, cfg, ids, mask, nullptr);
      return t.mean_all(t.mul(h, h));
    };
    CHECK(gradient_check(fn, store.all(), 1e-4).passed());
  }
}

TEST_CASE("feature encoder: equivariance, width checks, gradients") {
  EncoderConfig cfg = tiny_config();
  Rng rng(200);
  ParamStore store;
  int width = 7;
  FeatureEncoder enc = FeatureEncoder::create(store, cfg, width, rng);

  {
    // identical feature rows at two positions -> identical output rows
    // (no positional encoding in the feature encoder)
    Tensor x(3, width);
    for (int j = 0; j < width; ++j) {
      x.at(0, j) = x.at(2, j) = 0.25 * j;
      x.at(1, j) = 1.0 - 0.1 * j;
    }
    Tape t;
    const Tensor& h = t.val(enc.forward(t, cfg, x, Mask(3, 1), nullptr));
    for (int j = 0; j < cfg.d_model; ++j)
      CHECK(h.at(0, j) == doctest::Approx(h.at(2, j)).epsilon(1e-12));
  }
  {
    Tape t;
    CHECK_THROWS_AS(enc.forward(t, cfg, Tensor(3, width + 2), Mask(3, 1), nullptr),
                    DimensionError);
  }
  {
    std::mt19937_64 gen(13);
    Tensor x = testutil::random_tensor(gen, 4, width);
    auto fn = [&](Tape& t) {
      Tape::Var h = enc.forward(t, cfg, x, Mask(4, 1), nullptr);
      return t.mean_all(t.mul(h, h));
    };
    CHECK(gradient_check(fn, store.all(), 1e-4).passed());
  }
}

TEST_CASE("NER-mode bundle drops the entity block and width-checks") {
  FeatureBundle b;
  b.pos_onehot = Tensor(4, 3);
  b.deprel_onehot = Tensor(4, 5);
  b.span_counts = Tensor(4, 6);
  CHECK(b.width() == 14);
  b.entity_onehot = Tensor(4, 7);
  CHECK(b.width() == 21);
  Tensor cat = b.concat();
  CHECK(cat.rows() == 4);
  CHECK(cat.cols() == 21);
}

TEST_CASE("fusion: shape, all-ones reduction, gradients") {
  EncoderConfig cfg = tiny_config();
  Rng rng(300);
  ParamStore store;
  FusionEncoder fuse = FusionEncoder::create(store, cfg, rng);
  std::mt19937_64 gen(14);
  int L = 5;
  Tensor hc = testutil::random_tensor(gen, L, cfg.d_model);
  Tensor hl = testutil::random_tensor(gen, L, cfg.d_model);
  Mask mask(L, 1);

  Tensor freq = Tensor::full(L, L, 1.0);
  freq.at(1, 2) = freq.at(2, 1) = 4.0;

  {
    Tape t;
    const Tensor& h =
        t.val(fuse.forward(t, cfg, t.input(hc), t.input(hl), freq, mask, nullptr));
    CHECK(h.rows() == L);
    CHECK(h.cols() == cfg.d_model);
    CHECK(h.all_finite());
  }
  {
    // with F = 1 the fused stack matches the same network built on plain
    // attention layers; compare against a hand-built plain-path forward
    Tape t;
    Tape::Var modulated = fuse.forward(t, cfg, t.input(hc), t.input(hl),
                                       Tensor::full(L, L, 1.0), mask, nullptr);
    Tape t2;
    Tape::Var x = t2.add_rowvec(
        t2.matmul(t2.concat_cols(t2.input(hc), t2.input(hl)), t2.param(*fuse.fuse_w)),
        t2.param(*fuse.fuse_b));
    for (const auto& layer : fuse.layers)
      x = layer.forward(t2, x, cfg, mask, nullptr, nullptr);  // plain attention path
    x = t2.zero_rows(x, mask);
    CHECK(t.val(modulated).max_abs_diff(t2.val(x)) < 1e-6);
  }
  {
    Parameter phc("hc", hc), phl("hl", hl);
    auto fn = [&](Tape& t) {
      Tape::Var h = fuse.forward(t, cfg, t.param(phc), t.param(phl), freq, mask, nullptr);
      return t.mean_all(t.mul(h, h));
    };
    std::vector<Parameter*> inputs = store.all();
    inputs.push_back(&phc);
    inputs.push_back(&phl);
    CHECK(gradient_check(fn, inputs, 1e-4).passed());
  }
}

TEST_CASE("encoder outputs stay finite on random inputs") {
  EncoderConfig cfg = tiny_config();
  Rng rng(400);
  ParamStore store;
  ContextualEncoder ctx = ContextualEncoder::create(store, cfg, 30, rng);
  FeatureEncoder feat = FeatureEncoder::create(store, cfg, 9, rng);
  FusionEncoder fuse = FusionEncoder::create(store, cfg, rng);
  std::mt19937_64 gen(15);
  for (int iter = 0; iter < 10; ++iter) {
    int L = 1 + static_cast<int>(gen() % 8);
    std::vector<int> ids(L);
    for (auto& id : ids) id = static_cast<int>(gen() % 30);
    Tensor features = testutil::random_tensor(gen, L, 9);
    Mask mask(L, 1);
    Tape t;
    Tape::Var hc = ctx.forward(t, cfg, ids, mask, nullptr);
    Tape::Var hl = feat.forward(t, cfg, features, mask, nullptr);
    Tape::Var hf = fuse.forward(t, cfg, hc, hl, Tensor::full(L, L, 1.0), mask, nullptr);
    CHECK(t.val(hf).all_finite());
  }
}

TEST_CASE("dropout draws are reproducible and disabled in eval mode") {
  EncoderConfig cfg = tiny_config();
  cfg.dropout = 0.3;
  Rng rng(500);
  ParamStore store;
  ContextualEncoder enc = ContextualEncoder::create(store, cfg, 10, rng);
  std::vector<int> ids = {1, 2, 3};
  Mask mask(3, 1);
  Rng d1(9), d2(9);
  Tape t1, t2, t3;
  const Tensor& a = t1.val(enc.forward(t1, cfg, ids, mask, &d1));
  const Tensor& b = t2.val(enc.forward(t2, cfg, ids, mask, &d2));
  CHECK(a == b);
  const Tensor& c = t3.val(enc.forward(t3, cfg, ids, mask, nullptr));
  Tape t4;
  const Tensor& d = t4.val(enc.forward(t4, cfg, ids, mask, nullptr));
  CHECK(c == d);
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg = tiny_config();
  cfg.d_model = 15;  // not divisible by 4 heads
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.fusion_layers = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
