#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "pql3/common/error.hpp"
#include "pql3/model/generate.hpp"

using namespace pql3;
using namespace pql3::model;

namespace {

std::shared_ptr<const Weights> toy_weights(std::uint64_t seed = 1) {
  ModelConfig c;
  c.weight_seed = seed;
  return std::make_shared<const Weights>(Weights::random(c));
}

double norm(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

std::vector<int> random_tokens(std::mt19937_64& g, std::size_t n) {
  std::vector<int> t(n);
  for (auto& v : t) v = static_cast<int>(g() % 256);
  return t;
}

}  // namespace

TEST(Config, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_kv_groups = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.d_emb = 10;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RmsNorm, Examples) {
  Vec one(4, 1.0);
  auto y = rms_norm(Vec{2, 2, 2, 2}, one);
  for (double v : y) EXPECT_NEAR(v, 1.0, 1e-5);
  Vec x = {0.3, -1.2, 2.5, 0.7};
  auto a = rms_norm(x, one);
  Vec x7 = x;
  for (auto& v : x7) v *= 7;
  auto b = rms_norm(x7, one);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-3);
  EXPECT_NEAR(norm(a) / 2.0, 1.0, 1e-3);  // RMS over 4 entries
  EXPECT_THROW(rms_norm(Vec{}, Vec{}), ShapeError);
}

TEST(Rope, IdentityIsometryAndRelativePosition) {
  Vec x = {0.4, -1.1, 2.0, 0.3};
  EXPECT_EQ(rope(x, 0, 1e4), x);
  EXPECT_NEAR(norm(rope(x, 17, 1e4)), norm(x), 1e-9);
  EXPECT_THROW(rope(Vec{1, 2, 3}, 1, 1e4), ShapeError);
  std::mt19937_64 g(3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    Vec q(8), k(8);
    for (auto& v : q) v = n(g);
    for (auto& v : k) v = n(g);
    std::size_t s = g() % 30, t = g() % 30, d = g() % 30;
    auto dot = [](const Vec& a, const Vec& b) {
      double r = 0;
      for (std::size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
      return r;
    };
    EXPECT_NEAR(dot(rope(q, s, 1e4), rope(k, t, 1e4)), dot(rope(q, s + d, 1e4), rope(k, t + d, 1e4)), 1e-6);
  }
}

TEST(Attention, SingletonRowSumsAndHandCase) {
  Matrix q(1, 2), k(1, 2), v(1, 3);
  q.data = {0.3, 0.9};
  k.data = {-1.0, 2.0};
  v.data = {4.0, 5.0, 6.0};
  auto out = attention(q, k, v, true, 0.5);
  EXPECT_EQ(out.data, v.data);

  // Q = K = s*I2, V = I2, no mask: row i = softmax([s^2*scale*(i==0), s^2*scale*(i==1)]).
  double s = 1.5, scale = 1 / std::sqrt(2.0);
  Matrix qi(2, 2), ki(2, 2), vi(2, 2);
  qi.data = {s, 0, 0, s};
  ki.data = qi.data;
  vi.data = {1, 0, 0, 1};
  auto o = attention(qi, ki, vi, false, scale);
  double e = std::exp(s * s * scale);
  EXPECT_NEAR(o.at(0, 0), e / (e + 1), 1e-12);
  EXPECT_NEAR(o.at(0, 1), 1 / (e + 1), 1e-12);
  EXPECT_NEAR(o.at(1, 1), e / (e + 1), 1e-12);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(o.at(i, 0) + o.at(i, 1), 1.0, 1e-9);
  auto causal = attention(qi, ki, vi, true, scale);
  EXPECT_EQ(causal.at(0, 0), 1.0);
  EXPECT_THROW(attention(qi, Matrix(2, 3), vi, true, scale), ShapeError);
}

TEST(Softmax, SumsToOne) {
  auto p = softmax(Vec{1000, 999, -5, 0.25});
  double s = 0;
  for (double v : p) s += v;
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(Silu, ZeroSaturationAndDerivative) {
  auto w = toy_weights();
  Vec zero(8, 0.0);
  for (double v : swiglu(zero, w->layers[0])) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(silu(-20), 0.0, 1e-7);
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int i = 0; i < 10; ++i) {
    double x = u(g), h = 1e-5;
    double sig = 1 / (1 + std::exp(-x));
    double analytic = sig * (1 + x * (1 - sig));
    EXPECT_NEAR((silu(x + h) - silu(x - h)) / (2 * h), analytic, 1e-5);
  }
}

TEST(Weights, DeterministicAndFileRoundtrip) {
  auto a = toy_weights(4), b = toy_weights(4), c = toy_weights(5);
  EXPECT_EQ(*a, *b);
  EXPECT_NE(a->token_embedding, c->token_embedding);
  auto bytes = a->serialize();
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PQL3");
  EXPECT_EQ(Weights::deserialize(bytes), *a);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(Weights::deserialize(bad), IoError);
  bytes.pop_back();
  EXPECT_THROW(Weights::deserialize(bytes), IoError);
  std::string path = testing::TempDir() + "w.pql3";
  a->save(path);
  EXPECT_EQ(Weights::load(path), *a);
  std::remove(path.c_str());
}

TEST(Forward, CachedMatchesRecompute) {
  Model m(toy_weights());
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto toks = random_tokens(g, 16);
    auto seq = m.forward_sequence(toks);
    for (std::size_t t = 0; t < toks.size(); ++t) {
      auto ref = m.forward_recompute(std::span(toks).first(t + 1));
      for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(seq[t][i], ref[i], 1e-9);
    }
  }
}

TEST(Forward, PreconditionsAndDeterminism) {
  Model m(toy_weights());
  KvCache cache(2);
  EXPECT_THROW(m.forward_step(std::vector<int>{}, cache), ShapeError);
  std::vector<int> too_long(65, 1);
  KvCache c2(2);
  EXPECT_THROW(m.forward_step(too_long, c2), CapacityError);
  std::vector<int> t = {72, 105, 33};
  KvCache c3(2), c4(2);
  EXPECT_EQ(m.forward_step(t, c3), Model(toy_weights()).forward_step(t, c4));
  EXPECT_EQ(c3.length(), 3u);
}

TEST(Forward, CacheAppendDoesNotMutateHistory) {
  Model m(toy_weights());
  std::vector<int> t = {1, 2, 3, 4};
  KvCache cache(2);
  m.forward_step(std::span(t).first(3), cache);
  auto k_before = cache.keys(1);
  m.forward_step(t, cache);
  for (std::size_t i = 0; i < k_before.size(); ++i) EXPECT_EQ(cache.keys(1)[i], k_before[i]);
}

TEST(Forward, Causality) {
  Model m(toy_weights());
  std::mt19937_64 g(11);
  auto a = random_tokens(g, 10);
  auto b = a;
  b[6] = (b[6] + 1) % 256;
  auto la = m.forward_sequence(a), lb = m.forward_sequence(b);
  for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(la[t], lb[t]);
  EXPECT_NE(la[6], lb[6]);
  for (const auto& row : la)
    for (double v : row) EXPECT_TRUE(std::isfinite(v));
}

TEST(Select, Rules) {
  std::mt19937_64 g(0);
  Vec one_hot(256, 0.0);
  one_hot[7] = 1.0;
  for (int k : {1, 5, 256}) {
    auto s = select_token(one_hot, k, SelectionRule::Argmax, g);
    EXPECT_EQ(s.token, 7);
    EXPECT_EQ(s.candidates.size(), static_cast<std::size_t>(k));
    EXPECT_NE(std::find(s.candidates.begin(), s.candidates.end(), 7), s.candidates.end());
  }
  EXPECT_EQ(select_token(Vec{1, 1, 0}, 1, SelectionRule::Argmax, g).token, 0);
  EXPECT_EQ(select_token(Vec{1, 1, 0}, 2, SelectionRule::Argmax, g).candidates, (std::vector<int>{0, 1}));
  EXPECT_THROW(select_token(Vec{1, 2}, 3, SelectionRule::Argmax, g), ConfigError);
  Vec l = {0.5, 2.0, -1.0, 1.9};
  Vec shifted = l;
  for (auto& v : shifted) v += 13.25;
  EXPECT_EQ(select_token(l, 2, SelectionRule::Argmax, g).token, select_token(shifted, 2, SelectionRule::Argmax, g).token);
  std::mt19937_64 r1(3), r2(3);
  for (int i = 0; i < 20; ++i) {
    auto s1 = select_token(l, 3, SelectionRule::SeededSample, r1);
    auto s2 = select_token(l, 3, SelectionRule::SeededSample, r2);
    EXPECT_EQ(s1.token, s2.token);
    EXPECT_NE(s1.token, 2);
  }
}

TEST(Tokenizer, ByteRoundtrip) {
  std::string s = "caf\xc3\xa9 42";
  auto t = encode_text(s);
  EXPECT_EQ(t.size(), s.size());
  EXPECT_EQ(decode_tokens(t), s);
}

TEST(Generate, CachedEqualsRecompute) {
  Model m(toy_weights());
  GenerationConfig cfg;
  cfg.max_new_tokens = 6;
  cfg.top_k = 3;
  auto p = encode_text("The cat");
  auto a = generate(m, p, cfg), b = generate_recompute(m, p, cfg);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.steps.size(), 6u);
}
