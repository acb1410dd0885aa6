#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pql3/common/error.hpp"
#include "pql3/fhe/ops.hpp"
#include "pql3/quant/dual_tensor.hpp"

using namespace pql3;
using namespace pql3::quant;

TEST(Calibrate, ThreeSampleExample) {
  std::vector<double> s = {-1.0, 0.5, 1.0};
  auto q = calibrate(s, 2);
  // Independent recomputation: (max - min) / (2^2 - 1), zero point = round(-min / scale).
  double scale = (1.0 - -1.0) / 3.0;
  EXPECT_DOUBLE_EQ(q.scale, scale);
  EXPECT_EQ(q.zero_point, 2);  // 1.5 rounds to even
  EXPECT_EQ(q.observed_min, -1.0);
  EXPECT_EQ(q.observed_max, 1.0);
  EXPECT_FALSE(q.degenerate);
}

TEST(Calibrate, DegenerateAndEmpty) {
  for (int bits : {1, 2, 5}) {
    std::vector<double> s = {0.0};
    auto q = calibrate(s, bits);
    EXPECT_TRUE(q.degenerate);
    EXPECT_EQ(q.scale, 1.0);
    EXPECT_EQ(q.zero_point, 0);
  }
  EXPECT_THROW(calibrate(std::vector<double>{}, 2), CalibrationError);
}

TEST(Calibrate, SymmetricZeroAnchoring) {
  for (int bits = 1; bits <= 8; ++bits)
    for (double a : {0.3, 1.0, 7.5}) {
      std::vector<double> s = {-a, a};
      auto q = calibrate(s, bits);
      EXPECT_LE(std::fabs(q.dequantize(q.zero_point)), q.scale / 2 + 1e-12);
    }
}

TEST(Calibrate, OrderInvariantAndMergeable) {
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-3, 5);
  std::vector<double> s(500);
  for (auto& x : s) x = u(g);
  auto q1 = calibrate(s, 3);
  std::shuffle(s.begin(), s.end(), g);
  EXPECT_EQ(calibrate(s, 3), q1);
  Calibrator a, b;
  a.observe(std::span(s).first(200));
  b.observe(std::span(s).subspan(200));
  b.merge(a);
  EXPECT_EQ(b.finish(3), q1);
}

TEST(Calibrate, IncludeZeroWidensRange) {
  Calibrator c;
  c.observe(std::vector<double>{0.5, 2.0});
  auto q = c.finish(2, true);
  EXPECT_EQ(q.observed_min, 0.0);
  EXPECT_EQ(q.zero_point, 0);
  EXPECT_EQ(q.quantize(0.0), 0);
}

TEST(Quantize, Endpoints) {
  auto q = params_from_range(-1.0, 2.0, 2);
  EXPECT_EQ(q.quantize(0.0), q.zero_point);
  EXPECT_EQ(q.quantize(2.0), 3);
  EXPECT_EQ(q.quantize(-1.0), 0);
  EXPECT_EQ(q.quantize(100.0), 3);
  EXPECT_EQ(q.quantize(-100.0), 0);
  EXPECT_EQ(q.dequantize(q.zero_point), 0.0);
  EXPECT_NEAR(q.dequantize(q.quantize(q.observed_min)), q.observed_min, q.scale / 2);
  EXPECT_THROW(q.dequantize(4), RangeError);
  EXPECT_THROW(q.dequantize(-1), RangeError);
}

TEST(Quantize, TiesToEven) {
  QuantParams q;
  q.n_bits = 4;
  q.scale = 1.0;
  q.zero_point = 0;
  EXPECT_EQ(q.quantize(0.5), 0);
  EXPECT_EQ(q.quantize(1.5), 2);
  EXPECT_EQ(q.quantize(2.5), 2);
}

TEST(Quantize, RoundtripBoundAndMonotone) {
  std::mt19937_64 g(9);
  for (int bits : {2, 4, 8}) {
    auto q = params_from_range(-2.3, 4.1, bits);
    std::uniform_real_distribution<double> u(q.observed_min, q.observed_max);
    std::vector<double> xs(10000);
    for (auto& x : xs) x = u(g);
    auto codes = quantize(xs, q);
    auto back = dequantize(codes, q);
    for (std::size_t i = 0; i < xs.size(); ++i) ASSERT_LE(std::fabs(xs[i] - back[i]), q.scale / 2 + 1e-12) << xs[i];
    std::sort(xs.begin(), xs.end());
    auto sorted_codes = quantize(xs, q);
    EXPECT_TRUE(std::is_sorted(sorted_codes.begin(), sorted_codes.end()));
  }
}

TEST(Dequantize, SharedParamsLinearity) {
  auto q = params_from_range(-1.5, 3.0, 4);
  for (std::int64_t a = 0; a <= q.max_code(); ++a)
    for (std::int64_t b = 0; b <= q.max_code(); ++b) {
      // deq(a) + deq(b) = (a + b - 2 zp) * scale
      double lhs = q.dequantize(a) + q.dequantize(b);
      double rhs = static_cast<double>(a + b - 2 * q.zero_point) * q.scale;
      EXPECT_NEAR(lhs, rhs, 1e-12);
    }
}

TEST(DualTensor, InvariantAndShape) {
  auto q = params_from_range(-1, 1, 2);
  auto t = DualTensor::from_real({2, 2}, {-1, -0.2, 0.4, 1}, q);
  auto d = t.dequantized();
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_LE(std::fabs(t.real[i] - d[i]), q.scale / 2 + 1e-12);
  EXPECT_THROW(DualTensor::from_real({3}, {1, 2}, q), ShapeError);
  auto c = DualTensor::from_codes({2}, {0, 3}, q);
  EXPECT_DOUBLE_EQ(c.real[1], q.dequantize(3));
}

TEST(BuildLut, IdentityExpAndSilu) {
  auto q = params_from_range(-1, 2, 2);
  auto id = build_lut([](double x) { return x; }, q, q, 2);
  for (std::uint64_t v = 0; v < 4; ++v) EXPECT_EQ(id(v), v);

  auto qin = params_from_range(-4, 0, 4);
  auto qout = params_from_range(0, 1, 4);
  auto ex = build_lut([](double x) { return std::exp(x); }, qin, qout, 4);
  for (std::uint64_t v = 1; v < 16; ++v) EXPECT_GE(ex(v), ex(v - 1));

  auto qs = params_from_range(-3, 3, 3);
  auto silu = build_lut([](double x) { return x / (1 + std::exp(-x)); }, qs, qs, 3);
  EXPECT_EQ(silu(static_cast<std::uint64_t>(qs.zero_point)), static_cast<std::uint64_t>(qs.zero_point));

  EXPECT_THROW(build_lut([](double x) { return std::log(x - 100); }, q, q, 2), TableError);
  EXPECT_THROW(build_lut([](double x) { return x; }, qs, qs, 2), ShapeError);
}

TEST(BuildLut, IdentityTableThroughPbs) {
  auto km = fhe::keygen(fhe::CryptoParams::micro(2, 3, 31));
  fhe::BlindRotatePbs engine(km.server);
  auto q = params_from_range(-1, 2, 2);
  auto id = build_lut([](double x) { return x; }, q, q, 2);
  EXPECT_EQ(id, fhe::LookupTable::identity(2));
  for (std::uint64_t m = 0; m < 4; ++m) {
    auto c = km.client.encrypt(m);
    EXPECT_EQ(km.client.decrypt(fhe::pbs(c, id, engine)), km.client.decrypt(fhe::pbs(c, fhe::LookupTable::identity(2), engine)));
  }
}

TEST(QuantParams, SerializeRoundtrip) {
  auto q = params_from_range(-0.7, 1.9, 3);
  ByteWriter w;
  q.serialize(w);
  auto b = w.take();
  ByteReader in(b);
  EXPECT_EQ(QuantParams::deserialize(in), q);
}
