#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <sstream>
#include <vector>

#include "cachenet/neural.hpp"

using namespace cachenet;

namespace {

std::vector<double> random_vector(SeededRng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

NetParams random_params(const LayerSpec& spec, SeededRng& rng) {
  return NetParams(spec, random_vector(rng, spec.param_count()));
}

// Straight-line evaluation in long double, reading parameters by index
// arithmetic rather than through the structured accessors.
std::vector<long double> reference_forward(const NetParams& p, const std::vector<double>& x) {
  const auto& sizes = p.spec().sizes;
  const auto flat = p.flat();
  std::vector<long double> a(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    std::vector<long double> z(out);
    for (std::size_t i = 0; i < out; ++i) {
      long double acc = flat[off + out * in + i];
      for (std::size_t j = 0; j < in; ++j) acc += static_cast<long double>(flat[off + i * in + j]) * a[j];
      z[i] = acc;
    }
    off += out * in + out;
    if (l + 2 < sizes.size()) {
      for (auto& v : z) v = v > 0 ? v : 0;
    } else {
      long double m = z[0], tot = 0;
      for (auto v : z) m = std::max(m, v);
      for (auto& v : z) tot += (v = std::exp(v - m));
      for (auto& v : z) v /= tot;
    }
    a = std::move(z);
  }
  return a;
}

double quadratic_loss(const NetParams& p, const std::vector<double>& x, const std::vector<double>& target) {
  const auto o = forward(p, x);
  double l = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) l += (o[i] - target[i]) * (o[i] - target[i]);
  return l;
}

std::vector<double> quadratic_seed(const NetParams& p, const std::vector<double>& x, const std::vector<double>& target) {
  const auto o = forward(p, x);
  std::vector<double> g(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) g[i] = 2.0 * (o[i] - target[i]);
  return g;
}

}  // namespace

TEST(LayerSpec, Validation) {
  EXPECT_THROW(LayerSpec({3}), InvalidInput);
  EXPECT_THROW(LayerSpec({3, 0, 2}), InvalidInput);
  EXPECT_EQ(LayerSpec({3, 4, 2}).param_count(), 3u * 4 + 4 + 4 * 2 + 2);
}

TEST(Forward, ZeroParamsGiveUniformOutput) {
  const NetParams p(LayerSpec{4, 6, 5});
  for (double x : forward(p, std::vector<double>{1, -2, 3, 0.5})) EXPECT_DOUBLE_EQ(x, 0.2);
}

TEST(Forward, IdentityNetIsClosedFormSoftmax) {
  NetParams p(LayerSpec{2, 2});
  p.weight(0, 0, 0) = 1.0;
  p.weight(0, 1, 1) = 1.0;
  const auto o = forward(p, std::vector<double>{1.0, 0.0});
  const double e = std::exp(1.0);
  EXPECT_NEAR(o[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(o[1], 1.0 / (e + 1.0), 1e-15);
  EXPECT_NEAR(o[0], 0.7311, 1e-4);
}

TEST(Forward, MatchesExtendedPrecisionReference) {
  SeededRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const LayerSpec spec{5, 7, 6, 4};
    const auto p = random_params(spec, rng);
    const auto x = random_vector(rng, 5, -3, 3);
    const auto got = forward(p, x);
    const auto want = reference_forward(p, x);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_LT(std::fabs((got[i] - static_cast<double>(want[i])) / static_cast<double>(want[i])), 1e-12);
    }
  }
}

TEST(Forward, OutputIsPositiveAndSumsToOne) {
  SeededRng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_params(LayerSpec{6, 10, 6}, rng);
    const auto o = forward(p, random_vector(rng, 6, -50, 50));
    double s = 0.0;
    for (double x : o) {
      EXPECT_GT(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-10);
  }
}

TEST(Forward, LargeLogitsDoNotOverflow) {
  NetParams p(LayerSpec{1, 3});
  p.weight(0, 0, 0) = 1000.0;
  const auto o = forward(p, std::vector<double>{1.0});
  EXPECT_NEAR(o[0], 1.0, 1e-12);
  for (double x : o) EXPECT_TRUE(std::isfinite(x));
}

TEST(Forward, TopMOfSoftmaxEqualsTopMOfLogits) {
  SeededRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_params(LayerSpec{8, 12, 8}, rng);
    const auto x = random_vector(rng, 8);
    EXPECT_EQ(top_m_action(forward(p, x), 3), top_m_action(logits(p, x), 3));
  }
}

TEST(Forward, RejectsBadInput) {
  const NetParams p(LayerSpec{2, 2});
  EXPECT_THROW(forward(p, std::vector<double>{1.0}), InvalidInput);
  EXPECT_THROW(forward(p, std::vector<double>{1.0, std::nan("")}), InvalidInput);
}

TEST(Backward, ZeroSeedGivesZeroGradient) {
  SeededRng rng(4);
  const auto p = random_params(LayerSpec{3, 5, 4}, rng);
  const auto g = backward(p, random_vector(rng, 3), std::vector<double>(4, 0.0));
  for (double x : g.flat()) EXPECT_EQ(x, 0.0);
}

// Single softmax layer o = softmax(Wx + b), L = sum (o - t)^2:
// dL/dz_i = sum_k 2 (o_k - t_k) o_k (delta_ki - o_i), dL/dW_ij = dL/dz_i x_j.
TEST(Backward, SingleLayerMatchesSoftmaxJacobian) {
  SeededRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const LayerSpec spec{4, 3};
    const auto p = random_params(spec, rng);
    const auto x = random_vector(rng, 4);
    const auto t = random_vector(rng, 3, 0, 1);
    const auto o = forward(p, x);
    std::vector<double> dz(3, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 3; ++k) dz[i] += 2.0 * (o[k] - t[k]) * o[k] * ((k == i ? 1.0 : 0.0) - o[i]);
    const auto g = backward(p, x, quadratic_seed(p, x, t));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g.weight(0, i, j), dz[i] * x[j], 1e-10);
      EXPECT_NEAR(g.biases(0)[i], dz[i], 1e-10);
    }
  }
}

TEST(Backward, MatchesCentralFiniteDifferences) {
  SeededRng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const LayerSpec spec{6, 9, 7, 5};
    auto p = random_params(spec, rng);
    const auto x = random_vector(rng, 6);
    const auto t = random_vector(rng, 5, 0, 1);
    const auto g = backward(p, x, quadratic_seed(p, x, t));
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.flat().size(); ++i) {
      const double keep = p.flat()[i];
      p.flat()[i] = keep + h;
      const double up = quadratic_loss(p, x, t);
      p.flat()[i] = keep - h;
      const double down = quadratic_loss(p, x, t);
      p.flat()[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double a = g.flat()[i];
      const double scale = std::max({std::fabs(a), std::fabs(fd), 1e-7});
      EXPECT_LE(std::fabs(a - fd) / scale, 1e-4) << "coordinate " << i;
    }
  }
}

TEST(SgdStep, ArithmeticAndZeroGradient) {
  const LayerSpec spec{1, 1};  // one weight, one bias
  const NetParams p(spec, {1.0, 2.0});
  EXPECT_EQ(sgd_step(p, NetParams(spec, {1.0, -1.0}), 1.0).flat()[0], 0.0);
  EXPECT_EQ(sgd_step(p, NetParams(spec, {1.0, -1.0}), 1.0).flat()[1], 3.0);
  EXPECT_EQ(sgd_step(p, NetParams(spec), 0.5), p);
  EXPECT_THROW(sgd_step(p, NetParams(spec), 0.0), InvalidInput);
  EXPECT_THROW(sgd_step(p, NetParams(LayerSpec{2, 1}), 0.1), InvalidInput);
}

TEST(SgdStep, DescendsQuadraticLossMonotonically) {
  SeededRng rng(7);
  auto p = random_params(LayerSpec{4, 6, 3}, rng);
  const auto x = random_vector(rng, 4);
  const std::vector<double> t{1.0, 0.0, 0.0};
  double prev = quadratic_loss(p, x, t);
  for (int step = 0; step < 200; ++step) {
    p = sgd_step(p, backward(p, x, quadratic_seed(p, x, t)), 1e-2);
    const double now = quadratic_loss(p, x, t);
    ASSERT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

TEST(ParamDistance, ThreeFourFive) {
  const LayerSpec spec{1, 1};
  EXPECT_EQ(param_distance(NetParams(spec, {3, 4}), NetParams(spec)), 5.0);
  EXPECT_EQ(param_distance(NetParams(spec, {3, 4}), NetParams(spec, {3, 4})), 0.0);
  EXPECT_THROW(param_distance(NetParams(spec), NetParams(LayerSpec{1, 2})), InvalidInput);
}

TEST(ParamDistance, Symmetric) {
  SeededRng rng(8);
  const LayerSpec spec{3, 4, 2};
  const auto a = random_params(spec, rng), b = random_params(spec, rng);
  EXPECT_EQ(param_distance(a, b), param_distance(b, a));
}

TEST(InitParams, DeterministicZeroBiasAndBounded) {
  const LayerSpec spec{10, 20, 5};
  SeededRng r1(9), r2(9);
  const auto a = init_params(spec, r1), b = init_params(spec, r2);
  EXPECT_EQ(a, b);
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    for (double x : a.biases(l)) EXPECT_EQ(x, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(a.fan_in(l) + a.fan_out(l)));
    for (double w : a.weights(l)) EXPECT_LE(std::fabs(w), limit);
  }
}

TEST(InitParams, WeightMeanIsZeroWithinThreeStandardErrors) {
  SeededRng rng(10);
  const LayerSpec spec{100, 1000};  // 1e5 weights
  const auto p = init_params(spec, rng);
  double s = 0.0;
  for (double w : p.weights(0)) s += w;
  const double n = static_cast<double>(p.weights(0).size());
  const double limit = std::sqrt(6.0 / 1100.0);
  const double se = limit / std::sqrt(3.0) / std::sqrt(n);
  EXPECT_LT(std::fabs(s / n), 3.0 * se);
}

TEST(NetParams, FlatAndStructuredViewsAlias) {
  NetParams p(LayerSpec{2, 3, 1});
  for (std::size_t i = 0; i < p.flat().size(); ++i) p.flat()[i] = static_cast<double>(i);
  // layer 0: weights rows [0..5], biases [6..8]; layer 1: weights [9..11], bias [12]
  EXPECT_EQ(p.weight(0, 1, 0), 2.0);
  EXPECT_EQ(p.biases(0)[2], 8.0);
  EXPECT_EQ(p.weight(1, 0, 2), 11.0);
  EXPECT_EQ(p.biases(1)[0], 12.0);
  p.weight(1, 0, 1) = -1.0;
  EXPECT_EQ(p.flat()[10], -1.0);
  const NetParams q(p.spec(), std::vector<double>(p.flat().begin(), p.flat().end()));
  EXPECT_EQ(p, q);
}

TEST(Checkpoint, RoundTripsAndHasDocumentedLayout) {
  SeededRng rng(11);
  const auto p = random_params(LayerSpec{3, 2}, rng);
  std::stringstream buf;
  save_params(buf, p);
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.size(), 8u * (1 + 2 + p.flat().size()));
  auto u64_at = [&](std::size_t i) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
    return v;
  };
  EXPECT_EQ(u64_at(0), 2u);
  EXPECT_EQ(u64_at(1), 3u);
  EXPECT_EQ(u64_at(2), 2u);
  for (std::size_t i = 0; i < p.flat().size(); ++i) EXPECT_EQ(std::bit_cast<double>(u64_at(3 + i)), p.flat()[i]);
  EXPECT_EQ(load_params(buf), p);
}

TEST(Checkpoint, TruncatedStreamIsRejected) {
  std::stringstream buf;
  save_params(buf, NetParams(LayerSpec{2, 2}));
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  EXPECT_THROW(load_params(cut), InvalidInput);
}
