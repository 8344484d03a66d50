#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "nvr/errors.hpp"
#include "nvr/model.hpp"
#include "nvr/network.hpp"

namespace nvr {
namespace {

MlpConfig mlp(int in, int layers, int width) {
  MlpConfig c;
  c.input_width = in;
  c.hidden_layers = layers;
  c.hidden_width = width;
  return c;
}

// Plain nested-loop forward pass over the flat layout, independent of Eigen.
std::vector<double> naive_forward(const MlpConfig& cfg, const std::vector<double>& p, const std::vector<double>& x) {
  std::vector<double> a = x;
  const auto layers = cfg.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& L = layers[li];
    std::vector<double> z(static_cast<std::size_t>(L.out));
    for (int o = 0; o < L.out; ++o) {
      double s = p[L.bias_offset + static_cast<std::size_t>(o)];
      for (int i = 0; i < L.in; ++i) {
        s += p[L.weight_offset + static_cast<std::size_t>(o * L.in + i)] * a[static_cast<std::size_t>(i)];
      }
      z[static_cast<std::size_t>(o)] = li + 1 < layers.size() ? std::max(0.0, s) : s;
    }
    a = std::move(z);
  }
  return a;
}

TEST(MlpConfig, ParamCountAndLayout) {
  const MlpConfig c = mlp(48, 2, 64);
  EXPECT_EQ(c.param_count(), 3136u + 4160u + 65u);
  const auto layers = c.layers();
  ASSERT_EQ(layers.size(), 3u);
  EXPECT_EQ(layers[0].weight_offset, 0u);
  EXPECT_EQ(layers[0].bias_offset, 48u * 64u);
  EXPECT_EQ(layers[1].weight_offset, 3136u);
  EXPECT_EQ(layers[2].in, 64);
  EXPECT_EQ(layers[2].out, 1);
  EXPECT_EQ(mlp(5, 0, 64).param_count(), 6u);
  EXPECT_THROW(mlp(0, 2, 64).validate(), InputError);
  EXPECT_THROW(mlp(3, -1, 64).validate(), InputError);
}

TEST(InitMlp, SeededHeUniformZeroBias) {
  const MlpConfig c = mlp(64, 2, 64);
  std::vector<float> a(c.param_count()), b(c.param_count()), d(c.param_count());
  init_mlp(c, 7, a);
  init_mlp(c, 7, b);
  init_mlp(c, 8, d);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, d);
  const double bound = std::sqrt(6.0 / 64.0);
  EXPECT_NEAR(bound, 0.30618621784789724, 1e-15);
  for (const auto& L : c.layers()) {
    const double lb = std::sqrt(6.0 / L.in);
    float maxw = 0.0f;
    for (std::size_t i = 0; i < static_cast<std::size_t>(L.in * L.out); ++i) {
      maxw = std::max(maxw, std::abs(a[L.weight_offset + i]));
    }
    EXPECT_LE(maxw, lb);
    EXPECT_GT(maxw, 0.8 * lb);
    for (int o = 0; o < L.out; ++o) EXPECT_EQ(a[L.bias_offset + static_cast<std::size_t>(o)], 0.0f);
  }
}

TEST(MlpForward, ZeroParamsGiveZero) {
  const MlpConfig c = mlp(4, 2, 8);
  std::vector<double> p(c.param_count(), 0.0);
  Matrix<double> x = Matrix<double>::Random(4, 5), y;
  MlpCache<double> cache;
  mlp_forward<double>(c, p, x, cache, y);
  EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MlpForward, NoHiddenLayersSlicesFirstFeature) {
  const MlpConfig c = mlp(3, 0, 1);
  std::vector<double> p{1.0, 0.0, 0.0, 0.0};
  Matrix<double> x = Matrix<double>::Random(3, 6), y;
  MlpCache<double> cache;
  mlp_forward<double>(c, p, x, cache, y);
  for (int b = 0; b < 6; ++b) EXPECT_EQ(y(0, b), x(0, b));
}

TEST(MlpForward, WidthMismatchThrows) {
  const MlpConfig c = mlp(4, 1, 8);
  std::vector<double> p(c.param_count(), 0.1);
  Matrix<double> x = Matrix<double>::Random(5, 2), y;
  MlpCache<double> cache;
  EXPECT_THROW(mlp_forward<double>(c, p, x, cache, y), InputError);
}

TEST(MlpForward, MatchesNaiveOracle) {
  const MlpConfig c = mlp(48, 2, 64);
  std::vector<float> pf(c.param_count());
  init_mlp(c, 3, pf);
  for (std::size_t i = 0; i < pf.size(); ++i) pf[i] += 0.01f * static_cast<float>(std::sin(i * 0.37));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Matrix<float> x(48, 33), y;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  MlpCache<float> cache;
  mlp_forward<float>(c, pf, x, cache, y);
  const std::vector<double> pd(pf.begin(), pf.end());
  for (Eigen::Index b = 0; b < x.cols(); ++b) {
    std::vector<double> xb(48);
    for (int i = 0; i < 48; ++i) xb[static_cast<std::size_t>(i)] = x(i, b);
    EXPECT_NEAR(y(0, b), naive_forward(c, pd, xb)[0], 1e-6);
  }
}

TEST(MlpForward, PositivelyHomogeneousWithZeroBias) {
  const MlpConfig c = mlp(6, 1, 16);
  std::vector<double> p(c.param_count());
  std::vector<float> pf(c.param_count());
  init_mlp(c, 11, pf);
  std::copy(pf.begin(), pf.end(), p.begin());
  Matrix<double> x = Matrix<double>::Random(6, 4), y1, y2;
  MlpCache<double> c1, c2;
  mlp_forward<double>(c, p, x, c1, y1);
  mlp_forward<double>(c, p, (x * 3.5).eval(), c2, y2);
  EXPECT_TRUE(((c2.act[1] - 3.5 * c1.act[1]).cwiseAbs().maxCoeff()) < 1e-12);
  EXPECT_TRUE(((y2 - 3.5 * y1).cwiseAbs().maxCoeff()) < 1e-12);
}

TEST(MlpForward, Deterministic) {
  const MlpConfig c = mlp(8, 2, 32);
  std::vector<float> p(c.param_count());
  init_mlp(c, 1, p);
  Matrix<float> x = Matrix<float>::Random(8, 100), y1, y2;
  MlpCache<float> a, b;
  mlp_forward<float>(c, p, x, a, y1);
  mlp_forward<float>(c, p, x, b, y2);
  EXPECT_EQ(std::memcmp(y1.data(), y2.data(), sizeof(float) * 100), 0);
}

// Results must not depend on where the parameter buffer happens to be
// allocated (vectorized kernels treat unaligned heads differently).
TEST(MlpForward, IndependentOfBufferAlignment) {
  const MlpConfig c = mlp(48, 2, 64);
  std::vector<float> p(c.param_count());
  init_mlp(c, 5, p);
  Matrix<float> x = Matrix<float>::Random(48, 77), y0;
  MlpCache<float> cache;
  mlp_forward<float>(c, p, x, cache, y0);
  std::vector<float> g0(p.size(), 0.0f);
  mlp_backward<float>(c, p, cache, y0, g0, nullptr);
  std::vector<float> shifted(p.size() + 16);
  for (std::size_t off = 1; off < 16; ++off) {
    std::copy(p.begin(), p.end(), shifted.begin() + static_cast<std::ptrdiff_t>(off));
    const std::span<const float> view(shifted.data() + off, p.size());
    Matrix<float> y;
    mlp_forward<float>(c, view, x, cache, y);
    ASSERT_EQ(std::memcmp(y.data(), y0.data(), sizeof(float) * 77), 0) << "offset " << off;
    std::vector<float> gbuf(p.size() + 16, 0.0f);
    mlp_backward<float>(c, view, cache, y, std::span<float>(gbuf.data() + off, p.size()), nullptr);
    ASSERT_EQ(std::memcmp(gbuf.data() + off, g0.data(), sizeof(float) * p.size()), 0) << "offset " << off;
  }
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradients) {
  const MlpConfig c = mlp(5, 2, 7);
  std::vector<float> pf(c.param_count());
  init_mlp(c, 2, pf);
  const std::vector<double> p(pf.begin(), pf.end());
  Matrix<double> x = Matrix<double>::Random(5, 3), y, gin;
  MlpCache<double> cache;
  mlp_forward<double>(c, p, x, cache, y);
  std::vector<double> g(p.size(), 0.0);
  mlp_backward<double>(c, p, cache, Matrix<double>::Zero(1, 3), g, &gin);
  for (double v : g) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(gin.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MlpBackward, LinearLayerClosedForm) {
  // y = w.x + b with L2 loss mean((y - t)^2): dL/dw = 2/B sum (y - t) x
  const MlpConfig c = mlp(3, 0, 1);
  std::vector<double> p{0.5, -1.0, 2.0, 0.25};
  Matrix<double> x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  const double t[2] = {1.0, -2.0};
  Matrix<double> y;
  MlpCache<double> cache;
  mlp_forward<double>(c, p, x, cache, y);
  Matrix<double> gy(1, 2);
  for (int b = 0; b < 2; ++b) gy(0, b) = 2.0 * (y(0, b) - t[b]) / 2.0;
  std::vector<double> g(4, 0.0);
  mlp_backward<double>(c, p, cache, gy, g, nullptr);
  for (int i = 0; i < 3; ++i) {
    const double expect = (y(0, 0) - t[0]) * x(i, 0) + (y(0, 1) - t[1]) * x(i, 1);
    EXPECT_NEAR(g[static_cast<std::size_t>(i)], expect, 1e-12);
  }
  EXPECT_NEAR(g[3], (y(0, 0) - t[0]) + (y(0, 1) - t[1]), 1e-12);
}

struct GradCase {
  int in, layers, width;
};

TEST(MlpBackward, MatchesFiniteDifferences) {
  const GradCase cases[] = {{48, 2, 64}, {3, 1, 5}, {7, 3, 9}, {12, 0, 1}, {4, 4, 16}, {66, 2, 20}};
  std::mt19937_64 rng(13);
  for (const auto& gc : cases) {
    const MlpConfig c = mlp(gc.in, gc.layers, gc.width);
    std::vector<float> pf(c.param_count());
    init_mlp(c, rng(), pf);
    std::vector<double> p(pf.begin(), pf.end());
    for (auto& v : p) v += 0.05 * std::uniform_real_distribution<double>(-1, 1)(rng);
    Matrix<double> x = Matrix<double>::Random(gc.in, 6);
    Matrix<double> r = Matrix<double>::Random(1, 6);
    const auto objective = [&](const std::vector<double>& q, const Matrix<double>& xin) {
      Matrix<double> y;
      MlpCache<double> cc;
      mlp_forward<double>(c, q, xin, cc, y);
      return (y.array() * r.array()).sum();
    };
    Matrix<double> y, gin;
    MlpCache<double> cache;
    mlp_forward<double>(c, p, x, cache, y);
    std::vector<double> g(p.size(), 0.0);
    mlp_backward<double>(c, p, cache, r, g, &gin);

    const double h = 1e-6;
    for (std::size_t j = 0; j < p.size(); j += 1 + p.size() / 150) {
      auto qp = p, qm = p;
      qp[j] += h;
      qm[j] -= h;
      const double fd = (objective(qp, x) - objective(qm, x)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[j]), 1e-7});
      ASSERT_LE(std::abs(fd - g[j]) / scale, 1e-4) << gc.in << "/" << gc.layers << "/" << gc.width << " param " << j;
    }
    for (int i = 0; i < gc.in; i += 1 + gc.in / 10) {
      Matrix<double> xp = x, xm = x;
      xp(i, 2) += h;
      xm(i, 2) -= h;
      const double fd = (objective(p, xp) - objective(p, xm)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(gin(i, 2)), 1e-7});
      ASSERT_LE(std::abs(fd - gin(i, 2)) / scale, 1e-4) << "input " << i;
    }
  }
}

}  // namespace
}  // namespace nvr
