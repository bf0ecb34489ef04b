#include <gtest/gtest.h>

#include <random>

#include "depthbayes/loss.hpp"
#include "test_support.hpp"

using namespace depthbayes;
using depthbayes::testing::random_tensor;

namespace {

Tensor map2x2(double a, double b, double c, double d) { return Tensor(Shape{2, 2}, {a, b, c, d}); }

Tensor affine(Tensor m, double a, double c) {
  for (auto& v : m.values()) v = a * v + c;
  return m;
}

// Loss by sorting a copy and averaging normalized differences, independent of
// the library's normalize_map.
double sorted_oracle_loss(const Tensor& pred, const Tensor& target) {
  auto normalized = [](const Tensor& m) {
    std::vector<double> s = m.values();
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    const double med = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
    double mae = 0.0;
    for (double v : s) mae += std::abs(v - med);
    mae /= static_cast<double>(n);
    std::vector<double> out;
    for (double v : m.values()) out.push_back((v - med) / mae);
    return out;
  };
  const auto a = normalized(pred), b = normalized(target);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

}  // namespace

TEST(Median, Examples) {
  EXPECT_EQ(spatial_median(map2x2(1, 2, 3, 4)), 2.5);
  EXPECT_EQ(spatial_median(Tensor(Shape{1, 1}, 5.0)), 5.0);
  EXPECT_EQ(spatial_median(map2x2(0, 0, 0, 1)), 0.0);
  EXPECT_EQ(spatial_median(Tensor(Shape{1, 3}, {9, -1, 4})), 4.0);
  EXPECT_THROW(spatial_median(Tensor(Shape{0, 2})), ShapeError);
}

TEST(MaeDev, Examples) {
  EXPECT_EQ(mae_dev(Tensor(Shape{3, 3}, 7.0)), 0.0);
  EXPECT_EQ(mae_dev(map2x2(1, 2, 3, 4)), 1.0);
  EXPECT_EQ(mae_dev(map2x2(0, 0, 0, 1)), 0.25);
}

TEST(AffineInvariantMae, Examples) {
  const Tensor t = map2x2(0, 0, 0, 1);
  EXPECT_EQ(affine_invariant_mae(t, t), 0.0);
  const Tensor m = map2x2(0.3, -1, 2, 5);
  EXPECT_LE(affine_invariant_mae(affine(m, 2, 3), m), 1e-12);
  EXPECT_DOUBLE_EQ(affine_invariant_mae(map2x2(0, 0, 1, 1), t), 1.5);
}

TEST(AffineInvariantMae, BatchIsMeanOverImages) {
  const std::vector<Tensor> pred = {map2x2(0, 0, 1, 1), map2x2(1, 2, 3, 4)};
  const std::vector<Tensor> target = {map2x2(0, 0, 0, 1), map2x2(1, 2, 3, 4)};
  EXPECT_DOUBLE_EQ(affine_invariant_mae(pred, target), 0.75);
  EXPECT_THROW(affine_invariant_mae(std::span<const Tensor>(pred), std::span<const Tensor>(target.data(), 1)),
               ShapeError);
  EXPECT_THROW(affine_invariant_mae(std::span<const Tensor>(), std::span<const Tensor>()), DomainError);
}

TEST(AffineInvariantMae, DegenerateMapNamesImage) {
  const std::vector<Tensor> pred = {map2x2(1, 2, 3, 4), Tensor(Shape{2, 2}, 3.0)};
  const std::vector<Tensor> target = {map2x2(1, 2, 3, 4), map2x2(1, 2, 3, 4)};
  try {
    affine_invariant_mae(pred, target);
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("image 1"), std::string::npos) << e.what();
  }
}

TEST(LogLikelihood, Examples) {
  const Tensor t = map2x2(0, 0, 0, 1);
  EXPECT_EQ(log_likelihood(t, t), 0.0);
  EXPECT_DOUBLE_EQ(log_likelihood(map2x2(0, 0, 1, 1), t), -1.5);
  const Tensor p = map2x2(0.2, 0.9, -0.4, 1.3);
  EXPECT_DOUBLE_EQ(log_likelihood(2.0 * p, t), log_likelihood(p, t));
}

TEST(AffineInvariantMae, Properties) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> scale(0.1, 10.0), shift(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor a = random_tensor({6, 5}, rng), b = random_tensor({6, 5}, rng);
    const double base = affine_invariant_mae(a, b);
    EXPECT_GE(base, 0.0);
    EXPECT_NEAR(base, sorted_oracle_loss(a, b), 1e-12);
    EXPECT_EQ(affine_invariant_mae(b, a), base);
    EXPECT_NEAR(affine_invariant_mae(affine(a, scale(rng), shift(rng)), b), base, 1e-10);
    EXPECT_NEAR(affine_invariant_mae(a, affine(b, scale(rng), shift(rng))), base, 1e-10);
  }
}

TEST(AffineInvariantMae, ZeroOnlyForEqualNormalizedMaps) {
  std::mt19937_64 rng(2);
  const Tensor a = random_tensor({4, 4}, rng);
  EXPECT_LE(affine_invariant_mae(a, affine(a, 0.5, 1.0)), 1e-12);
  EXPECT_GT(affine_invariant_mae(a, affine(a, -1.0, 0.0)), 0.1);
}

TEST(LossGradient, ScaledMapHasZeroDerivative) {
  // ℓ(θ·x, t) is constant for θ > 0, so Σ_j ∂ℓ/∂pred_j · x_j = 0.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({5, 5}, rng, 0.1, 2.0), t = random_tensor({5, 5}, rng);
    const double theta = 1.7;
    const Tensor g = image_loss_gradient(theta * x, t);
    double dtheta = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) dtheta += g[j] * x[j];
    EXPECT_NEAR(dtheta, 0.0, 1e-12);
  }
}

TEST(LossGradient, TwoPixelAnalytic) {
  // Two pixels normalize to [−1, 1] whenever p0 < p1, so the loss is locally constant.
  const Tensor g = image_loss_gradient(Tensor(Shape{1, 2}, {0.0, 3.0}), Tensor(Shape{1, 2}, {1.0, 0.0}));
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
}

TEST(LossGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  int checked = 0;
  for (int trial = 0; trial < 100 && checked < 30; ++trial) {
    const Tensor p = random_tensor({3, 4}, rng), t = random_tensor({3, 4}, rng);
    const NormalizedMap np = normalize_map(p), nt = normalize_map(t);
    bool near_kink = false;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (std::abs(np.values[j] - nt.values[j]) < 1e-4 || std::abs(np.values[j]) < 1e-4) near_kink = true;
    }
    if (near_kink) continue;
    const Tensor g = image_loss_gradient(p, t);
    for (std::size_t j = 0; j < p.size(); ++j) {
      Tensor up = p, down = p;
      up[j] += 1e-6;
      down[j] -= 1e-6;
      const double fd = (image_loss(up, t) - image_loss(down, t)) / 2e-6;
      EXPECT_NEAR(g[j], fd, 1e-6 + 1e-4 * std::abs(fd)) << "pixel " << j;
    }
    ++checked;
  }
  EXPECT_EQ(checked, 30);
}
