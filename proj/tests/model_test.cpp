#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "depthbayes/model.hpp"
#include "depthbayes/peft.hpp"
#include "test_support.hpp"

using namespace depthbayes;
using depthbayes::testing::naive_conv;
using depthbayes::testing::random_tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.height = 8;
  cfg.width = 12;
  cfg.patch = 4;
  cfg.embed_dim = 6;
  cfg.blocks = 1;
  cfg.mlp_dim = 5;
  cfg.decoder_channels = {3};
  cfg.seed = 11;
  return cfg;
}

// Gives every parameter a random value so no term of the forward pass is
// trivially zero or one.
void randomize(ToyDepthNet& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for_each_parameter(m, [&](const std::string&, Tensor& t, ParamKind) { t = random_tensor(t.shape(), rng, -0.6, 0.6); });
}

using Rows = std::vector<std::vector<double>>;

Rows affine(const Rows& x, const Tensor& w, const Tensor& b) {
  Rows y(x.size(), std::vector<double>(w.extent(1)));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < w.extent(1); ++j) {
      double acc = b[j];
      for (std::size_t k = 0; k < w.extent(0); ++k) acc += x[i][k] * w.at(k, j);
      y[i][j] = acc;
    }
  return y;
}

Rows norm(const Rows& x, const LayerNorm& ln) {
  Rows y = x;
  for (auto& row : y) {
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean) / std::sqrt(var + 1e-12) * ln.scale[j] + ln.shift[j];
  }
  return y;
}

double gelu_ref(double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); }

// Direct transcription of the architecture, pixel by pixel.
Tensor reference_forward(const ToyDepthNet& m, const Tensor& x) {
  const ModelConfig& cfg = m.config;
  const std::size_t p = cfg.patch, gh = cfg.height / p, gw = cfg.width / p, d = cfg.embed_dim;
  Rows tokens;
  for (std::size_t gy = 0; gy < gh; ++gy)
    for (std::size_t gx = 0; gx < gw; ++gx) {
      std::vector<double> patch;
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t a = 0; a < p; ++a)
          for (std::size_t b = 0; b < p; ++b) patch.push_back(x.at(c, gy * p + a, gx * p + b));
      tokens.push_back(patch);
    }
  tokens = affine(tokens, m.patch_embed.weight, m.patch_embed.bias);
  const std::size_t n = tokens.size();
  for (const Block& blk : m.blocks) {
    const Rows h = norm(tokens, blk.norm1);
    const Rows q = affine(h, blk.q.weight, blk.q.bias), k = affine(h, blk.k.weight, blk.k.bias),
               v = affine(h, blk.v.weight, blk.v.bias);
    Rows mixed(n, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> w(n);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += q[i][c] * k[j][c];
        w[j] = std::exp(s / std::sqrt(static_cast<double>(d)));
        total += w[j];
      }
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < d; ++c) mixed[i][c] += w[j] / total * v[j][c];
    }
    const Rows attn = affine(mixed, blk.o.weight, blk.o.bias);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) tokens[i][c] += blk.gamma_attn[0] * attn[i][c];
    Rows hidden = affine(norm(tokens, blk.norm2), blk.fc1.weight, blk.fc1.bias);
    for (auto& row : hidden)
      for (auto& z : row) z = gelu_ref(z);
    const Rows mlp = affine(hidden, blk.fc2.weight, blk.fc2.bias);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) tokens[i][c] += blk.gamma_mlp[0] * mlp[i][c];
  }
  Tensor fmap(Shape{d, gh, gw});
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t i = 0; i < gh; ++i)
      for (std::size_t j = 0; j < gw; ++j) fmap.at(c, i, j) = tokens[i * gw + j][c];
  for (const Conv& conv : m.decoder) {
    fmap = naive_conv(fmap, conv.kernel, 1, 1, &conv.bias);
    for (auto& z : fmap.values()) z = gelu_ref(z);
  }
  Tensor up(Shape{fmap.extent(0), cfg.height, cfg.width});
  for (std::size_t c = 0; c < fmap.extent(0); ++c)
    for (std::size_t i = 0; i < cfg.height; ++i)
      for (std::size_t j = 0; j < cfg.width; ++j) up.at(c, i, j) = fmap.at(c, i / p, j / p);
  Tensor out = naive_conv(up, m.head.kernel, 1, 1, &m.head.bias);
  for (auto& z : out.values()) z = std::log(1.0 + std::exp(z));
  return out;
}

std::vector<double> all_parameters(const ToyDepthNet& m) {
  std::vector<double> out;
  for_each_parameter(m, [&](const std::string&, const Tensor& t, ParamKind) {
    out.insert(out.end(), t.values().begin(), t.values().end());
  });
  return out;
}

}  // namespace

TEST(ModelConfig, Validation) {
  ModelConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.height = 30;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = ModelConfig{};
  cfg.embed_dim = 0;
  EXPECT_THROW(build_model(cfg), DomainError);
  cfg = ModelConfig{};
  cfg.decoder_channels = {};
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(BuildModel, ParameterCountClosedForm) {
  const ModelConfig cfg;
  const std::size_t d = 32, mlp = 64, pd = 3 * 4 * 4;
  const std::size_t per_block = 2 * (2 * d) + 4 * (d * d + d) + 2 + (d * mlp + mlp) + (mlp * d + d);
  const std::size_t decoder = (16 * d * 9 + 16) + (8 * 16 * 9 + 8);
  const std::size_t head = 1 * 8 * 9 + 1;
  const std::size_t expected = (pd * d + d) + 2 * per_block + decoder + head;
  EXPECT_EQ(expected, 24517u);
  EXPECT_EQ(parameter_count(build_model(cfg)), expected);
}

TEST(BuildModel, DeterministicPerSeed) {
  ModelConfig cfg;
  EXPECT_EQ(all_parameters(build_model(cfg)), all_parameters(build_model(cfg)));
  ModelConfig other = cfg;
  other.seed = 1;
  EXPECT_NE(all_parameters(build_model(cfg)), all_parameters(build_model(other)));
}

TEST(BuildModel, InitializationContract) {
  const ToyDepthNet m = build_model(ModelConfig{});
  for (const auto& b : m.blocks) {
    EXPECT_EQ(b.gamma_attn[0], 1.0);
    EXPECT_EQ(b.gamma_mlp[0], 1.0);
    for (double v : b.norm1.scale.values()) EXPECT_EQ(v, 1.0);
    for (double v : b.norm2.shift.values()) EXPECT_EQ(v, 0.0);
  }
  // Weights are zero-mean with Glorot variance 2/(fan_in+fan_out).
  const Tensor& w = m.blocks[0].fc1.weight;
  double mean = 0.0, sq = 0.0;
  for (double v : w.values()) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(w.size());
  sq /= static_cast<double>(w.size());
  EXPECT_NEAR(mean, 0.0, 4.0 * std::sqrt(2.0 / 96.0 / 2048.0));
  EXPECT_NEAR(sq, 2.0 / 96.0, 0.15 * 2.0 / 96.0);
}

TEST(Forward, MatchesReferenceTranscription) {
  ToyDepthNet m = build_model(tiny_config());
  randomize(m, 3);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor x = random_tensor({3, 8, 12}, rng, 0.0, 1.0);
    const Tensor got = forward(m, x);
    ASSERT_EQ(got.shape(), (Shape{1, 8, 12}));
    EXPECT_LE(max_abs_diff(got, reference_forward(m, x)), 1e-12);
  }
}

TEST(Forward, ShapeAndPositivity) {
  const ToyDepthNet m = build_model(ModelConfig{});
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor y = forward(m, random_tensor({3, 32, 32}, rng, 0.0, 1.0));
    EXPECT_EQ(y.shape(), (Shape{1, 32, 32}));
    EXPECT_GT(*std::min_element(y.values().begin(), y.values().end()), 0.0);
    EXPECT_TRUE(all_finite(y));
  }
  EXPECT_THROW(forward(m, Tensor(Shape{3, 16, 32})), ShapeError);
}

TEST(Forward, Pure) {
  const ToyDepthNet m = build_model(ModelConfig{});
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor({3, 32, 32}, rng, 0.0, 1.0);
  Tensor x0 = x;
  for (auto& v : x0.values()) v += 0.0;
  EXPECT_EQ(forward(m, x), forward(m, x0));
}

TEST(Forward, GammaSensitivity) {
  ToyDepthNet m = build_model(ModelConfig{});
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({3, 32, 32}, rng, 0.0, 1.0);
  const Tensor before = forward(m, x);
  m.blocks[0].gamma_attn[0] = 2.0;
  EXPECT_GT(max_abs_diff(before, forward(m, x)), 1e-6);
}

TEST(Layers, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(8);
  Tensor s = random_tensor({7, 9}, rng, -30.0, 30.0);
  layers::softmax_rows(s);
  for (std::size_t i = 0; i < 7; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 9; ++j) {
      EXPECT_GE(s.at(i, j), 0.0);
      sum += s.at(i, j);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Layers, LayerNormStatistics) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({5, 32}, rng, -3.0, 7.0);
  layers::LayerNormCache cache;
  const Tensor y = layers::normalize_rows(x, cache);
  for (std::size_t i = 0; i < 5; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 32; ++j) mean += y.at(i, j);
    mean /= 32.0;
    for (std::size_t j = 0; j < 32; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 32.0;
    EXPECT_LE(std::abs(mean), 1e-10);
    EXPECT_NEAR(var, 1.0, 1e-8);
  }
}

TEST(Layers, SoftplusAndGelu) {
  for (double z = -40.0; z <= 40.0; z += 0.25) {
    const double sp = layers::softplus(z);
    EXPECT_GE(sp, 0.0);
    EXPECT_TRUE(std::isfinite(sp));
    EXPECT_NEAR(sp, std::log1p(std::exp(z)), 1e-12 * std::max(1.0, std::abs(z)));
    const double h = 1e-6;
    EXPECT_NEAR(layers::sigmoid(z), (layers::softplus(z + h) - layers::softplus(z - h)) / (2 * h), 1e-8);
    EXPECT_NEAR(layers::gelu_derivative(z), (layers::gelu(z + h) - layers::gelu(z - h)) / (2 * h), 1e-7);
  }
  EXPECT_TRUE(std::isfinite(layers::softplus(800.0)));
}

TEST(Backward, MatchesFiniteDifferencesOnTinyModel) {
  ToyDepthNet m = build_model(tiny_config());
  randomize(m, 12);
  std::mt19937_64 rng(13);
  const Tensor x = random_tensor({3, 8, 12}, rng, 0.0, 1.0);
  const Tensor dout = random_tensor({1, 8, 12}, rng);
  ForwardCache cache;
  forward(m, x, &cache);
  ToyDepthNet g = zeros_like(m);
  backward(m, cache, dout, g);
  const SubspaceDescriptor all = attach_full(m);
  const Tensor analytic = flatten(g, all);
  Tensor theta = flatten(m, all);
  auto objective = [&](const Tensor& th) {
    ToyDepthNet probe = m;
    unflatten(probe, all, th);
    const Tensor y = forward(probe, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * dout[i];
    return s;
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < theta.size(); i += 7) {
    Tensor tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (objective(tp) - objective(tm)) / (2 * h);
    EXPECT_NEAR(analytic[i], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "coordinate " << i;
  }
}
