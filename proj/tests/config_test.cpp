#include <gtest/gtest.h>

#include <random>

#include "depthbayes/config.hpp"

using namespace depthbayes;

namespace {

ExperimentConfig random_config(std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ExperimentConfig c;
  c.model.height = 8 * (1 + pick(4));
  c.model.width = 8 * (1 + pick(4));
  c.model.embed_dim = 1 + pick(40);
  c.model.decoder_channels = {1 + pick(9), 1 + pick(9), 1 + pick(9)};
  c.model.decoder_channels.resize(1 + pick(3));
  c.model.seed = rng();
  c.data.dir = "data dir/" + std::to_string(pick(100));
  c.data.seed = rng();
  c.data.n_train = 1 + pick(50);
  c.warmstart.epochs = pick(40);
  c.warmstart.lr = u(rng) * 1e-2;
  const Method methods[] = {Method::bitfit, Method::difffit, Method::lora, Method::colora, Method::full};
  c.method = methods[pick(5)];
  c.rank = takes_rank(c.method) ? std::optional<long>(1 + static_cast<long>(pick(64))) : std::nullopt;
  const Inference inferences[] = {Inference::ckpt_ens, Inference::swag_d, Inference::swag_lr, Inference::deep_ens,
                                  Inference::deterministic};
  c.inference = inferences[pick(5)];
  c.schedule.lr = u(rng) * 1e-3;
  c.schedule.epochs = 1 + pick(30);
  c.samples = 1 + pick(200);
  c.seeds = {rng(), rng()};
  c.jitter = u(rng) * 1e-6;
  c.out_dir = "out_" + std::to_string(pick(1000));
  return c;
}

std::string expect_config_error(const std::string& text) {
  try {
    parse_config(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return {};
}

}  // namespace

TEST(Config, InferenceNames) {
  for (auto i : {Inference::ckpt_ens, Inference::swag_d, Inference::swag_lr, Inference::deep_ens,
                 Inference::deterministic})
    EXPECT_EQ(parse_inference(to_string(i)), i);
  EXPECT_EQ(to_string(Inference::swag_lr), "swag-lr");
  EXPECT_FALSE(parse_inference("laplace").has_value());
}

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(ExperimentConfig{}.validate()); }

TEST(Config, RoundTrip) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const ExperimentConfig c = random_config(rng);
    EXPECT_EQ(parse_config(emit_config(c)), c) << emit_config(c);
  }
  EXPECT_EQ(parse_config(emit_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, CommentsBlankLinesAndDefaults) {
  const ExperimentConfig c = parse_config(
      "# experiment\n\n[experiment]\n  method = colora  \nrank = 8\n# trailing\n[schedule]\nlr = 1e-7\n");
  EXPECT_EQ(c.method, Method::colora);
  EXPECT_EQ(c.rank, 8);
  EXPECT_EQ(c.schedule.lr, 1e-7);
  EXPECT_EQ(c.schedule.epochs, 20u);
  EXPECT_EQ(c.samples, 100u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
}

TEST(Config, SyntaxErrorsNameTheLine) {
  EXPECT_NE(expect_config_error("[experiment]\nmethod = lora\nrank = 2\nfoo = 1\n").find("line 4"), std::string::npos);
  EXPECT_NE(expect_config_error("[nonsense]\n").find("unknown section"), std::string::npos);
  EXPECT_NE(expect_config_error("[model\n").find("malformed"), std::string::npos);
  EXPECT_NE(expect_config_error("height = 3\n").find("outside"), std::string::npos);
  EXPECT_NE(expect_config_error("[model]\nheight\n").find("key = value"), std::string::npos);
  EXPECT_NE(expect_config_error("[model]\nheight = 16\nheight = 16\n").find("duplicate"), std::string::npos);
  expect_config_error("[model]\nheight = sixteen\n");
  expect_config_error("[model]\nheight = -16\n");
  expect_config_error("[schedule]\nlr = 1e-3x\n");
  expect_config_error("[experiment]\nmethod = adapter\n");
  expect_config_error("[experiment]\ninference = mcdropout\n");
  expect_config_error("[experiment]\nseeds = 1,,2\n");
}

TEST(Config, ValidationErrors) {
  expect_config_error("[experiment]\nmethod = bitfit\nrank = 4\n");
  expect_config_error("[experiment]\nmethod = lora\n");
  expect_config_error("[experiment]\nmethod = colora\nrank = 0\n");
  expect_config_error("[experiment]\nmethod = full\ninference = deep-ens\nseeds = 3\n");
  expect_config_error("[experiment]\nmethod = full\nseeds = 1, 1\n");
  expect_config_error("[experiment]\nmethod = full\nsamples = 0\n");
  expect_config_error("[experiment]\nmethod = full\njitter = -1\n");
  expect_config_error("[experiment]\nmethod = full\nout_dir =\n");
  expect_config_error("[experiment]\nmethod = full\ninference = ckpt-ens\nsamples = 101\n");
  expect_config_error("[experiment]\nmethod = full\ninference = swag-d\n[schedule]\ncheckpoints = 1\n");
  expect_config_error("[experiment]\nmethod = full\n[schedule]\nepochs = 1\n");
  expect_config_error("[experiment]\nmethod = full\n[schedule]\nlr = -1\n");
  expect_config_error("[experiment]\nmethod = full\n[model]\nheight = 30\n");
  expect_config_error("[experiment]\nmethod = full\n[model]\nheight = 4\nwidth = 4\n");
  expect_config_error("[experiment]\nmethod = full\n[data]\nn_test = 0\n");
  expect_config_error("[experiment]\nmethod = full\n[warmstart]\nbatch_size = 0\n");
  EXPECT_NO_THROW(parse_config("[experiment]\nmethod = full\ninference = swag-lr\njitter = 0\n").validate());
  EXPECT_NO_THROW(parse_config("[experiment]\nmethod = full\n[data]\nn_test = 130\n").validate());
}
