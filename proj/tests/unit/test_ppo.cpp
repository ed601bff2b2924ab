#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hover/checkpoint.hpp"
#include "hover/ppo.hpp"

namespace hover::ppo {
namespace {

namespace fs = std::filesystem;

env::EpisodeConfig short_config(double duration = 30.0) {
  env::EpisodeConfig cfg;
  cfg.duration = duration;
  cfg.initial.omega = {-0.005, 0.005};
  cfg.asteroid.uniform_axes = true;
  return cfg;
}

EnvFactory factory_for(const env::EpisodeConfig& cfg) {
  return [cfg] { return std::make_unique<env::Environment>(cfg); };
}

struct Nets {
  nn::PolicyNetwork policy;
  nn::ValueNetwork value;
  explicit Nets(std::uint64_t seed) {
    policy.initialize(mix_seed(seed, 101));
    value.initialize(mix_seed(seed, 102));
  }
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hover_ppo_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Returns, Examples) {
  const auto r = discounted_returns({1.0, 1.0, 1.0}, 0.5);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[0], 1.75);
  EXPECT_DOUBLE_EQ(r[1], 1.5);
  EXPECT_DOUBLE_EQ(r[2], 1.0);
  EXPECT_TRUE(discounted_returns({}, 0.99).empty());
}

TEST(Returns, UndiscountedMatchesSuffixSums) {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<double> rewards(97);
  for (auto& x : rewards) x = n(rng);
  std::vector<double> suffix(rewards.rbegin(), rewards.rend());
  std::partial_sum(suffix.begin(), suffix.end(), suffix.begin());
  std::reverse(suffix.begin(), suffix.end());
  EXPECT_EQ(discounted_returns(rewards, 1.0), suffix);
}

TEST(Surrogate, Examples) {
  auto s = clipped_surrogate(1.2, 1.0, 0.2);
  EXPECT_DOUBLE_EQ(s.objective, 1.2);
  EXPECT_FALSE(s.clipped);

  s = clipped_surrogate(1.5, 1.0, 0.2);
  EXPECT_DOUBLE_EQ(s.obj1, 1.5);
  EXPECT_DOUBLE_EQ(s.obj2, 1.2);
  EXPECT_DOUBLE_EQ(s.objective, 1.2);
  EXPECT_TRUE(s.clipped);
  EXPECT_EQ(s.ratio_gradient, 0.0);

  s = clipped_surrogate(0.5, 1.0, 0.2);
  EXPECT_DOUBLE_EQ(s.objective, 0.5);
  EXPECT_EQ(s.ratio_gradient, 1.0);

  s = clipped_surrogate(0.5, -2.0, 0.2);
  EXPECT_DOUBLE_EQ(s.objective, -1.6);
  EXPECT_TRUE(s.clipped);

  s = clipped_surrogate(1.0, 0.7, 0.2);
  EXPECT_DOUBLE_EQ(s.objective, 0.7);
  EXPECT_DOUBLE_EQ(s.ratio_gradient, 0.7);
}

TEST(Surrogate, IsLowerBound) {
  Rng rng(2);
  std::uniform_real_distribution<double> ratio(0.0, 3.0);
  std::normal_distribution<double> adv(0.0, 2.0);
  std::uniform_real_distribution<double> eps(0.01, 0.5);
  for (int k = 0; k < 10000; ++k) {
    const auto s = clipped_surrogate(ratio(rng), adv(rng), eps(rng));
    ASSERT_LE(s.objective, s.obj1);
    ASSERT_LE(s.objective, s.obj2);
  }
}

TEST(ClipAdaptation, Rule) {
  EXPECT_EQ(adapt_clip(0.001, 0.001, 0.2), 0.2);
  EXPECT_DOUBLE_EQ(adapt_clip(0.01, 0.001, 0.2), 0.2 / 1.5);
  EXPECT_DOUBLE_EQ(adapt_clip(0.0001, 0.001, 0.2), 0.2 * 1.5);
  EXPECT_EQ(adapt_clip(0.0001, 0.001, 0.45), 0.5);
  double e = 0.2;
  for (int k = 0; k < 30; ++k) e = adapt_clip(1.0, 0.001, e);
  EXPECT_EQ(e, 0.01);
  EXPECT_EQ(adapt_clip(1.0, 0.001, e), 0.01);
}

TEST(Rollouts, IndependentOfWorkerCount) {
  const auto cfg = short_config();
  Nets nets(3);
  const auto a = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 5, 77, 1);
  const auto b = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 5, 77, 3);
  ASSERT_EQ(a.episodes.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.episodes[i].seed, mix_seed(77, i));
    EXPECT_EQ(a.episodes[i].rewards, b.episodes[i].rewards);
    EXPECT_EQ(a.episodes[i].actions, b.episodes[i].actions);
    EXPECT_EQ(a.episodes[i].log_probs, b.episodes[i].log_probs);
    EXPECT_EQ(a.episodes[i].length(), 5u);
    EXPECT_EQ(a.episodes[i].dones.back(), 1);
  }
  EXPECT_EQ(a.sample_count(), 25u);
}

TEST(Rollouts, ErrorNamesEpisode) {
  auto cfg = short_config();
  EnvFactory broken = [cfg]() -> std::unique_ptr<env::Environment> {
    throw std::runtime_error("no environment");
  };
  Nets nets(4);
  try {
    (void)collect_rollouts(broken, nets.policy, nets.value, 2, 1, 1);
    FAIL() << "expected RolloutError";
  } catch (const RolloutError& e) {
    EXPECT_EQ(e.episode(), 0u);
    EXPECT_NE(std::string(e.what()).find("no environment"), std::string::npos);
  }
}

TEST(Advantages, ReturnsMinusReplayedValues) {
  const auto cfg = short_config();
  Nets nets(5);
  auto batch = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 4, 9);
  compute_advantages(batch, 0.99, nets.value, false);
  for (const auto& ep : batch.episodes) {
    const auto ret = discounted_returns(ep.rewards, 0.99);
    Vector h = nets.value.initial_hidden();
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const double v = nets.value.step(ep.value_inputs[t], h);
      EXPECT_EQ(ep.values[t], v);
      EXPECT_EQ(ep.returns[t], ret[t]);
      EXPECT_EQ(ep.advantages[t], ret[t] - v);
    }
  }
  compute_advantages(batch, 0.99, nets.value, true);
  double sum = 0.0, sq = 0.0;
  for (const auto& ep : batch.episodes) {
    for (double a : ep.advantages) {
      sum += a;
      sq += a * a;
    }
  }
  const double n = static_cast<double>(batch.sample_count());
  EXPECT_NEAR(sum / n, 0.0, 1e-12);
  EXPECT_NEAR(sq / n, 1.0, 1e-12);
}

TEST(Update, RatioIsOneBeforeFirstStep) {
  const auto cfg = short_config();
  Nets nets(6);
  nn::Adam popt(nets.policy.parameter_count(), {3e-4});
  nn::Adam vopt(nets.value.parameter_count(), {1e-3});
  Rng shuffle(1);
  PPOConfig pc;
  double eps = pc.clip_epsilon;
  for (int round = 0; round < 3; ++round) {
    auto batch = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 6, 100 + round);
    compute_advantages(batch, pc.discount, nets.value);
    const auto stats = ppo_update(nets.policy, nets.value, popt, vopt, batch, pc, eps, shuffle);
    EXPECT_LE(stats.initial_ratio_deviation, 1e-10);
    EXPECT_FALSE(stats.aborted);
    EXPECT_GE(stats.epochs_run, 1);
    EXPECT_TRUE(std::isfinite(stats.kl));
    EXPECT_GE(stats.kl, 0.0);
    eps = stats.epsilon_next;
  }
}

TEST(Update, ZeroAdvantagesLeavePolicyUnchanged) {
  const auto cfg = short_config();
  Nets nets(7);
  auto batch = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 4, 5);
  compute_advantages(batch, 0.99, nets.value);
  for (auto& ep : batch.episodes) std::fill(ep.advantages.begin(), ep.advantages.end(), 0.0);
  nn::Adam popt(nets.policy.parameter_count());
  nn::Adam vopt(nets.value.parameter_count());
  Rng shuffle(2);
  const Vector before = nets.policy.parameters();
  const auto stats = ppo_update(nets.policy, nets.value, popt, vopt, batch, PPOConfig{}, 0.2, shuffle);
  EXPECT_EQ(nets.policy.parameters(), before);
  EXPECT_EQ(stats.kl, 0.0);
  EXPECT_EQ(stats.epochs_run, 10);
  EXPECT_EQ(stats.epsilon_next, 0.2 * 1.5);
}

TEST(Update, ValueRegressesToConstantReturns) {
  const auto cfg = short_config();
  Nets nets(8);
  auto batch = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 6, 6);
  compute_advantages(batch, 0.99, nets.value);
  for (auto& ep : batch.episodes) {
    std::fill(ep.returns.begin(), ep.returns.end(), -3.7);
    std::fill(ep.advantages.begin(), ep.advantages.end(), 0.0);
  }
  PPOConfig pc;
  pc.value_learning_rate = 1e-2;
  nn::Adam popt(nets.policy.parameter_count());
  nn::Adam vopt(nets.value.parameter_count());
  Rng shuffle(3);
  double loss = value_loss(nets.value, batch);
  EXPECT_GT(loss, 1.0);
  int updates = 0;
  while (loss >= 1e-6 && updates < 200) {
    loss = ppo_update(nets.policy, nets.value, popt, vopt, batch, pc, 0.2, shuffle).value_loss;
    ++updates;
  }
  EXPECT_LT(loss, 1e-6);
  EXPECT_NEAR(value_loss(nets.value, batch), loss, 1e-15);
}

TEST(Update, NonFiniteAdvantageAbortsAndRestores) {
  const auto cfg = short_config();
  Nets nets(9);
  auto batch = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 3, 4);
  compute_advantages(batch, 0.99, nets.value);
  batch.episodes[1].advantages[2] = std::numeric_limits<double>::quiet_NaN();
  nn::Adam popt(nets.policy.parameter_count());
  nn::Adam vopt(nets.value.parameter_count());
  Rng shuffle(4);
  const Vector p0 = nets.policy.parameters();
  const Vector v0 = nets.value.parameters();
  const auto stats = ppo_update(nets.policy, nets.value, popt, vopt, batch, PPOConfig{}, 0.2, shuffle);
  EXPECT_TRUE(stats.aborted);
  EXPECT_FALSE(stats.diagnostics.empty());
  EXPECT_EQ(nets.policy.parameters(), p0);
  EXPECT_EQ(nets.value.parameters(), v0);
  EXPECT_EQ(popt.state().steps, 0);
  EXPECT_EQ(stats.epsilon_next, 0.2);
}

TEST(Update, RequiresAdvantages) {
  const auto cfg = short_config();
  Nets nets(10);
  auto batch = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 2, 4);
  nn::Adam popt(nets.policy.parameter_count());
  nn::Adam vopt(nets.value.parameter_count());
  Rng shuffle(5);
  EXPECT_THROW(ppo_update(nets.policy, nets.value, popt, vopt, batch, PPOConfig{}, 0.2, shuffle),
               std::invalid_argument);
}

TEST(Update, KlEarlyStopBoundsPolicyEpochs) {
  const auto cfg = short_config();
  Nets nets(11);
  auto batch = collect_rollouts(factory_for(cfg), nets.policy, nets.value, 6, 8);
  compute_advantages(batch, 0.99, nets.value);
  PPOConfig pc;
  pc.policy_learning_rate = 1e-2;
  nn::Adam popt(nets.policy.parameter_count());
  nn::Adam vopt(nets.value.parameter_count());
  Rng shuffle(6);
  const auto stats = ppo_update(nets.policy, nets.value, popt, vopt, batch, pc, 0.2, shuffle);
  EXPECT_LT(stats.epochs_run, pc.epochs);
  EXPECT_GT(stats.kl, pc.kl_stop_factor * pc.kl_target);
  EXPECT_LT(stats.epsilon_next, 0.2);
  // value optimizer ran every epoch, policy optimizer only until the stop
  const auto per_epoch = static_cast<std::int64_t>((6 + pc.minibatch_episodes - 1) / pc.minibatch_episodes);
  EXPECT_EQ(vopt.state().steps, pc.epochs * per_epoch);
  EXPECT_EQ(popt.state().steps, stats.epochs_run * per_epoch);
}

TEST(Training, LearnsToSaveFuelWhenOnlyEffortIsPenalized) {
  TrainConfig tc;
  tc.episode = short_config(30.0);
  tc.episode.initial.velocity = {0.0, 0.0};
  tc.episode.initial.omega = {0.0, 0.0};
  auto& rw = tc.episode.reward;
  rw.position_weight = 0.0;
  rw.attitude_weight = 0.0;
  rw.progress_bonus = 0.0;
  rw.terminal_bonus = 0.0;
  rw.control_weight = -1.0;
  tc.ppo.kl_target = 0.01;
  tc.batches = 20;
  tc.episodes_per_batch = 10;
  tc.seed = 12;
  const auto out = scratch("effort");
  const auto result = train(tc, out);
  ASSERT_EQ(result.metrics.size(), 20u);
  const double first = result.metrics.front().mean_fuel;
  const double last = result.metrics.back().mean_fuel;
  EXPECT_LT(last, 0.6 * first);
  fs::remove_all(out);
}

TEST(Training, WritesMetricsAndCheckpoints) {
  TrainConfig tc;
  tc.episode = short_config(12.0);
  tc.batches = 3;
  tc.episodes_per_batch = 2;
  tc.checkpoint_every = 2;
  tc.seed = 13;
  const auto out = scratch("files");
  train(tc, out);
  std::ifstream in(out / "metrics.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kMetricsHeader);
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(rows));
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "batch_00002.bin"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "batch_00003.bin"));
  const auto c = load_checkpoint(out / "checkpoint.bin");
  EXPECT_EQ(c.next_batch, 3u);
  EXPECT_EQ(c.seed, 13u);
  fs::remove_all(out);
}

TEST(Training, DeterministicAndResumable) {
  TrainConfig tc;
  tc.episode = short_config(18.0);
  tc.batches = 4;
  tc.episodes_per_batch = 3;
  tc.seed = 14;
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const auto c = scratch("det_c");
  train(tc, a);
  train(tc, b);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "checkpoint.bin"), slurp(b / "checkpoint.bin"));

  TrainConfig half = tc;
  half.batches = 2;
  train(half, c);
  train(tc, c, true);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
  EXPECT_EQ(slurp(a / "checkpoint.bin"), slurp(c / "checkpoint.bin"));

  TrainConfig other = tc;
  other.seed = 15;
  EXPECT_THROW(train(other, c, true), ConfigError);
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST(Training, WorkerCountDoesNotChangeResults) {
  TrainConfig tc;
  tc.episode = short_config(12.0);
  tc.batches = 2;
  tc.episodes_per_batch = 4;
  tc.seed = 16;
  const auto a = scratch("w1");
  const auto b = scratch("w3");
  train(tc, a);
  tc.workers = 3;
  train(tc, b);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Config, Validation) {
  PPOConfig pc;
  EXPECT_NO_THROW(pc.validate());
  pc.discount = 1.5;
  EXPECT_THROW(pc.validate(), ConfigError);
  TrainConfig tc;
  tc.episodes_per_batch = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
}

}  // namespace
}  // namespace hover::ppo
