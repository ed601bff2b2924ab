#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hover/env.hpp"
#include "hover/nn/adam.hpp"
#include "hover/nn/networks.hpp"

namespace hover::ppo {

using nn::Vector;

struct PPOConfig {
  double discount = 0.99;         // gamma_disc
  double clip_epsilon = 0.2;      // initial epsilon
  double kl_target = 0.001;
  double kl_stop_factor = 1.5;    // stop epochs once KL > factor * target
  double clip_min = 0.01;
  double clip_max = 0.5;
  int epochs = 10;
  int minibatch_episodes = 10;    // whole episodes per gradient step
  double entropy_coef = 0.0;
  double policy_learning_rate = 3e-4;  // beta_theta
  double value_learning_rate = 1e-3;   // beta_w
  double max_grad_norm = 0.0;          // 0 disables clipping
  bool normalize_advantages = true;

  void validate() const;
};

struct EpisodeRollout {
  std::uint64_t seed = 0;
  std::vector<Vector> policy_inputs;
  std::vector<Vector> value_inputs;
  std::vector<Vector> policy_hidden;  // state entering each step
  std::vector<Vector> value_hidden;
  std::vector<dynamics::Action> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  // Filled by compute_advantages.
  std::vector<double> values;
  std::vector<double> returns;
  std::vector<double> advantages;

  double total_reward = 0.0;
  double terminal_position_error = 0.0;
  double terminal_speed = 0.0;
  Vec3 terminal_omega = Vec3::Zero();
  double fuel_used = 0.0;
  bool violated = false;
  bool terminal_ok = false;

  [[nodiscard]] std::size_t length() const { return rewards.size(); }
};

struct RolloutBatch {
  std::vector<EpisodeRollout> episodes;
  [[nodiscard]] std::size_t sample_count() const;
};

using EnvFactory = std::function<std::unique_ptr<env::Environment>()>;

class RolloutError : public std::runtime_error {
 public:
  RolloutError(std::size_t episode, const std::string& what);
  [[nodiscard]] std::size_t episode() const { return episode_; }

 private:
  std::size_t episode_;
};

/// Run `n_episodes` fresh episodes with stochastic actions. Episode i uses
/// seed mix_seed(base_seed, i) regardless of how work is split across
/// `workers` threads.
RolloutBatch collect_rollouts(const EnvFactory& make_env, const nn::PolicyNetwork& policy,
                              const nn::ValueNetwork& value, int n_episodes,
                              std::uint64_t base_seed, int workers = 1);

/// Discounted reward-to-go within one episode.
std::vector<double> discounted_returns(const std::vector<double>& rewards, double discount);

/// Fills values (fresh replay from zero hidden state), returns and advantages.
void compute_advantages(RolloutBatch& batch, double discount, const nn::ValueNetwork& value,
                        bool normalize = true);

struct SurrogateTerms {
  double obj1;  // p A
  double obj2;  // clip(p, 1 - eps, 1 + eps) A
  double objective;  // min(obj1, obj2)
  double ratio_gradient;  // d objective / d p
  bool clipped;
};

SurrogateTerms clipped_surrogate(double ratio, double advantage, double epsilon);

/// Shrink epsilon by 1.5 when KL > 2 target, grow by 1.5 when KL < target / 2,
/// then clamp to [lo, hi].
double adapt_clip(double measured_kl, double target, double epsilon, double lo = 0.01,
                  double hi = 0.5);

struct UpdateStats {
  double initial_ratio_deviation = 0.0;  // max |p_k - 1| before any step
  double kl = 0.0;
  double clip_fraction = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double epsilon_used = 0.0;
  double epsilon_next = 0.0;
  int epochs_run = 0;
  bool aborted = false;
  std::string diagnostics;
};

/// Clipped-surrogate ascent on the policy and squared-error descent on the
/// value function, over whole-episode minibatches. Policy epochs stop once the
/// KL exceeds kl_stop_factor * kl_target; the value function runs all epochs.
/// Parameters are restored if any loss or gradient turns non-finite.
UpdateStats ppo_update(nn::PolicyNetwork& policy, nn::ValueNetwork& value, nn::Adam& policy_opt,
                       nn::Adam& value_opt, const RolloutBatch& batch, const PPOConfig& cfg,
                       double epsilon, Rng& shuffle_rng);

/// Mean squared value error over the batch against stored returns.
double value_loss(const nn::ValueNetwork& value, const RolloutBatch& batch);

struct BatchMetrics {
  int batch = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double min_reward = 0.0;
  double max_reward = 0.0;
  double mean_term_pos_err = 0.0;
  double max_term_pos_err = 0.0;
  double mean_steps = 0.0;
  double violation_rate = 0.0;
  double mean_fuel = 0.0;
  double kl = 0.0;
  double clip_epsilon = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  int epochs = 0;
};

BatchMetrics summarize_batch(int index, const RolloutBatch& batch);

struct TrainConfig {
  env::EpisodeConfig episode;
  PPOConfig ppo;
  int batches = 200;
  int episodes_per_batch = 30;
  std::uint64_t seed = 1;
  int workers = 1;
  int checkpoint_every = 10;  // batches; final checkpoint always written

  void validate() const;
};

struct TrainResult {
  std::vector<BatchMetrics> metrics;
  std::filesystem::path final_checkpoint;
};

using ProgressCallback = std::function<void(const BatchMetrics&)>;

/// Alternate rollout collection, advantage estimation and updates. Writes
/// metrics.csv and checkpoints under `out_dir`. With `resume`, continues from
/// out_dir/checkpoint.bin.
TrainResult train(const TrainConfig& cfg, const std::filesystem::path& out_dir, bool resume = false,
                  const ProgressCallback& progress = {});

inline constexpr const char* kMetricsHeader =
    "batch,mean_reward,std_reward,min_reward,max_reward,mean_term_pos_err,max_term_pos_err,"
    "mean_steps,violation_rate,mean_fuel,kl,clip_epsilon,clip_fraction,value_loss,epochs";

std::string format_metrics_row(const BatchMetrics& m);

}  // namespace hover::ppo
