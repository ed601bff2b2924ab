#include "hover/ppo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "hover/checkpoint.hpp"
#include "hover/config_io.hpp"
#include "hover/nn/distribution.hpp"

namespace hover::ppo {

namespace fs = std::filesystem;

void PPOConfig::validate() const {
  require(discount > 0.0 && discount <= 1.0, "ppo.discount must lie in (0, 1]");
  require(clip_epsilon > 0.0 && clip_epsilon < 1.0, "ppo.clip_epsilon must lie in (0, 1)");
  require(clip_min > 0.0 && clip_min <= clip_max && clip_max < 1.0,
          "ppo.clip_min/clip_max must satisfy 0 < min <= max < 1");
  require(kl_target > 0.0, "ppo.kl_target must be positive");
  require(kl_stop_factor > 0.0, "ppo.kl_stop_factor must be positive");
  require(epochs >= 1, "ppo.epochs must be >= 1");
  require(minibatch_episodes >= 1, "ppo.minibatch_episodes must be >= 1");
  require(entropy_coef >= 0.0, "ppo.entropy_coef must be >= 0");
  require(policy_learning_rate > 0.0 && value_learning_rate > 0.0,
          "ppo learning rates must be positive");
  require(max_grad_norm >= 0.0, "ppo.max_grad_norm must be >= 0");
}

void TrainConfig::validate() const {
  episode.validate();
  ppo.validate();
  require(batches >= 0, "training.batches must be >= 0");
  require(episodes_per_batch >= 1, "training.episodes_per_batch must be >= 1");
  require(workers >= 1, "training.workers must be >= 1");
  require(checkpoint_every >= 1, "training.checkpoint_every must be >= 1");
}

std::size_t RolloutBatch::sample_count() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.length();
  return n;
}

RolloutError::RolloutError(std::size_t episode, const std::string& what)
    : std::runtime_error("episode " + std::to_string(episode) + ": " + what), episode_(episode) {}

namespace {

EpisodeRollout run_episode(env::Environment& environment, const nn::PolicyNetwork& policy,
                           const nn::ValueNetwork& value, std::uint64_t seed) {
  EpisodeRollout ep;
  ep.seed = seed;
  const auto& scaling = environment.config().scaling;
  const auto reset = environment.reset(seed);
  env::PolicyObservation pobs = reset.policy;
  env::ValueObservation vobs = reset.value;
  Vector hp = policy.initial_hidden();
  Vector hv = value.initial_hidden();
  Rng action_rng(mix_seed(seed, 3));

  const auto steps = static_cast<std::size_t>(environment.config().control_steps());
  ep.policy_inputs.reserve(steps);
  ep.value_inputs.reserve(steps);

  env::StepResult last;
  bool done = false;
  while (!done) {
    Vector pin = env::encode_policy_input(pobs, scaling);
    Vector vin = env::encode_value_input(vobs, scaling);
    ep.policy_hidden.push_back(hp);
    ep.value_hidden.push_back(hv);
    const Vector logits = policy.step(pin, hp);
    value.step(vin, hv);
    const auto sample = nn::sample_multicategorical(logits, action_rng);

    last = environment.step(sample.action);
    ep.policy_inputs.push_back(std::move(pin));
    ep.value_inputs.push_back(std::move(vin));
    ep.actions.push_back(sample.action);
    ep.log_probs.push_back(sample.log_prob);
    ep.rewards.push_back(last.reward);
    ep.dones.push_back(last.done ? 1 : 0);
    ep.total_reward += last.reward;
    pobs = last.policy;
    vobs = last.value;
    done = last.done;
  }
  ep.terminal_position_error = last.info.position_error.norm();
  ep.terminal_speed = last.info.speed;
  ep.terminal_omega = last.info.omega;
  ep.fuel_used = last.info.fuel_used;
  ep.violated = last.info.rate_violation || last.info.all_miss || last.info.fuel_exhausted;
  ep.terminal_ok = last.info.terminal_ok;
  return ep;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

double mean_of(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double std_of(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<std::vector<Vector>> replay_logits(const nn::PolicyNetwork& policy,
                                               const RolloutBatch& batch) {
  std::vector<std::vector<Vector>> out(batch.episodes.size());
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    const auto& ep = batch.episodes[e];
    if (ep.length() == 0) continue;
    Vector h = ep.policy_hidden.front();
    out[e].reserve(ep.length());
    for (const auto& x : ep.policy_inputs) out[e].push_back(policy.step(x, h));
  }
  return out;
}

double mean_kl(const std::vector<std::vector<Vector>>& old_logits,
               const std::vector<std::vector<Vector>>& new_logits) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t e = 0; e < old_logits.size(); ++e) {
    for (std::size_t t = 0; t < old_logits[e].size(); ++t) {
      sum += nn::kl_divergence(old_logits[e][t], new_logits[e][t]);
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void clip_norm(Vector& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RolloutBatch collect_rollouts(const EnvFactory& make_env, const nn::PolicyNetwork& policy,
                              const nn::ValueNetwork& value, int n_episodes,
                              std::uint64_t base_seed, int workers) {
  if (n_episodes < 0) throw std::invalid_argument("collect_rollouts: negative episode count");
  RolloutBatch batch;
  batch.episodes.resize(static_cast<std::size_t>(n_episodes));
  if (n_episodes == 0) return batch;

  const int n_workers = std::clamp(workers, 1, n_episodes);
  std::vector<std::string> errors(batch.episodes.size());
  std::vector<std::uint8_t> failed(batch.episodes.size(), 0);
  std::atomic<int> next{0};

  auto work = [&]() {
    std::unique_ptr<env::Environment> environment;
    try {
      environment = make_env();
    } catch (const std::exception& e) {
      // Attribute the failure to the first episode this worker would have run.
      const int i = next.fetch_add(1);
      if (i < n_episodes) {
        errors[static_cast<std::size_t>(i)] = e.what();
        failed[static_cast<std::size_t>(i)] = 1;
      }
      return;
    }
    for (int i = next.fetch_add(1); i < n_episodes; i = next.fetch_add(1)) {
      const auto idx = static_cast<std::size_t>(i);
      try {
        batch.episodes[idx] =
            run_episode(*environment, policy, value, mix_seed(base_seed, static_cast<std::uint64_t>(i)));
      } catch (const std::exception& e) {
        errors[idx] = e.what();
        failed[idx] = 1;
      }
    }
  };

  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < failed.size(); ++i) {
    if (failed[i]) throw RolloutError(i, errors[i]);
  }
  return batch;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double discount) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + discount * acc;
    out[k] = acc;
  }
  return out;
}

void compute_advantages(RolloutBatch& batch, double discount, const nn::ValueNetwork& value,
                        bool normalize) {
  std::vector<double> all;
  all.reserve(batch.sample_count());
  for (auto& ep : batch.episodes) {
    ep.returns = discounted_returns(ep.rewards, discount);
    ep.values.assign(ep.length(), 0.0);
    ep.advantages.assign(ep.length(), 0.0);
    if (ep.length() == 0) continue;
    Vector h = ep.value_hidden.front();
    for (std::size_t t = 0; t < ep.length(); ++t) {
      ep.values[t] = value.step(ep.value_inputs[t], h);
      ep.advantages[t] = ep.returns[t] - ep.values[t];
      all.push_back(ep.advantages[t]);
    }
  }
  if (!normalize || all.empty()) return;
  const double m = mean_of(all);
  const double s = std_of(all);
  for (auto& ep : batch.episodes) {
    for (auto& a : ep.advantages) a = s > 1e-12 ? (a - m) / s : a - m;
  }
}

SurrogateTerms clipped_surrogate(double ratio, double advantage, double epsilon) {
  SurrogateTerms s{};
  s.obj1 = ratio * advantage;
  s.obj2 = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
  s.clipped = s.obj2 < s.obj1;
  s.objective = s.clipped ? s.obj2 : s.obj1;
  s.ratio_gradient = s.clipped ? 0.0 : advantage;
  return s;
}

double adapt_clip(double measured_kl, double target, double epsilon, double lo, double hi) {
  double e = epsilon;
  if (measured_kl > 2.0 * target) {
    e = epsilon / 1.5;
  } else if (measured_kl < 0.5 * target) {
    e = epsilon * 1.5;
  }
  return std::clamp(e, lo, hi);
}

double value_loss(const nn::ValueNetwork& value, const RolloutBatch& batch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ep : batch.episodes) {
    if (ep.length() == 0) continue;
    Vector h = ep.value_hidden.front();
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const double d = value.step(ep.value_inputs[t], h) - ep.returns[t];
      sum += d * d;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

UpdateStats ppo_update(nn::PolicyNetwork& policy, nn::ValueNetwork& value, nn::Adam& policy_opt,
                       nn::Adam& value_opt, const RolloutBatch& batch, const PPOConfig& cfg,
                       double epsilon, Rng& shuffle_rng) {
  cfg.validate();
  for (const auto& ep : batch.episodes) {
    if (ep.returns.size() != ep.length() || ep.advantages.size() != ep.length()) {
      throw std::invalid_argument("ppo_update: batch has no advantages; run compute_advantages");
    }
  }
  UpdateStats stats;
  stats.epsilon_used = epsilon;
  stats.epsilon_next = epsilon;

  const Vector policy_backup = policy.parameters();
  const Vector value_backup = value.parameters();
  const nn::AdamState policy_opt_backup = policy_opt.state();
  const nn::AdamState value_opt_backup = value_opt.state();
  policy_opt.set_learning_rate(cfg.policy_learning_rate);
  value_opt.set_learning_rate(cfg.value_learning_rate);

  auto abort = [&](const std::string& why) {
    policy.set_parameters(policy_backup);
    value.set_parameters(value_backup);
    policy_opt.set_state(policy_opt_backup);
    value_opt.set_state(value_opt_backup);
    stats.aborted = true;
    stats.epsilon_next = epsilon;
    stats.diagnostics = why;
    return stats;
  };

  const std::size_t n_samples = batch.sample_count();
  if (n_samples == 0) return stats;

  const auto old_logits = replay_logits(policy, batch);
  double entropy_sum = 0.0;
  for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
    const auto& ep = batch.episodes[e];
    for (std::size_t t = 0; t < ep.length(); ++t) {
      const double lp = nn::log_prob(old_logits[e][t], ep.actions[t]);
      stats.initial_ratio_deviation =
          std::max(stats.initial_ratio_deviation, std::abs(std::exp(lp - ep.log_probs[t]) - 1.0));
      entropy_sum += nn::entropy(old_logits[e][t]);
    }
  }
  stats.entropy = entropy_sum / static_cast<double>(n_samples);
  if (!std::isfinite(stats.initial_ratio_deviation)) {
    return abort("non-finite probability ratio on replay");
  }

  std::vector<std::size_t> order(batch.episodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<std::size_t>(cfg.minibatch_episodes);

  // The value function keeps fitting for every epoch; the policy stops once
  // the KL threshold is crossed.
  bool policy_active = true;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double objective_sum = 0.0;
    std::size_t clipped = 0;

    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t stop = std::min(order.size(), start + mb);
      std::size_t n = 0;
      for (std::size_t i = start; i < stop; ++i) n += batch.episodes[order[i]].length();
      if (n == 0) continue;
      const double inv_n = 1.0 / static_cast<double>(n);

      Vector pgrad = Vector::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
      Vector vgrad = Vector::Zero(static_cast<Eigen::Index>(value.parameter_count()));
      double vloss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& ep = batch.episodes[order[i]];
        if (ep.length() == 0) continue;

        if (policy_active) {
          const auto trace = policy.forward_sequence(ep.policy_inputs, ep.policy_hidden.front());
          std::vector<Vector> dlogits(ep.length());
          for (std::size_t t = 0; t < ep.length(); ++t) {
            const Vector& z = trace.logits[t];
            const double ratio = std::exp(nn::log_prob(z, ep.actions[t]) - ep.log_probs[t]);
            const auto s = clipped_surrogate(ratio, ep.advantages[t], epsilon);
            objective_sum += s.objective;
            if (s.clipped) ++clipped;
            dlogits[t] = (s.ratio_gradient * ratio * inv_n) * nn::log_prob_gradient(z, ep.actions[t]);
            if (cfg.entropy_coef > 0.0) dlogits[t] += (cfg.entropy_coef * inv_n) * nn::entropy_gradient(z);
          }
          pgrad += policy.backward_sequence(trace, dlogits);
        }

        const auto vtrace = value.forward_sequence(ep.value_inputs, ep.value_hidden.front());
        std::vector<double> dv(ep.length());
        for (std::size_t t = 0; t < ep.length(); ++t) {
          const double d = vtrace.values[t] - ep.returns[t];
          vloss += d * d * inv_n;
          dv[t] = 2.0 * d * inv_n;
        }
        vgrad += value.backward_sequence(vtrace, dv);
      }
      if (!all_finite(pgrad) || !all_finite(vgrad) || !std::isfinite(vloss) ||
          !std::isfinite(objective_sum)) {
        return abort("non-finite loss or gradient in epoch " + std::to_string(epoch));
      }
      if (policy_active) {
        clip_norm(pgrad, cfg.max_grad_norm);
        policy_opt.ascend(policy.parameters(), pgrad);
      }
      clip_norm(vgrad, cfg.max_grad_norm);
      value_opt.descend(value.parameters(), vgrad);
    }

    if (!policy_active) continue;
    stats.epochs_run = epoch + 1;
    stats.policy_objective = objective_sum / static_cast<double>(n_samples);
    stats.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n_samples);
    stats.kl = mean_kl(old_logits, replay_logits(policy, batch));
    if (!std::isfinite(stats.kl)) return abort("non-finite KL after epoch " + std::to_string(epoch));
    if (stats.kl > cfg.kl_stop_factor * cfg.kl_target) policy_active = false;
  }

  stats.value_loss = value_loss(value, batch);
  if (!std::isfinite(stats.value_loss)) return abort("non-finite value loss");
  stats.epsilon_next = adapt_clip(stats.kl, cfg.kl_target, epsilon, cfg.clip_min, cfg.clip_max);
  return stats;
}

BatchMetrics summarize_batch(int index, const RolloutBatch& batch) {
  BatchMetrics m;
  m.batch = index;
  if (batch.episodes.empty()) return m;
  std::vector<double> rewards;
  std::vector<double> pos;
  double steps = 0.0;
  double violations = 0.0;
  double fuel = 0.0;
  for (const auto& ep : batch.episodes) {
    rewards.push_back(ep.total_reward);
    pos.push_back(ep.terminal_position_error);
    steps += static_cast<double>(ep.length());
    violations += ep.violated ? 1.0 : 0.0;
    fuel += ep.fuel_used;
  }
  const double n = static_cast<double>(batch.episodes.size());
  m.mean_reward = mean_of(rewards);
  m.std_reward = std_of(rewards);
  m.min_reward = *std::min_element(rewards.begin(), rewards.end());
  m.max_reward = *std::max_element(rewards.begin(), rewards.end());
  m.mean_term_pos_err = mean_of(pos);
  m.max_term_pos_err = *std::max_element(pos.begin(), pos.end());
  m.mean_steps = steps / n;
  m.violation_rate = violations / n;
  m.mean_fuel = fuel / n;
  return m;
}

std::string format_metrics_row(const BatchMetrics& m) {
  std::ostringstream os;
  os << m.batch << ',' << format_double(m.mean_reward) << ',' << format_double(m.std_reward) << ','
     << format_double(m.min_reward) << ',' << format_double(m.max_reward) << ','
     << format_double(m.mean_term_pos_err) << ',' << format_double(m.max_term_pos_err) << ','
     << format_double(m.mean_steps) << ',' << format_double(m.violation_rate) << ','
     << format_double(m.mean_fuel) << ',' << format_double(m.kl) << ','
     << format_double(m.clip_epsilon) << ',' << format_double(m.clip_fraction) << ','
     << format_double(m.value_loss) << ',' << m.epochs;
  return os.str();
}

TrainResult train(const TrainConfig& cfg, const fs::path& out_dir, bool resume,
                  const ProgressCallback& progress) {
  cfg.validate();
  fs::create_directories(out_dir);
  const fs::path latest = out_dir / "checkpoint.bin";
  const fs::path metrics_path = out_dir / "metrics.csv";
  const std::string config_text = config::to_json(cfg).dump();

  nn::PolicyNetwork policy;
  nn::ValueNetwork value;
  policy.initialize(mix_seed(cfg.seed, 101));
  value.initialize(mix_seed(cfg.seed, 102));
  nn::Adam policy_opt(policy.parameter_count(), {cfg.ppo.policy_learning_rate});
  nn::Adam value_opt(value.parameter_count(), {cfg.ppo.value_learning_rate});
  Rng shuffle_rng(mix_seed(cfg.seed, 103));
  double epsilon = cfg.ppo.clip_epsilon;
  int start = 0;

  TrainResult result;
  std::vector<std::string> kept_rows;
  if (resume && fs::exists(latest)) {
    const Checkpoint c = load_checkpoint(latest);
    if (c.seed != cfg.seed) throw ConfigError("checkpoint seed does not match training seed");
    policy.set_parameters(c.policy_parameters);
    value.set_parameters(c.value_parameters);
    policy_opt.set_state(c.policy_optimizer);
    value_opt.set_state(c.value_optimizer);
    epsilon = c.clip_epsilon;
    start = static_cast<int>(c.next_batch);
    std::istringstream rs(c.rng_state);
    rs >> shuffle_rng;
    std::ifstream in(metrics_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoi(line.substr(0, line.find(','))) < start) kept_rows.push_back(line);
    }
  }
  {
    std::ofstream out(metrics_path, std::ios::trunc);
    out << kMetricsHeader << '\n';
    for (const auto& r : kept_rows) out << r << '\n';
  }
  std::ofstream metrics(metrics_path, std::ios::app);

  std::shared_ptr<const geometry::TriMesh> mesh;
  if (cfg.episode.mesh_path) {
    mesh = std::make_shared<const geometry::TriMesh>(
        geometry::load_mesh_file(*cfg.episode.mesh_path, cfg.episode.mesh_scale));
  }
  const EnvFactory factory = [&]() { return std::make_unique<env::Environment>(cfg.episode, mesh); };

  auto save = [&](int next_batch, const fs::path& path) {
    Checkpoint c;
    c.policy_parameters = policy.parameters();
    c.value_parameters = value.parameters();
    c.policy_optimizer = policy_opt.state();
    c.value_optimizer = value_opt.state();
    c.clip_epsilon = epsilon;
    c.next_batch = next_batch;
    c.seed = cfg.seed;
    std::ostringstream rs;
    rs << shuffle_rng;
    c.rng_state = rs.str();
    c.config_json = config_text;
    save_checkpoint(path, c);
  };

  for (int b = start; b < cfg.batches; ++b) {
    RolloutBatch batch = collect_rollouts(factory, policy, value, cfg.episodes_per_batch,
                                          mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(b)),
                                          cfg.workers);
    compute_advantages(batch, cfg.ppo.discount, value, cfg.ppo.normalize_advantages);
    BatchMetrics m = summarize_batch(b, batch);
    const UpdateStats s =
        ppo_update(policy, value, policy_opt, value_opt, batch, cfg.ppo, epsilon, shuffle_rng);
    m.kl = s.kl;
    m.clip_epsilon = epsilon;
    m.clip_fraction = s.clip_fraction;
    m.value_loss = s.value_loss;
    m.epochs = s.aborted ? 0 : s.epochs_run;
    epsilon = s.epsilon_next;

    metrics << format_metrics_row(m) << '\n' << std::flush;
    result.metrics.push_back(m);
    if (progress) progress(m);

    const bool last = b + 1 == cfg.batches;
    if ((b + 1) % cfg.checkpoint_every == 0 || last) {
      char name[32];
      std::snprintf(name, sizeof(name), "batch_%05d.bin", b + 1);
      save(b + 1, out_dir / "checkpoints" / name);
      save(b + 1, latest);
    }
  }
  if (!fs::exists(latest)) save(start, latest);
  result.final_checkpoint = latest;
  return result;
}

}  // namespace hover::ppo
