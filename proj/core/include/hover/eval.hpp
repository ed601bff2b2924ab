#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hover/env.hpp"
#include "hover/nn/networks.hpp"

namespace hover::eval {

/// Closed-loop action source. Each worker owns its own clone.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(std::uint64_t episode_seed) = 0;
  virtual dynamics::Action act(const env::PolicyObservation& policy_obs,
                               const env::ValueObservation& value_obs) = 0;
  [[nodiscard]] virtual std::unique_ptr<Controller> clone() const = 0;
};

/// Recurrent policy; greedy (mode) actions unless `stochastic`.
class NetworkController final : public Controller {
 public:
  NetworkController(std::shared_ptr<const nn::PolicyNetwork> policy, env::ObservationScaling scaling,
                    bool stochastic = false);
  void reset(std::uint64_t episode_seed) override;
  dynamics::Action act(const env::PolicyObservation& policy_obs,
                       const env::ValueObservation& value_obs) override;
  [[nodiscard]] std::unique_ptr<Controller> clone() const override;

 private:
  std::shared_ptr<const nn::PolicyNetwork> policy_;
  env::ObservationScaling scaling_;
  bool stochastic_;
  nn::Vector hidden_;
  Rng rng_;
};

/// Never fires.
class NullController final : public Controller {
 public:
  void reset(std::uint64_t) override {}
  dynamics::Action act(const env::PolicyObservation&, const env::ValueObservation&) override {
    return dynamics::null_action();
  }
  [[nodiscard]] std::unique_ptr<Controller> clone() const override {
    return std::make_unique<NullController>();
  }
};

struct Scenario {
  std::string name;
  std::string description;
  env::EpisodeConfig episode;
  std::string asset;          // empty: synthetic asteroids; otherwise a shape-model name
  double asset_scale = 1.0;   // multiplies the asset's own unit scale
  std::vector<std::string> changed_fields;  // dotted config keys that differ from baseline, assuming unit-scale assets
};

/// Baseline plus one preset per generalization and real-shape-model case.
std::vector<Scenario> scenario_presets(const env::EpisodeConfig& baseline = {});
std::optional<Scenario> find_preset(const std::string& name, const env::EpisodeConfig& baseline = {});

struct AssetFile {
  std::filesystem::path path;
  double unit_scale = 1.0;  // converts file units to meters
};

class MissingAssetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fill in mesh_path / mesh_scale for asset-backed scenarios.
Scenario resolve_assets(Scenario scenario, const std::map<std::string, AssetFile>& assets);

struct EpisodeRecord {
  int index = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  double terminal_position_error = 0.0;  // m
  double terminal_speed = 0.0;           // m/s
  double worst_rate = 0.0;               // max |omega_i| at termination, rad/s
  double fuel_used = 0.0;                // kg
  double total_reward = 0.0;
  double env_force = 0.0;  // N, magnitude of the force needed to hold position at initiation
  bool violated = false;
  bool rate_violation = false;
  bool all_miss = false;
  bool fuel_exhausted = false;
  bool good_hover_1 = false;
  bool good_hover_2 = false;
};

struct EvalReport {
  std::string scenario;
  int episodes = 0;
  double position_mean = 0.0, position_std = 0.0, position_max = 0.0;  // m
  double speed_mean = 0.0, speed_std = 0.0, speed_max = 0.0;           // cm/s
  double rate_mean = 0.0, rate_std = 0.0, rate_max = 0.0;              // mrad/s, worst component
  double good_hover_1_pct = 0.0;
  double good_hover_2_pct = 0.0;
  double fuel_mean = 0.0, fuel_std = 0.0, fuel_max = 0.0;  // kg
  int violations = 0;
  double mean_env_force = 0.0;  // N
};

struct EvalOptions {
  int episodes = 500;
  std::uint64_t seed = 1;
  int workers = 1;
  env::HoverThresholds thresholds;
};

struct EvalResult {
  EvalReport report;
  std::vector<EpisodeRecord> records;
};

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& scenario, const std::string& what);
};

/// Episode i uses seed mix_seed(options.seed, i). A run that ends in a
/// violation never counts as a good hover.
EvalResult run_monte_carlo(const Controller& controller, const Scenario& scenario,
                           const EvalOptions& options);

/// Fixed-order reduction over records.
EvalReport summarize(const std::string& scenario, const std::vector<EpisodeRecord>& records);

EpisodeRecord run_episode(env::Environment& environment, Controller& controller, int index,
                          std::uint64_t seed, const env::HoverThresholds& thresholds = {});

struct FuelSanity {
  double ideal = 0.0;   // kg, continuous cancellation F T / (Isp g)
  double actual = 0.0;  // kg
  double ratio = 0.0;   // actual / ideal
};

FuelSanity fuel_sanity(double actual_fuel, double mean_env_force, double duration,
                       double specific_impulse, double g_ref = 9.8);

struct TrajectoryRow {
  int step = 0;
  double t = 0.0;
  dynamics::SpacecraftState state;
  Vec3 position_error = Vec3::Zero();
  double reward = 0.0;
  dynamics::Action action{};  // applied over the following control period
};

std::vector<TrajectoryRow> simulate_episode(env::Environment& environment, Controller& controller,
                                            std::uint64_t seed);

void write_summary_csv(std::ostream& out, const std::vector<EvalReport>& reports);
void write_episodes_csv(std::ostream& out, const std::vector<std::pair<std::string, EpisodeRecord>>& rows);
/// x = terminal position error (sorted), y = fraction of episodes at or below x.
void write_error_cdf_csv(std::ostream& out, const std::vector<EpisodeRecord>& records);
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

}  // namespace hover::eval
