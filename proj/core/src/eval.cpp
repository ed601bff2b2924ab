#include "hover/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "hover/nn/distribution.hpp"

namespace hover::eval {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Stats {
  double mean = 0.0, std = 0.0, max = 0.0;
};

Stats stats_of(const std::vector<double>& x) {
  Stats s;
  if (x.empty()) return s;
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(x.size()));
  s.max = *std::max_element(x.begin(), x.end());
  // Guard the max >= mean invariant against rounding in the sum.
  s.max = std::max(s.max, s.mean);
  return s;
}

double hold_force(const env::Environment& environment) {
  const auto& s = environment.state();
  const auto& model = environment.asteroid();
  const auto forces = dynamics::env_forces_for(model);
  const Vec3 wa = dynamics::asteroid_angular_velocity(model, s.t);
  const double r = s.r.norm();
  const Vec3 accel = forces.srp_accel - forces.gm * s.r / (r * r * r) + wa.cross(s.r).cross(wa);
  return s.mass * accel.norm();
}

std::string action_bits(const dynamics::Action& a) {
  std::string out(a.size(), '0');
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ? '1' : '0';
  return out;
}

}  // namespace

NetworkController::NetworkController(std::shared_ptr<const nn::PolicyNetwork> policy,
                                     env::ObservationScaling scaling, bool stochastic)
    : policy_(std::move(policy)), scaling_(scaling), stochastic_(stochastic) {
  if (!policy_) throw std::invalid_argument("NetworkController: null policy");
  hidden_ = policy_->initial_hidden();
}

void NetworkController::reset(std::uint64_t episode_seed) {
  hidden_ = policy_->initial_hidden();
  rng_.seed(mix_seed(episode_seed, 4));
}

dynamics::Action NetworkController::act(const env::PolicyObservation& policy_obs,
                                        const env::ValueObservation&) {
  const nn::Vector logits = policy_->step(env::encode_policy_input(policy_obs, scaling_), hidden_);
  if (stochastic_) return nn::sample_multicategorical(logits, rng_).action;
  return nn::mode_action(logits);
}

std::unique_ptr<Controller> NetworkController::clone() const {
  return std::make_unique<NetworkController>(policy_, scaling_, stochastic_);
}

std::vector<Scenario> scenario_presets(const env::EpisodeConfig& baseline) {
  std::vector<Scenario> out;
  auto add = [&](std::string name, std::string description, std::vector<std::string> fields,
                 auto&& edit) {
    Scenario s;
    s.name = std::move(name);
    s.description = std::move(description);
    s.episode = baseline;
    s.changed_fields = std::move(fields);
    edit(s);
    out.push_back(std::move(s));
  };
  auto none = [](Scenario&) {};

  add("baseline", "optimization distribution", {}, none);
  add("extended-altitude", "initial altitude 10-700 m", {"initial.altitude"},
      [](Scenario& s) { s.episode.initial.altitude = {10.0, 700.0}; });
  add("facets-1280", "synthetic asteroids with 1280 facets", {"asteroid.subdivision_level"},
      [](Scenario& s) { s.episode.asteroid.subdivision_level = 3; });
  add("duration-1200", "hover for 1200 s", {"duration"},
      [](Scenario& s) { s.episode.duration = 1200.0; });
  add("actuator-fail-0.5", "failed thruster keeps half its thrust", {"failure.scale"},
      [](Scenario& s) { s.episode.failure.scale = 0.5; });
  add("sensor-noise", "range bias +-5 m, 2 m Gaussian noise",
      {"sensor.noise_bias", "sensor.noise_sigma"}, [](Scenario& s) {
        s.episode.sensor.noise_bias = {-5.0, 5.0};
        s.episode.sensor.noise_sigma = 2.0;
      });
  add("env-dynamics", "asteroid spin up to 1e-3 rad/s", {"asteroid_dynamics.spin_rate"},
      [](Scenario& s) { s.episode.asteroid_dynamics.spin_rate.max = 1.0e-3; });
  add("com-variation", "center of mass offset up to 10 cm per axis", {"com_variation"},
      [](Scenario& s) { s.episode.com_variation = 0.10; });

  struct RealCase {
    const char* name;
    const char* asset;
    double scale;
    double alt_min;
    double alt_max;
  };
  const RealCase real[] = {
      {"rq36", "rq36", 1.0, 100.0, 500.0},          {"rq36-extended", "rq36", 1.0, 10.0, 500.0},
      {"itokawa", "itokawa", 1.0, 100.0, 250.0},    {"itokawa-extended", "itokawa", 1.0, 10.0, 250.0},
      {"itokawa3x", "itokawa", 3.0, 100.0, 600.0},  {"itokawa3x-extended", "itokawa", 3.0, 10.0, 600.0},
  };
  for (const auto& rc : real) {
    char desc[96];
    std::snprintf(desc, sizeof(desc), "%s shape model x%g, altitude %g-%g m", rc.asset, rc.scale,
                  rc.alt_min, rc.alt_max);
    std::vector<std::string> fields;
    if (baseline.initial.altitude != Range{rc.alt_min, rc.alt_max}) fields.push_back("initial.altitude");
    fields.push_back("mesh_path");
    if (rc.scale != 1.0) fields.push_back("mesh_scale");
    add(rc.name, desc, std::move(fields), [&](Scenario& s) {
      s.asset = rc.asset;
      s.asset_scale = rc.scale;
      s.episode.initial.altitude = {rc.alt_min, rc.alt_max};
    });
  }
  return out;
}

std::optional<Scenario> find_preset(const std::string& name, const env::EpisodeConfig& baseline) {
  for (auto& s : scenario_presets(baseline)) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

Scenario resolve_assets(Scenario scenario, const std::map<std::string, AssetFile>& assets) {
  if (scenario.asset.empty()) return scenario;
  const auto it = assets.find(scenario.asset);
  if (it == assets.end()) {
    throw MissingAssetError("scenario '" + scenario.name + "' needs the '" + scenario.asset +
                            "' shape model; supply it with --asset " + scenario.asset + "=PATH");
  }
  scenario.episode.mesh_path = it->second.path;
  scenario.episode.mesh_scale = it->second.unit_scale * scenario.asset_scale;
  return scenario;
}

ScenarioError::ScenarioError(const std::string& scenario, const std::string& what)
    : std::runtime_error("scenario '" + scenario + "': " + what) {}

EpisodeRecord run_episode(env::Environment& environment, Controller& controller, int index,
                          std::uint64_t seed, const env::HoverThresholds& thresholds) {
  EpisodeRecord rec;
  rec.index = index;
  rec.seed = seed;
  controller.reset(seed);
  const auto reset = environment.reset(seed);
  rec.env_force = hold_force(environment);
  env::PolicyObservation pobs = reset.policy;
  env::ValueObservation vobs = reset.value;
  env::StepResult last;
  do {
    last = environment.step(controller.act(pobs, vobs));
    rec.total_reward += last.reward;
    pobs = last.policy;
    vobs = last.value;
  } while (!last.done);

  rec.steps = environment.step_count();
  rec.terminal_position_error = last.info.position_error.norm();
  rec.terminal_speed = last.info.speed;
  rec.worst_rate = last.info.omega.cwiseAbs().maxCoeff();
  rec.fuel_used = last.info.fuel_used;
  rec.rate_violation = last.info.rate_violation;
  rec.all_miss = last.info.all_miss;
  rec.fuel_exhausted = last.info.fuel_exhausted;
  rec.violated = rec.rate_violation || rec.all_miss || rec.fuel_exhausted;
  if (!rec.violated) {
    const auto cls = env::classify_hover(rec.terminal_position_error, rec.terminal_speed,
                                         last.info.omega, thresholds);
    rec.good_hover_1 = cls.good_hover_1;
    rec.good_hover_2 = cls.good_hover_2;
  }
  return rec;
}

EvalReport summarize(const std::string& scenario, const std::vector<EpisodeRecord>& records) {
  EvalReport r;
  r.scenario = scenario;
  r.episodes = static_cast<int>(records.size());
  if (records.empty()) return r;
  std::vector<double> pos, speed, rate, fuel, force;
  int gh1 = 0;
  int gh2 = 0;
  for (const auto& e : records) {
    pos.push_back(e.terminal_position_error);
    speed.push_back(e.terminal_speed * 100.0);
    rate.push_back(e.worst_rate * 1000.0);
    fuel.push_back(e.fuel_used);
    force.push_back(e.env_force);
    gh1 += e.good_hover_1 ? 1 : 0;
    gh2 += e.good_hover_2 ? 1 : 0;
    r.violations += e.violated ? 1 : 0;
  }
  const auto p = stats_of(pos);
  const auto s = stats_of(speed);
  const auto w = stats_of(rate);
  const auto f = stats_of(fuel);
  r.position_mean = p.mean, r.position_std = p.std, r.position_max = p.max;
  r.speed_mean = s.mean, r.speed_std = s.std, r.speed_max = s.max;
  r.rate_mean = w.mean, r.rate_std = w.std, r.rate_max = w.max;
  r.fuel_mean = f.mean, r.fuel_std = f.std, r.fuel_max = f.max;
  r.mean_env_force = stats_of(force).mean;
  const double n = static_cast<double>(records.size());
  r.good_hover_1_pct = 100.0 * gh1 / n;
  r.good_hover_2_pct = 100.0 * gh2 / n;
  return r;
}

EvalResult run_monte_carlo(const Controller& controller, const Scenario& scenario,
                           const EvalOptions& options) {
  if (options.episodes < 0) throw std::invalid_argument("run_monte_carlo: negative episode count");
  EvalResult result;
  result.records.resize(static_cast<std::size_t>(options.episodes));
  if (options.episodes == 0) {
    result.report = summarize(scenario.name, {});
    return result;
  }
  if (!scenario.asset.empty() && !scenario.episode.mesh_path) {
    throw MissingAssetError("scenario '" + scenario.name + "' has no shape model for asset '" +
                            scenario.asset + "'");
  }
  std::shared_ptr<const geometry::TriMesh> mesh;
  try {
    if (scenario.episode.mesh_path) {
      mesh = std::make_shared<const geometry::TriMesh>(
          geometry::load_mesh_file(*scenario.episode.mesh_path, scenario.episode.mesh_scale));
    }
  } catch (const std::exception& e) {
    throw ScenarioError(scenario.name, e.what());
  }

  const int n = options.episodes;
  const int n_workers = std::clamp(options.workers, 1, n);
  std::vector<std::string> errors(result.records.size());
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};

  auto work = [&]() {
    std::unique_ptr<Controller> ctrl = controller.clone();
    std::unique_ptr<env::Environment> environment;
    try {
      environment = std::make_unique<env::Environment>(scenario.episode, mesh);
    } catch (const std::exception& e) {
      errors[0] = e.what();
      failed = true;
      return;
    }
    for (int i = next.fetch_add(1); i < n && !failed; i = next.fetch_add(1)) {
      const auto idx = static_cast<std::size_t>(i);
      try {
        result.records[idx] = run_episode(*environment, *ctrl, i,
                                          mix_seed(options.seed, static_cast<std::uint64_t>(i)),
                                          options.thresholds);
      } catch (const std::exception& e) {
        errors[idx] = "episode " + std::to_string(i) + ": " + e.what();
        failed = true;
      }
    }
  };

  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failed) {
    for (const auto& e : errors) {
      if (!e.empty()) throw ScenarioError(scenario.name, e);
    }
  }
  result.report = summarize(scenario.name, result.records);
  return result;
}

FuelSanity fuel_sanity(double actual_fuel, double mean_env_force, double duration,
                       double specific_impulse, double g_ref) {
  FuelSanity f;
  f.actual = actual_fuel;
  f.ideal = mean_env_force * duration / (specific_impulse * g_ref);
  if (f.ideal > 0.0) {
    f.ratio = actual_fuel / f.ideal;
  } else {
    f.ratio = actual_fuel > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return f;
}

std::vector<TrajectoryRow> simulate_episode(env::Environment& environment, Controller& controller,
                                            std::uint64_t seed) {
  std::vector<TrajectoryRow> rows;
  controller.reset(seed);
  const auto reset = environment.reset(seed);
  env::PolicyObservation pobs = reset.policy;
  env::ValueObservation vobs = reset.value;
  const auto r0 = environment.initial_state().r;
  bool done = false;
  double reward = 0.0;
  while (!done) {
    TrajectoryRow row;
    row.step = environment.step_count();
    row.state = environment.state();
    row.t = row.state.t;
    row.position_error = row.state.r - r0;
    row.reward = reward;
    row.action = controller.act(pobs, vobs);
    const auto res = environment.step(row.action);
    rows.push_back(row);
    reward = res.reward;
    pobs = res.policy;
    vobs = res.value;
    done = res.done;
  }
  TrajectoryRow last;
  last.step = environment.step_count();
  last.state = environment.state();
  last.t = last.state.t;
  last.position_error = last.state.r - r0;
  last.reward = reward;
  last.action = dynamics::null_action();
  rows.push_back(last);
  return rows;
}

void write_summary_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << "scenario,episodes,pos_mean_m,pos_std_m,pos_max_m,speed_mean_cms,speed_std_cms,"
         "speed_max_cms,rate_mean_mrads,rate_std_mrads,rate_max_mrads,good_hover_1_pct,"
         "good_hover_2_pct,fuel_mean_kg,fuel_std_kg,fuel_max_kg,violations,mean_env_force_n\n";
  for (const auto& r : reports) {
    out << r.scenario << ',' << r.episodes << ',' << num(r.position_mean) << ','
        << num(r.position_std) << ',' << num(r.position_max) << ',' << num(r.speed_mean) << ','
        << num(r.speed_std) << ',' << num(r.speed_max) << ',' << num(r.rate_mean) << ','
        << num(r.rate_std) << ',' << num(r.rate_max) << ',' << num(r.good_hover_1_pct) << ','
        << num(r.good_hover_2_pct) << ',' << num(r.fuel_mean) << ',' << num(r.fuel_std) << ','
        << num(r.fuel_max) << ',' << r.violations << ',' << num(r.mean_env_force) << '\n';
  }
}

void write_episodes_csv(std::ostream& out,
                        const std::vector<std::pair<std::string, EpisodeRecord>>& rows) {
  out << "scenario,episode,seed,steps,terminal_position_error_m,terminal_speed_ms,"
         "worst_rate_rads,fuel_kg,total_reward,env_force_n,violated,rate_violation,all_miss,"
         "fuel_exhausted,good_hover_1,good_hover_2\n";
  for (const auto& [name, e] : rows) {
    out << name << ',' << e.index << ',' << e.seed << ',' << e.steps << ','
        << num(e.terminal_position_error) << ',' << num(e.terminal_speed) << ','
        << num(e.worst_rate) << ',' << num(e.fuel_used) << ',' << num(e.total_reward) << ','
        << num(e.env_force) << ',' << int(e.violated) << ',' << int(e.rate_violation) << ','
        << int(e.all_miss) << ',' << int(e.fuel_exhausted) << ',' << int(e.good_hover_1) << ','
        << int(e.good_hover_2) << '\n';
  }
}

void write_error_cdf_csv(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  std::vector<double> x;
  x.reserve(records.size());
  for (const auto& e : records) x.push_back(e.terminal_position_error);
  std::sort(x.begin(), x.end());
  out << "x,y\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    out << num(x[i]) << ',' << num(static_cast<double>(i + 1) / static_cast<double>(x.size())) << '\n';
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << "step,t,x,y,z,vx,vy,vz,qw,qx,qy,qz,wx,wy,wz,mass,err_x,err_y,err_z,err_norm,reward,"
         "thrusters\n";
  for (const auto& r : rows) {
    const auto& s = r.state;
    out << r.step << ',' << num(r.t) << ',' << num(s.r.x()) << ',' << num(s.r.y()) << ','
        << num(s.r.z()) << ',' << num(s.v.x()) << ',' << num(s.v.y()) << ',' << num(s.v.z()) << ','
        << num(s.q.w()) << ',' << num(s.q.x()) << ',' << num(s.q.y()) << ',' << num(s.q.z()) << ','
        << num(s.omega.x()) << ',' << num(s.omega.y()) << ',' << num(s.omega.z()) << ','
        << num(s.mass) << ',' << num(r.position_error.x()) << ',' << num(r.position_error.y())
        << ',' << num(r.position_error.z()) << ',' << num(r.position_error.norm()) << ','
        << num(r.reward) << ',' << action_bits(r.action) << '\n';
  }
}

}  // namespace hover::eval
