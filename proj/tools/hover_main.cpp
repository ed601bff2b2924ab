// hover: asteroid generation, training, evaluation and debugging front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hover/checkpoint.hpp"
#include "hover/config_io.hpp"
#include "hover/eval.hpp"
#include "hover/geometry.hpp"
#include "hover/ppo.hpp"

namespace fs = std::filesystem;
using hover::config::Json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void write_run_config(const fs::path& dir, const std::string& command, const Json& config) {
  Json j;
  j["hover_version"] = HOVER_VERSION;
  j["command"] = command;
  j["config"] = config;
  hover::config::write_json_file(dir / "config.json", j);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Shared --config/--set handling.
struct ConfigArgs {
  std::string spec = "base";
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", spec, "built-in config (base, curriculum) or JSON file");
    cmd->add_option("--set", overrides, "override a config key, e.g. episode.duration=300")
        ->allow_extra_args(false);
  }
  [[nodiscard]] hover::ppo::TrainConfig resolve() const {
    return hover::config::resolve_train_config(spec, overrides);
  }
};

std::shared_ptr<hover::nn::PolicyNetwork> load_policy(const fs::path& path) {
  const auto ckpt = hover::load_checkpoint(path);
  auto policy = std::make_shared<hover::nn::PolicyNetwork>();
  if (static_cast<std::size_t>(ckpt.policy_parameters.size()) != policy->parameter_count()) {
    throw hover::CheckpointError("checkpoint policy has " +
                                 std::to_string(ckpt.policy_parameters.size()) +
                                 " parameters, expected " + std::to_string(policy->parameter_count()));
  }
  policy->set_parameters(ckpt.policy_parameters);
  return policy;
}

std::unique_ptr<hover::eval::Controller> make_controller(const std::string& checkpoint,
                                                         const std::string& policy_name,
                                                         const hover::env::ObservationScaling& s,
                                                         bool stochastic) {
  if (!checkpoint.empty()) {
    return std::make_unique<hover::eval::NetworkController>(load_policy(checkpoint), s, stochastic);
  }
  if (policy_name == "null") return std::make_unique<hover::eval::NullController>();
  throw hover::ConfigError("unknown scripted policy '" + policy_name + "' (available: null)");
}

// --- gen-asteroid ---------------------------------------------------------

struct GenArgs {
  std::uint64_t seed = 1;
  int level = 2;
  std::string shape = "synthetic";
  bool uniform_axes = false;
  fs::path out = "asteroid";
  ConfigArgs cfg;
};

int run_gen(const GenArgs& a) {
  auto tc = a.cfg.resolve();
  auto& ac = tc.episode.asteroid;
  ac.subdivision_level = a.level;
  ac.uniform_axes = ac.uniform_axes || a.uniform_axes;
  ac.validate();
  fs::create_directories(a.out);

  Json meta;
  hover::geometry::AsteroidModel model;
  if (a.shape == "synthetic") {
    model = hover::geometry::synthesize_asteroid(a.seed, ac, tc.episode.asteroid_dynamics);
  } else if (a.shape == "peanut") {
    model = hover::geometry::asteroid_from_mesh(hover::geometry::generate_peanut(a.level), a.seed,
                                                tc.episode.asteroid_dynamics);
  } else {
    throw hover::ConfigError("unknown shape '" + a.shape + "' (synthetic, peanut)");
  }
  hover::geometry::save_mesh_file(a.out / "asteroid.obj", model.mesh);

  meta["shape"] = a.shape;
  meta["seed"] = a.seed;
  meta["subdivision_level"] = a.level;
  meta["faces"] = model.mesh.faces.size();
  meta["vertices"] = model.mesh.vertices.size();
  meta["half_axes"] = {model.half_axes.a_pos, model.half_axes.a_neg, model.half_axes.b_pos,
                       model.half_axes.b_neg, model.half_axes.c_pos, model.half_axes.c_neg};
  meta["mass"] = model.mass;
  meta["spin_rate"] = model.spin_rate;
  meta["nutation_deg"] = model.nutation / hover::kDegToRad;
  meta["srp_accel"] = {model.srp_accel.x(), model.srp_accel.y(), model.srp_accel.z()};
  hover::config::write_json_file(a.out / "asteroid.json", meta);
  write_run_config(a.out, "gen-asteroid", hover::config::to_json(tc.episode));
  std::printf("wrote %s (%zu faces, %zu vertices)\n", (a.out / "asteroid.obj").c_str(),
              model.mesh.faces.size(), model.mesh.vertices.size());
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  ConfigArgs cfg;
  std::uint64_t seed = 1;
  bool seed_set = false;
  int batches = -1;
  int episodes = -1;
  int workers = default_workers();
  fs::path out = "run";
  bool resume = false;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  auto tc = a.cfg.resolve();
  if (a.seed_set) tc.seed = a.seed;
  if (a.batches >= 0) tc.batches = a.batches;
  if (a.episodes > 0) tc.episodes_per_batch = a.episodes;
  tc.workers = a.workers;
  tc.validate();
  fs::create_directories(a.out);
  write_run_config(a.out, "train", hover::config::to_json(tc));

  const auto result = hover::ppo::train(tc, a.out, a.resume, [&](const hover::ppo::BatchMetrics& m) {
    if (!a.quiet) {
      std::printf("batch %4d  reward %9.3f +- %8.3f  term_err %8.3f m  kl %.2e  eps %.3f\n",
                  m.batch, m.mean_reward, m.std_reward, m.mean_term_pos_err, m.kl, m.clip_epsilon);
      std::fflush(stdout);
    }
  });
  std::printf("final checkpoint: %s\n", result.final_checkpoint.c_str());
  return 0;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  ConfigArgs cfg;
  std::string checkpoint;
  std::string policy = "null";
  std::vector<std::string> scenarios;
  bool all = false;
  int episodes = 500;
  std::uint64_t seed = 1;
  int workers = default_workers();
  fs::path out = "eval";
  std::vector<std::string> assets;
  std::vector<std::string> asset_scales;
  bool stochastic = false;
};

std::map<std::string, hover::eval::AssetFile> parse_assets(const EvalArgs& a) {
  std::map<std::string, hover::eval::AssetFile> out;
  for (const auto& s : a.assets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw hover::ConfigError("--asset expects NAME=PATH");
    out[s.substr(0, eq)].path = s.substr(eq + 1);
  }
  for (const auto& s : a.asset_scales) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw hover::ConfigError("--asset-scale expects NAME=FACTOR");
    const auto it = out.find(s.substr(0, eq));
    if (it == out.end()) throw hover::ConfigError("--asset-scale for unknown asset '" + s.substr(0, eq) + "'");
    try {
      it->second.unit_scale = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw hover::ConfigError("--asset-scale: bad factor in '" + s + "'");
    }
  }
  return out;
}

int run_eval(const EvalArgs& a) {
  const auto tc = a.cfg.resolve();
  const auto assets = parse_assets(a);
  std::vector<hover::eval::Scenario> selected;
  if (a.all) {
    selected = hover::eval::scenario_presets(tc.episode);
  } else {
    if (a.scenarios.empty()) throw hover::ConfigError("eval needs --scenario NAME or --all");
    for (const auto& name : a.scenarios) {
      auto s = hover::eval::find_preset(name, tc.episode);
      if (!s) throw hover::ConfigError("unknown scenario '" + name + "'");
      selected.push_back(*s);
    }
  }
  const auto controller = make_controller(a.checkpoint, a.policy, tc.episode.scaling, a.stochastic);

  fs::create_directories(a.out);
  Json echo = hover::config::to_json(tc.episode);
  Json run;
  run["checkpoint"] = a.checkpoint.empty() ? Json(nullptr) : Json(a.checkpoint);
  run["policy"] = a.checkpoint.empty() ? a.policy : "checkpoint";
  run["episodes"] = a.episodes;
  run["seed"] = a.seed;
  run["stochastic"] = a.stochastic;
  run["scenarios"] = Json::array();
  for (const auto& s : selected) run["scenarios"].push_back(s.name);
  write_run_config(a.out, "eval", {{"baseline", echo}, {"run", run}});

  hover::eval::EvalOptions opts;
  opts.episodes = a.episodes;
  opts.seed = a.seed;
  opts.workers = a.workers;

  std::vector<hover::eval::EvalReport> reports;
  std::vector<std::pair<std::string, hover::eval::EpisodeRecord>> rows;
  std::ofstream fuel = open_out(a.out / "fuel.csv");
  fuel << "scenario,mean_env_force_n,duration_s,ideal_fuel_kg,actual_fuel_kg,ratio\n";
  int failures = 0;
  for (const auto& preset : selected) {
    try {
      const auto scenario = hover::eval::resolve_assets(preset, assets);
      const auto res = hover::eval::run_monte_carlo(*controller, scenario, opts);
      reports.push_back(res.report);
      for (const auto& r : res.records) rows.emplace_back(scenario.name, r);
      std::ofstream cdf = open_out(a.out / "plots" / (scenario.name + "_terminal_error_cdf.csv"));
      hover::eval::write_error_cdf_csv(cdf, res.records);
      const auto fs_ = hover::eval::fuel_sanity(res.report.fuel_mean, res.report.mean_env_force,
                                                scenario.episode.duration,
                                                scenario.episode.dynamics.specific_impulse,
                                                scenario.episode.dynamics.g_ref);
      fuel << scenario.name << ',' << res.report.mean_env_force << ',' << scenario.episode.duration
           << ',' << fs_.ideal << ',' << fs_.actual << ',' << fs_.ratio << '\n';
      std::printf("%-20s n=%d  pos %.3f/%.3f m  GH1 %.1f%%  GH2 %.1f%%  fuel %.3f kg  violations %d\n",
                  scenario.name.c_str(), res.report.episodes, res.report.position_mean,
                  res.report.position_max, res.report.good_hover_1_pct, res.report.good_hover_2_pct,
                  res.report.fuel_mean, res.report.violations);
    } catch (const std::exception& e) {
      ++failures;
      std::fprintf(stderr, "hover: error: %s\n", e.what());
    }
  }
  std::ofstream summary = open_out(a.out / "summary.csv");
  hover::eval::write_summary_csv(summary, reports);
  std::ofstream episodes = open_out(a.out / "episodes.csv");
  hover::eval::write_episodes_csv(episodes, rows);
  return failures == 0 ? 0 : kExitRuntime;
}

// --- scan-debug -----------------------------------------------------------

struct ScanArgs {
  ConfigArgs cfg;
  std::uint64_t seed = 1;
  std::string mesh;
  double mesh_scale = 1.0;
  fs::path out = "scan";
};

int run_scan(const ScanArgs& a) {
  auto tc = a.cfg.resolve();
  if (!a.mesh.empty()) {
    tc.episode.mesh_path = a.mesh;
    tc.episode.mesh_scale = a.mesh_scale;
  }
  hover::env::Environment environment(tc.episode);
  environment.reset(a.seed);
  const auto& frame = environment.initial_frame();
  fs::create_directories(a.out);
  write_run_config(a.out, "scan-debug", hover::config::to_json(tc.episode));

  std::ofstream grid = open_out(a.out / "scan.csv");
  for (int i = 0; i < hover::lidar::kGridSize; ++i) {
    for (int j = 0; j < hover::lidar::kGridSize; ++j) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", frame.ranges(i, j));
      grid << (j ? "," : "") << buf;
    }
    grid << '\n';
  }
  grid << '\n';
  for (int i = 0; i < hover::lidar::kGridSize; ++i) {
    for (int j = 0; j < hover::lidar::kGridSize; ++j) grid << (j ? "," : "") << int(frame.hit(i, j));
    grid << '\n';
  }

  std::ofstream beams = open_out(a.out / "beams.csv");
  beams << "row,col,range_m,hit,dir_x,dir_y,dir_z\n";
  for (int i = 0; i < hover::lidar::kGridSize; ++i) {
    for (int j = 0; j < hover::lidar::kGridSize; ++j) {
      const auto d = hover::lidar::beam_direction(i, j, tc.episode.sensor);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%d,%.17g,%.17g,%.17g\n", i, j, frame.ranges(i, j),
                    int(frame.hit(i, j)), d.x(), d.y(), d.z());
      beams << buf;
    }
  }
  const auto& s = environment.initial_state();
  std::printf("position (%.3f, %.3f, %.3f) m, %d/64 beams hit, wrote %s\n", s.r.x(), s.r.y(),
              s.r.z(), frame.hit_count(), (a.out / "scan.csv").c_str());
  return 0;
}

// --- simulate -------------------------------------------------------------

struct SimArgs {
  ConfigArgs cfg;
  std::string checkpoint;
  std::string policy = "null";
  std::uint64_t seed = 1;
  bool stochastic = false;
  fs::path out = "sim";
};

int run_simulate(const SimArgs& a) {
  const auto tc = a.cfg.resolve();
  auto controller = make_controller(a.checkpoint, a.policy, tc.episode.scaling, a.stochastic);
  hover::env::Environment environment(tc.episode);
  const auto rows = hover::eval::simulate_episode(environment, *controller, a.seed);
  fs::create_directories(a.out);
  Json run;
  run["seed"] = a.seed;
  run["checkpoint"] = a.checkpoint.empty() ? Json(nullptr) : Json(a.checkpoint);
  run["policy"] = a.checkpoint.empty() ? a.policy : "checkpoint";
  run["stochastic"] = a.stochastic;
  write_run_config(a.out, "simulate", {{"episode", hover::config::to_json(tc.episode)}, {"run", run}});
  std::ofstream out = open_out(a.out / "trajectory.csv");
  hover::eval::write_trajectory_csv(out, rows);
  const auto& last = rows.back();
  std::printf("%zu rows, final position error %.3f m, fuel %.4f kg, wrote %s\n", rows.size(),
              last.position_error.norm(), environment.initial_state().mass - last.state.mass,
              (a.out / "trajectory.csv").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asteroid hovering: generation, training, evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", HOVER_VERSION);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-asteroid", "write a synthetic or peanut-shaped asteroid mesh");
  gen_cmd->add_option("--seed", gen.seed, "random seed");
  gen_cmd->add_option("--level", gen.level, "icosphere subdivision level (0-5)");
  gen_cmd->add_option("--shape", gen.shape, "synthetic or peanut")->check(CLI::IsMember({"synthetic", "peanut"}));
  gen_cmd->add_flag("--uniform-axes", gen.uniform_axes, "same half-axis in every direction");
  gen_cmd->add_option("--out", gen.out, "output directory");
  gen.cfg.add_to(gen_cmd);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "optimize the policy");
  tr.cfg.add_to(train_cmd);
  train_cmd->add_option("--seed", tr.seed, "random seed")->each([&](const std::string&) { tr.seed_set = true; });
  train_cmd->add_option("--batches", tr.batches, "number of batches");
  train_cmd->add_option("--episodes", tr.episodes, "episodes per batch");
  train_cmd->add_option("--workers", tr.workers, "rollout threads")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", tr.out, "run directory");
  train_cmd->add_flag("--resume", tr.resume, "continue from <out>/checkpoint.bin");
  train_cmd->add_flag("--quiet", tr.quiet, "no per-batch progress lines");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Monte-Carlo evaluation over scenario presets");
  ev.cfg.add_to(eval_cmd);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "trained checkpoint");
  eval_cmd->add_option("--policy", ev.policy, "scripted policy when no checkpoint is given (null)");
  eval_cmd->add_option("--scenario", ev.scenarios, "scenario preset name (repeatable)");
  eval_cmd->add_flag("--all", ev.all, "every preset");
  eval_cmd->add_option("--episodes", ev.episodes, "episodes per scenario")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--seed", ev.seed, "random seed");
  eval_cmd->add_option("--workers", ev.workers, "episode threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", ev.out, "output directory");
  eval_cmd->add_option("--asset", ev.assets, "shape model file, NAME=PATH (rq36, itokawa)");
  eval_cmd->add_option("--asset-scale", ev.asset_scales, "file-unit to meter factor, NAME=FACTOR");
  eval_cmd->add_flag("--stochastic", ev.stochastic, "sample actions instead of taking the mode");

  ScanArgs sc;
  auto* scan_cmd = app.add_subcommand("scan-debug", "dump the initial LIDAR frame of an episode");
  sc.cfg.add_to(scan_cmd);
  scan_cmd->add_option("--seed", sc.seed, "episode seed");
  scan_cmd->add_option("--mesh", sc.mesh, "shape model file instead of a synthetic asteroid");
  scan_cmd->add_option("--mesh-scale", sc.mesh_scale, "file-unit to meter factor");
  scan_cmd->add_option("--out", sc.out, "output directory");

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run one episode and dump its trajectory");
  sim.cfg.add_to(sim_cmd);
  sim_cmd->add_option("--checkpoint", sim.checkpoint, "trained checkpoint");
  sim_cmd->add_option("--policy", sim.policy, "scripted policy when no checkpoint is given (null)");
  sim_cmd->add_option("--seed", sim.seed, "episode seed");
  sim_cmd->add_flag("--stochastic", sim.stochastic, "sample actions instead of taking the mode");
  sim_cmd->add_option("--out", sim.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*scan_cmd) return run_scan(sc);
    if (*sim_cmd) return run_simulate(sim);
  } catch (const hover::ConfigError& e) {
    std::fprintf(stderr, "hover: error: config: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hover: error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
