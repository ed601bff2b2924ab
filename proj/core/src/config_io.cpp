#include "hover/config_io.hpp"

#include <fstream>
#include <sstream>

namespace hover::config {

namespace {

Json range_json(const Range& r, double scale = 1.0) { return Json::array({r.min / scale, r.max / scale}); }

Range range_from(const Json& j, double scale = 1.0) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError("expected a [min, max] pair, got " + j.dump());
  }
  return {j[0].get<double>() * scale, j[1].get<double>() * scale};
}

// Reject any key in `given` that `reference` does not have.
void check_keys(const Json& given, const Json& reference, const std::string& where) {
  if (!given.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (reference[key].is_object()) check_keys(value, reference[key], path);
  }
}

// Recursive overlay; unlike RFC 7386 a null value is kept as null.
void overlay(Json& target, const Json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && target[key].is_object()) {
      overlay(target[key], value);
    } else {
      target[key] = value;
    }
  }
}

Json layered(const Json& base, const Json& patch) {
  check_keys(patch, base, "");
  Json merged = base;
  overlay(merged, patch);
  return merged;
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

Range get_range(const Json& j, const char* key, double scale = 1.0) {
  try {
    return range_from(j.at(key), scale);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

env::EpisodeConfig decode_episode(const Json& j) {
  env::EpisodeConfig c;
  c.duration = get<double>(j, "duration");
  c.control_period = get<double>(j, "control_period");
  c.integration_step = get<double>(j, "integration_step");
  c.com_variation = get<double>(j, "com_variation");
  c.max_initial_condition_attempts = get<int>(j, "max_initial_condition_attempts");
  const Json& mp = j.at("mesh_path");
  if (mp.is_null()) {
    c.mesh_path.reset();
  } else if (mp.is_string()) {
    c.mesh_path = mp.get<std::string>();
  } else {
    throw ConfigError("config key 'mesh_path': expected a string or null");
  }
  c.mesh_scale = get<double>(j, "mesh_scale");

  const Json& ic = j.at("initial");
  c.initial.altitude = get_range(ic, "altitude");
  c.initial.polar = get_range(ic, "polar_deg", kDegToRad);
  c.initial.azimuth = get_range(ic, "azimuth_deg", kDegToRad);
  c.initial.velocity = get_range(ic, "velocity");
  c.initial.attitude_error = get_range(ic, "attitude_error_deg", kDegToRad);
  c.initial.omega = get_range(ic, "omega");
  c.initial.wet_mass = get_range(ic, "wet_mass");
  c.initial.rotation_phase = get_range(ic, "rotation_phase_deg", kDegToRad);

  const Json& f = j.at("failure");
  c.failure.probability = get<double>(f, "probability");
  c.failure.scale = get<double>(f, "scale");

  const Json& a = j.at("asteroid");
  c.asteroid.subdivision_level = get<int>(a, "subdivision_level");
  c.asteroid.perturbation = get_range(a, "perturbation");
  c.asteroid.half_axis = get_range(a, "half_axis");
  c.asteroid.uniform_axes = get<bool>(a, "uniform_axes");

  const Json& ad = j.at("asteroid_dynamics");
  c.asteroid_dynamics.mass = get_range(ad, "mass");
  c.asteroid_dynamics.spin_rate = get_range(ad, "spin_rate");
  c.asteroid_dynamics.nutation = get_range(ad, "nutation_deg", kDegToRad);
  c.asteroid_dynamics.srp_accel = get_range(ad, "srp_accel");

  const Json& s = j.at("sensor");
  c.sensor.field_of_view = get<double>(s, "field_of_view_deg") * kDegToRad;
  c.sensor.max_range = get<double>(s, "max_range");
  c.sensor.noise_bias = get_range(s, "noise_bias");
  c.sensor.noise_sigma = get<double>(s, "noise_sigma");

  const Json& d = j.at("dynamics");
  c.dynamics.specific_impulse = get<double>(d, "specific_impulse");
  c.dynamics.g_ref = get<double>(d, "g_ref");
  c.dynamics.dry_mass = get<double>(d, "dry_mass");
  c.dynamics.cube_side = get<double>(d, "cube_side");

  const Json& r = j.at("reward");
  c.reward.position_weight = get<double>(r, "position_weight");
  c.reward.attitude_weight = get<double>(r, "attitude_weight");
  c.reward.control_weight = get<double>(r, "control_weight");
  c.reward.progress_bonus = get<double>(r, "progress_bonus");
  c.reward.terminal_bonus = get<double>(r, "terminal_bonus");
  c.reward.violation_penalty = get<double>(r, "violation_penalty");
  c.reward.terminal_position = get<double>(r, "terminal_position");
  c.reward.terminal_speed = get<double>(r, "terminal_speed");
  c.reward.terminal_rate = get<double>(r, "terminal_rate");
  c.reward.max_rate = get<double>(r, "max_rate");

  const Json& o = j.at("scaling");
  c.scaling.range_error = get<double>(o, "range_error");
  c.scaling.range_delta = get<double>(o, "range_delta");
  c.scaling.position = get<double>(o, "position");
  c.scaling.velocity = get<double>(o, "velocity");

  c.validate();
  return c;
}

ppo::PPOConfig decode_ppo(const Json& j) {
  ppo::PPOConfig c;
  c.discount = get<double>(j, "discount");
  c.clip_epsilon = get<double>(j, "clip_epsilon");
  c.kl_target = get<double>(j, "kl_target");
  c.kl_stop_factor = get<double>(j, "kl_stop_factor");
  c.clip_min = get<double>(j, "clip_min");
  c.clip_max = get<double>(j, "clip_max");
  c.epochs = get<int>(j, "epochs");
  c.minibatch_episodes = get<int>(j, "minibatch_episodes");
  c.entropy_coef = get<double>(j, "entropy_coef");
  c.policy_learning_rate = get<double>(j, "policy_learning_rate");
  c.value_learning_rate = get<double>(j, "value_learning_rate");
  c.max_grad_norm = get<double>(j, "max_grad_norm");
  c.normalize_advantages = get<bool>(j, "normalize_advantages");
  c.validate();
  return c;
}

}  // namespace

Json to_json(const env::EpisodeConfig& c) {
  Json j;
  j["duration"] = c.duration;
  j["control_period"] = c.control_period;
  j["integration_step"] = c.integration_step;
  j["initial"] = {
      {"altitude", range_json(c.initial.altitude)},
      {"polar_deg", range_json(c.initial.polar, kDegToRad)},
      {"azimuth_deg", range_json(c.initial.azimuth, kDegToRad)},
      {"velocity", range_json(c.initial.velocity)},
      {"attitude_error_deg", range_json(c.initial.attitude_error, kDegToRad)},
      {"omega", range_json(c.initial.omega)},
      {"wet_mass", range_json(c.initial.wet_mass)},
      {"rotation_phase_deg", range_json(c.initial.rotation_phase, kDegToRad)},
  };
  j["failure"] = {{"probability", c.failure.probability}, {"scale", c.failure.scale}};
  j["com_variation"] = c.com_variation;
  j["asteroid"] = {
      {"subdivision_level", c.asteroid.subdivision_level},
      {"perturbation", range_json(c.asteroid.perturbation)},
      {"half_axis", range_json(c.asteroid.half_axis)},
      {"uniform_axes", c.asteroid.uniform_axes},
  };
  j["asteroid_dynamics"] = {
      {"mass", range_json(c.asteroid_dynamics.mass)},
      {"spin_rate", range_json(c.asteroid_dynamics.spin_rate)},
      {"nutation_deg", range_json(c.asteroid_dynamics.nutation, kDegToRad)},
      {"srp_accel", range_json(c.asteroid_dynamics.srp_accel)},
  };
  j["sensor"] = {
      {"field_of_view_deg", c.sensor.field_of_view / kDegToRad},
      {"max_range", c.sensor.max_range},
      {"noise_bias", range_json(c.sensor.noise_bias)},
      {"noise_sigma", c.sensor.noise_sigma},
  };
  j["dynamics"] = {
      {"specific_impulse", c.dynamics.specific_impulse},
      {"g_ref", c.dynamics.g_ref},
      {"dry_mass", c.dynamics.dry_mass},
      {"cube_side", c.dynamics.cube_side},
  };
  j["reward"] = {
      {"position_weight", c.reward.position_weight},
      {"attitude_weight", c.reward.attitude_weight},
      {"control_weight", c.reward.control_weight},
      {"progress_bonus", c.reward.progress_bonus},
      {"terminal_bonus", c.reward.terminal_bonus},
      {"violation_penalty", c.reward.violation_penalty},
      {"terminal_position", c.reward.terminal_position},
      {"terminal_speed", c.reward.terminal_speed},
      {"terminal_rate", c.reward.terminal_rate},
      {"max_rate", c.reward.max_rate},
  };
  j["scaling"] = {
      {"range_error", c.scaling.range_error},
      {"range_delta", c.scaling.range_delta},
      {"position", c.scaling.position},
      {"velocity", c.scaling.velocity},
  };
  j["mesh_path"] = c.mesh_path ? Json(c.mesh_path->string()) : Json(nullptr);
  j["mesh_scale"] = c.mesh_scale;
  j["max_initial_condition_attempts"] = c.max_initial_condition_attempts;
  return j;
}

Json to_json(const ppo::PPOConfig& c) {
  return {
      {"discount", c.discount},
      {"clip_epsilon", c.clip_epsilon},
      {"kl_target", c.kl_target},
      {"kl_stop_factor", c.kl_stop_factor},
      {"clip_min", c.clip_min},
      {"clip_max", c.clip_max},
      {"epochs", c.epochs},
      {"minibatch_episodes", c.minibatch_episodes},
      {"entropy_coef", c.entropy_coef},
      {"policy_learning_rate", c.policy_learning_rate},
      {"value_learning_rate", c.value_learning_rate},
      {"max_grad_norm", c.max_grad_norm},
      {"normalize_advantages", c.normalize_advantages},
  };
}

Json to_json(const ppo::TrainConfig& c) {
  Json j;
  j["training"] = {
      {"batches", c.batches},
      {"episodes_per_batch", c.episodes_per_batch},
      {"seed", c.seed},
      {"workers", c.workers},
      {"checkpoint_every", c.checkpoint_every},
  };
  j["ppo"] = to_json(c.ppo);
  j["episode"] = to_json(c.episode);
  return j;
}

env::EpisodeConfig episode_from_json(const Json& j, const env::EpisodeConfig& base) {
  return decode_episode(layered(to_json(base), j));
}

ppo::PPOConfig ppo_from_json(const Json& j, const ppo::PPOConfig& base) {
  return decode_ppo(layered(to_json(base), j));
}

ppo::TrainConfig train_from_json(const Json& j, const ppo::TrainConfig& base) {
  const Json m = layered(to_json(base), j);
  ppo::TrainConfig c;
  const Json& t = m.at("training");
  c.batches = get<int>(t, "batches");
  c.episodes_per_batch = get<int>(t, "episodes_per_batch");
  c.seed = get<std::uint64_t>(t, "seed");
  c.workers = get<int>(t, "workers");
  c.checkpoint_every = get<int>(t, "checkpoint_every");
  c.ppo = decode_ppo(m.at("ppo"));
  c.episode = decode_episode(m.at("episode"));
  c.validate();
  return c;
}

void apply_overrides(Json& j, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + a + "' is not of the form key=value");
    }
    const std::string key = a.substr(0, eq);
    const std::string text = a.substr(eq + 1);
    std::string pointer;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
      if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
      pointer += "/" + part;
    }
    const Json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    if (j.at(ptr).is_object()) throw ConfigError("override key '" + key + "' names a section");
    j[ptr] = value;
  }
}

ppo::TrainConfig named_train_config(const std::string& name) {
  ppo::TrainConfig c;
  if (name == "base") return c;
  if (name == "curriculum") {
    c.episode.duration = 300.0;
    c.episode.initial.altitude = {100.0, 200.0};
    c.episode.asteroid.uniform_axes = true;
    c.episode.asteroid.perturbation = {0.0, 0.0};
    c.episode.asteroid_dynamics.spin_rate = {1.0e-6, 1.0e-4};
    return c;
  }
  throw ConfigError("unknown built-in config '" + name + "'");
}

std::vector<std::string> named_train_configs() { return {"base", "curriculum"}; }

ppo::TrainConfig resolve_train_config(const std::string& spec,
                                      const std::vector<std::string>& overrides) {
  ppo::TrainConfig base;
  Json j;
  bool builtin = false;
  for (const auto& n : named_train_configs()) builtin = builtin || n == spec;
  if (spec.empty()) {
    j = to_json(base);
  } else if (builtin) {
    j = to_json(named_train_config(spec));
  } else {
    j = to_json(train_from_json(read_json_file(spec), base));
  }
  apply_overrides(j, overrides);
  return train_from_json(j, base);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j = Json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw ConfigError("malformed JSON in " + path.string());
  return j;
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace hover::config
