#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "hover/nn/adam.hpp"
#include "hover/nn/layers.hpp"

namespace hover {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training or to rebuild the policy for evaluation.
struct Checkpoint {
  nn::Vector policy_parameters;
  nn::Vector value_parameters;
  nn::AdamState policy_optimizer;
  nn::AdamState value_optimizer;
  double clip_epsilon = 0.2;
  std::int64_t next_batch = 0;
  std::uint64_t seed = 0;
  std::string rng_state;    // textual engine state
  std::string config_json;  // resolved training config, informational
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout: magic, version, payload, FNV-1a checksum. Host byte order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hover
