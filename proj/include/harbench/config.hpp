#pragma once

// Run configuration resolved from defaults, a JSON file, the environment and
// command-line overrides, in increasing order of precedence.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "harbench/backbones.hpp"
#include "harbench/train.hpp"

namespace harbench {

struct RunConfig {
  TrainConfig train;
  WeightsMode weights_mode = WeightsMode::Pretrained;
  std::filesystem::path weights_dir;  // empty: default_weights_dir()
  unsigned threads = 1;
};

/// Optional fields set from the command line.
struct RunOverrides {
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<bool> keep_best_val;
  std::optional<WeightsMode> weights_mode;
  std::optional<std::filesystem::path> weights_dir;
  std::optional<unsigned> threads;
};

using Environment = std::map<std::string, std::string>;

/// HARBENCH_WEIGHTS_DIR and HARBENCH_THREADS from the process environment.
Environment process_environment();

/// Keys: learning_rate, batch_size, epochs, seed, keep_best_val, adam
/// {beta1, beta2, epsilon}, weights ("pretrained"|"stub"), weights_dir,
/// threads. Unknown keys are rejected. Throws Error{FormatError}.
void apply_config_json(RunConfig& config, std::string_view text);

/// Throws Error{InvalidArgument} for invalid resolved values.
RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file, const Environment& env,
                             const RunOverrides& overrides);

std::string run_config_to_json(const RunConfig& config);

}  // namespace harbench
