#include "harbench/config.hpp"

#include <cstdlib>

#include <json.hpp>

#include "harbench/error.hpp"
#include "harbench/io.hpp"

using nlohmann::json;

namespace harbench {

namespace {

unsigned parse_threads(const std::string& text) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used == text.size() && v > 0 && v <= 1024) return static_cast<unsigned>(v);
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::InvalidArgument, "HARBENCH_THREADS must be a positive integer, got '" + text + "'");
}

WeightsMode parse_weights_mode(const std::string& s) {
  if (s == "pretrained") return WeightsMode::Pretrained;
  if (s == "stub") return WeightsMode::Stub;
  throw Error(ErrorKind::FormatError, "weights must be 'pretrained' or 'stub', got '" + s + "'");
}

}  // namespace

Environment process_environment() {
  Environment env;
  for (const char* key : {"HARBENCH_WEIGHTS_DIR", "HARBENCH_THREADS"}) {
    if (const char* v = std::getenv(key); v && *v) env[key] = v;
  }
  return env;
}

void apply_config_json(RunConfig& config, std::string_view text) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::FormatError, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") config.train.learning_rate = value.get<double>();
      else if (key == "batch_size") config.train.batch_size = value.get<std::size_t>();
      else if (key == "epochs") config.train.epochs = value.get<int>();
      else if (key == "seed") config.train.seed = value.get<std::uint64_t>();
      else if (key == "keep_best_val") config.train.keep_best_val = value.get<bool>();
      else if (key == "adam") {
        for (const auto& [k, v] : value.items()) {
          if (k == "beta1") config.train.adam.beta1 = v.get<double>();
          else if (k == "beta2") config.train.adam.beta2 = v.get<double>();
          else if (k == "epsilon") config.train.adam.epsilon = v.get<double>();
          else throw Error(ErrorKind::FormatError, "unknown adam key '" + k + "'");
        }
      } else if (key == "weights") config.weights_mode = parse_weights_mode(value.get<std::string>());
      else if (key == "weights_dir") config.weights_dir = value.get<std::string>();
      else if (key == "threads") config.threads = value.get<unsigned>();
      else throw Error(ErrorKind::FormatError, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("malformed config: ") + e.what());
  }
}

RunConfig resolve_run_config(const std::optional<std::filesystem::path>& config_file, const Environment& env,
                             const RunOverrides& o) {
  RunConfig c;
  if (config_file) apply_config_json(c, read_text_file(*config_file));
  if (auto it = env.find("HARBENCH_WEIGHTS_DIR"); it != env.end()) c.weights_dir = it->second;
  if (auto it = env.find("HARBENCH_THREADS"); it != env.end()) c.threads = parse_threads(it->second);
  if (o.learning_rate) c.train.learning_rate = *o.learning_rate;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.seed) c.train.seed = *o.seed;
  if (o.keep_best_val) c.train.keep_best_val = *o.keep_best_val;
  if (o.weights_mode) c.weights_mode = *o.weights_mode;
  if (o.weights_dir) c.weights_dir = *o.weights_dir;
  if (o.threads) c.threads = *o.threads;
  if (c.threads == 0) throw Error(ErrorKind::InvalidArgument, "threads must be positive");
  c.train.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  const json j{{"learning_rate", c.train.learning_rate},
               {"batch_size", c.train.batch_size},
               {"epochs", c.train.epochs},
               {"seed", c.train.seed},
               {"keep_best_val", c.train.keep_best_val},
               {"adam", {{"beta1", c.train.adam.beta1}, {"beta2", c.train.adam.beta2}, {"epsilon", c.train.adam.epsilon}}},
               {"weights", c.weights_mode == WeightsMode::Stub ? "stub" : "pretrained"},
               {"weights_dir", c.weights_dir.empty() ? default_weights_dir().string() : c.weights_dir.string()},
               {"threads", c.threads}};
  return j.dump(2) + "\n";
}

}  // namespace harbench
