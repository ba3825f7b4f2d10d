#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "harbench/checksum.hpp"
#include "harbench/error.hpp"
#include "harbench/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace harbench {

static_assert(std::endian::native == std::endian::little, "checkpoint tensors are stored little-endian");

namespace {

constexpr const char* kFormat = "harbench-checkpoint/1";
constexpr const char* kInitScheme = "glorot-uniform(limit=sqrt(6/(fan_in+fan_out))), bias=0";

json tensor_to_json(std::span<const double> values, std::vector<std::size_t> shape) {
  return json{{"dtype", "float64-le"}, {"shape", std::move(shape)}, {"data", base64_encode(std::as_bytes(values))}};
}

std::vector<double> tensor_from_json(const json& j, std::size_t expected) {
  if (j.at("dtype").get<std::string>() != "float64-le") throw Error(ErrorKind::FormatError, "unsupported tensor dtype");
  const auto bytes = base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != expected * sizeof(double)) throw Error(ErrorKind::FormatError, "tensor payload size mismatch");
  std::vector<double> out(expected);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

json config_to_json(const TrainConfig& c) {
  return json{{"optimizer", "adam"},
              {"loss", "categorical_crossentropy"},
              {"learning_rate", c.learning_rate},
              {"beta1", c.adam.beta1},
              {"beta2", c.adam.beta2},
              {"epsilon", c.adam.epsilon},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"keep_best_val", c.keep_best_val}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.epsilon = j.at("epsilon").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.keep_best_val = j.at("keep_best_val").get<bool>();
  return c;
}

}  // namespace

Checkpoint make_checkpoint(const ClassifierModel& model, const TrainConfig& config) {
  Checkpoint c;
  c.backbone_id = model.backbone().spec().id;
  c.backbone_kind = std::string(model.backbone().kind());
  c.backbone_checksum = model.backbone().weights_checksum();
  c.classes = model.classes();
  c.head = model.head();
  c.config = config;
  c.init_scheme = kInitScheme;
  return c;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  json j{{"format", kFormat},
         {"backbone", {{"id", c.backbone_id}, {"kind", c.backbone_kind}, {"checksum", c.backbone_checksum}}},
         {"classes", c.classes},
         {"head",
          {{"weights", tensor_to_json(c.head.weights.values, {c.head.weights.rows, c.head.weights.cols})},
           {"bias", tensor_to_json(c.head.bias, {c.head.bias.size()})},
           {"checksum", c.head.checksum()},
           {"init", c.init_scheme}}},
         {"train_config", config_to_json(c.config)}};
  return j.dump(2) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw Error(ErrorKind::FormatError, "not a harbench checkpoint");
    Checkpoint c;
    c.backbone_id = j.at("backbone").at("id").get<std::string>();
    c.backbone_kind = j.at("backbone").at("kind").get<std::string>();
    c.backbone_checksum = j.at("backbone").at("checksum").get<std::string>();
    c.classes = j.at("classes").get<std::vector<std::string>>();
    const auto& head = j.at("head");
    const auto shape = head.at("weights").at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[1] != c.classes.size()) throw Error(ErrorKind::FormatError, "head shape mismatch");
    c.head.weights.rows = shape[0];
    c.head.weights.cols = shape[1];
    c.head.weights.values = tensor_from_json(head.at("weights"), shape[0] * shape[1]);
    c.head.bias = tensor_from_json(head.at("bias"), c.classes.size());
    if (head.at("checksum").get<std::string>() != c.head.checksum()) {
      throw Error(ErrorKind::FormatError, "head checksum mismatch");
    }
    c.init_scheme = head.at("init").get<std::string>();
    c.config = config_from_json(j.at("train_config"));
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write checkpoint " + path.string());
  out << serialize_checkpoint(checkpoint);
  if (!out) throw Error(ErrorKind::IoError, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

ClassifierModel restore_model(const Checkpoint& checkpoint, LoadOptions backbone_options) {
  backbone_options.mode = checkpoint.backbone_kind == "stub" ? WeightsMode::Stub : WeightsMode::Pretrained;
  auto backbone = load_backbone(checkpoint.backbone_id, backbone_options);
  if (backbone->weights_checksum() != checkpoint.backbone_checksum) {
    throw Error(ErrorKind::WeightsUnavailable, "backbone " + checkpoint.backbone_id +
                                                   " weights differ from the checkpoint (checksum " +
                                                   backbone->weights_checksum() + " vs " +
                                                   checkpoint.backbone_checksum + ")");
  }
  return ClassifierModel(std::move(backbone), checkpoint.classes, checkpoint.head);
}

}  // namespace harbench
