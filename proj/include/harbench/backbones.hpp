#pragma once

// Frozen pretrained feature extractors behind one interface.
//
// Pretrained weights are ONNX graphs of the canonical ImageNet networks with
// their classification heads removed (see tools/export_backbones.py), looked
// up as `<weights_dir>/<id>.onnx`. The stub extractor has the same interface
// and output geometry with fixed pseudo-random weights, so everything except
// the pretrained numerics can run offline.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harbench/preprocess.hpp"

namespace harbench {

enum class Padding { Same, Valid };

/// One spatial reduction step of an architecture (convolution or pooling).
struct DownsampleStage {
  int kernel = 1;
  int stride = 1;
  Padding padding = Padding::Same;
};

struct BackboneSpec {
  std::string id;
  std::string display_name;
  int feature_channels = 0;
  int min_input = 1;
  Normalization normalization;
  std::string weight_source;
  std::int64_t approx_params = 0;
  // Every shape-changing stage from input to the last convolutional output.
  std::vector<DownsampleStage> stages;

  /// Side length of the final feature map for a square input of `input_side`.
  int output_side(int input_side) const;
};

class BackboneRegistry {
public:
  /// Registry preloaded with vgg16, resnet50, inceptionv3 and xception.
  static BackboneRegistry& global();
  static BackboneRegistry with_defaults();

  BackboneRegistry() = default;
  BackboneRegistry(const BackboneRegistry& other);
  BackboneRegistry& operator=(const BackboneRegistry&) = delete;

  /// Throws Error{UnknownBackbone} listing the registered ids.
  BackboneSpec get(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::vector<std::string> ids() const;
  /// Adds or replaces a spec; throws Error{InvalidArgument} on an invalid spec.
  void add(BackboneSpec spec);

private:
  mutable std::mutex mutex_;
  std::vector<BackboneSpec> specs_;
};

/// n x height x width x channels feature maps.
struct FeatureMaps {
  std::size_t n = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> values;

  std::size_t map_size() const noexcept { return static_cast<std::size_t>(height) * width * channels; }
  std::span<const float> map(std::size_t i) const { return {values.data() + i * map_size(), map_size()}; }
};

class FeatureExtractor {
public:
  explicit FeatureExtractor(BackboneSpec spec) : spec_(std::move(spec)) {}
  virtual ~FeatureExtractor() = default;

  FeatureExtractor(const FeatureExtractor&) = delete;
  FeatureExtractor& operator=(const FeatureExtractor&) = delete;

  const BackboneSpec& spec() const noexcept { return spec_; }
  /// Always true: nothing in this library updates backbone parameters.
  bool frozen() const noexcept { return true; }
  /// "stub" or "pretrained".
  virtual std::string_view kind() const noexcept = 0;
  /// Checksum of the weight artifact recorded at load time.
  virtual std::string weights_checksum() const = 0;
  /// Recomputed from the live parameter tensors on every call.
  virtual std::string parameter_checksum() const = 0;
  virtual std::size_t parameter_count() const = 0;

  /// Validates the batch geometry (Error{InputShapeError}) and runs inference.
  FeatureMaps extract(const BatchTensor& batch) const;

protected:
  virtual FeatureMaps run(const BatchTensor& batch) const = 0;

private:
  BackboneSpec spec_;
};

enum class WeightsMode { Pretrained, Stub };

struct LoadOptions {
  WeightsMode mode = WeightsMode::Pretrained;
  // Empty: $HARBENCH_WEIGHTS_DIR, else ~/.cache/harbench/weights.
  std::filesystem::path weights_dir;
  const BackboneRegistry* registry = nullptr;  // null: global registry
};

std::filesystem::path default_weights_dir();
std::filesystem::path weights_path(const std::filesystem::path& weights_dir, std::string_view id);

/// Throws Error{UnknownBackbone} or, for pretrained mode without a cached
/// graph, Error{WeightsUnavailable} with instructions for populating the cache.
std::shared_ptr<const FeatureExtractor> load_backbone(std::string_view id, const LoadOptions& options = {});

inline FeatureMaps extract_features(const FeatureExtractor& extractor, const BatchTensor& batch) {
  return extractor.extract(batch);
}

}  // namespace harbench
