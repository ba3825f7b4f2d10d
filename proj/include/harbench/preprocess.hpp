#pragma once

// Frame images -> backbone-ready float tensors.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harbench/dataset.hpp"

namespace harbench {

inline constexpr int kFrameSize = 160;

/// Height x width x channel, RGB unless a normalization reordered channels.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> values;

  float& at(int y, int x, int c) { return values[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return values[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

  bool operator==(const ImageTensor&) const = default;
};

/// Per-channel affine input transform published with a backbone's weights:
/// out[k] = in[source(k)] * scale[k] + offset[k], where source(k) = 2 - k when
/// `reverse_channels` (RGB -> BGR) and k otherwise.
struct Normalization {
  std::array<float, 3> scale{1.0f, 1.0f, 1.0f};
  std::array<float, 3> offset{0.0f, 0.0f, 0.0f};
  bool reverse_channels = false;

  ImageTensor apply(const ImageTensor& raw) const;
  ImageTensor invert(const ImageTensor& normalized) const;
  /// Image of [0, 255] under this transform, per output channel.
  std::array<float, 3> range_low() const;
  std::array<float, 3> range_high() const;

  bool operator==(const Normalization&) const = default;
};

/// Symmetric unit range, x / 127.5 - 1.
Normalization symmetric_unit_normalization();
/// RGB -> BGR followed by ImageNet mean subtraction, no scaling.
Normalization imagenet_mean_bgr_normalization();

/// Decodes `path`, converts to RGB (grey is replicated) and bilinearly resizes
/// to height x width. An image already at the target size is not resampled.
/// Throws Error{FrameLoadError} naming the path.
ImageTensor load_and_resize(const std::filesystem::path& path, int height = kFrameSize, int width = kFrameSize);

/// Looks up the backbone in the registry; throws Error{UnknownBackbone}.
ImageTensor normalize_for_backbone(const ImageTensor& raw, std::string_view backbone_id);

struct BatchTensor {
  std::size_t n = 0;
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> values;  // n x height x width x channels
  std::size_t num_classes = 0;
  std::vector<float> onehot;  // n x num_classes, empty when unlabelled

  std::size_t image_size() const noexcept { return static_cast<std::size_t>(height) * width * channels; }
  std::span<const float> image(std::size_t i) const { return {values.data() + i * image_size(), image_size()}; }
  std::size_t label(std::size_t i) const;

  static BatchTensor stack(std::span<const ImageTensor> images);
};

/// Index partition of [0, count) into consecutive batches; shuffled first when
/// a seed is given. The last batch may be short.
std::vector<std::vector<std::size_t>> plan_batches(std::size_t count, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed = std::nullopt);

/// Where frames live and how to turn them into tensors.
struct FrameSource {
  std::filesystem::path base_dir;     // manifest directory
  std::vector<std::string> classes;   // one-hot order
  Normalization normalization;
  int height = kFrameSize;
  int width = kFrameSize;
};

ImageTensor load_frame(const FrameRecord& frame, const FrameSource& source);

/// Loads, normalizes and stacks frames into labelled batches. Training callers
/// pass a per-epoch seed; val/test callers pass none to keep manifest order.
/// Throws Error{EmptySplit} for an empty frame list.
std::vector<BatchTensor> make_batches(std::span<const FrameRecord* const> frames, const FrameSource& source,
                                      std::size_t batch_size,
                                      std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace harbench
