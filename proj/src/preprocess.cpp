#include "harbench/preprocess.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "harbench/backbones.hpp"
#include "harbench/error.hpp"
#include "harbench/random.hpp"

namespace harbench {

namespace {

int source_channel(const Normalization& n, int k) { return n.reverse_channels ? 2 - k : k; }

}  // namespace

ImageTensor Normalization::apply(const ImageTensor& raw) const {
  if (raw.channels != 3) throw Error(ErrorKind::InputShapeError, "normalization expects 3 channels");
  ImageTensor out = raw;
  const std::size_t pixels = static_cast<std::size_t>(raw.height) * raw.width;
  for (std::size_t p = 0; p < pixels; ++p) {
    const float* in = raw.values.data() + p * 3;
    float* dst = out.values.data() + p * 3;
    for (int k = 0; k < 3; ++k) dst[k] = in[source_channel(*this, k)] * scale[k] + offset[k];
  }
  return out;
}

ImageTensor Normalization::invert(const ImageTensor& normalized) const {
  if (normalized.channels != 3) throw Error(ErrorKind::InputShapeError, "normalization expects 3 channels");
  ImageTensor out = normalized;
  const std::size_t pixels = static_cast<std::size_t>(normalized.height) * normalized.width;
  for (std::size_t p = 0; p < pixels; ++p) {
    const float* in = normalized.values.data() + p * 3;
    float* dst = out.values.data() + p * 3;
    for (int k = 0; k < 3; ++k) dst[source_channel(*this, k)] = (in[k] - offset[k]) / scale[k];
  }
  return out;
}

std::array<float, 3> Normalization::range_low() const {
  std::array<float, 3> lo{};
  for (int k = 0; k < 3; ++k) lo[k] = std::min(offset[k], 255.0f * scale[k] + offset[k]);
  return lo;
}

std::array<float, 3> Normalization::range_high() const {
  std::array<float, 3> hi{};
  for (int k = 0; k < 3; ++k) hi[k] = std::max(offset[k], 255.0f * scale[k] + offset[k]);
  return hi;
}

Normalization symmetric_unit_normalization() {
  Normalization n;
  n.scale = {1.0f / 127.5f, 1.0f / 127.5f, 1.0f / 127.5f};
  n.offset = {-1.0f, -1.0f, -1.0f};
  return n;
}

Normalization imagenet_mean_bgr_normalization() {
  Normalization n;
  n.reverse_channels = true;
  n.offset = {-103.939f, -116.779f, -123.68f};
  return n;
}

ImageTensor load_and_resize(const std::filesystem::path& path, int height, int width) {
  if (height < 1 || width < 1) throw Error(ErrorKind::InvalidArgument, "target size must be positive");
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorKind::FrameLoadError, "cannot load frame " + path.string());
  if (bgr.rows != height || bgr.cols != width) {
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(width, height), 0.0, 0.0, cv::INTER_LINEAR);
    bgr = resized;
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat as_float;
  rgb.convertTo(as_float, CV_32FC3);

  ImageTensor t;
  t.height = height;
  t.width = width;
  t.channels = 3;
  t.values.resize(static_cast<std::size_t>(height) * width * 3);
  for (int y = 0; y < height; ++y) {
    const float* row = as_float.ptr<float>(y);
    std::copy(row, row + static_cast<std::size_t>(width) * 3, t.values.begin() + static_cast<std::ptrdiff_t>(y) * width * 3);
  }
  return t;
}

ImageTensor normalize_for_backbone(const ImageTensor& raw, std::string_view backbone_id) {
  return BackboneRegistry::global().get(backbone_id).normalization.apply(raw);
}

std::size_t BatchTensor::label(std::size_t i) const {
  if (onehot.empty()) throw Error(ErrorKind::LabelError, "batch carries no labels");
  const float* row = onehot.data() + i * num_classes;
  return static_cast<std::size_t>(std::max_element(row, row + num_classes) - row);
}

BatchTensor BatchTensor::stack(std::span<const ImageTensor> images) {
  BatchTensor b;
  b.n = images.size();
  if (images.empty()) return b;
  b.height = images.front().height;
  b.width = images.front().width;
  b.channels = images.front().channels;
  b.values.reserve(b.n * b.image_size());
  for (const auto& img : images) {
    if (img.height != b.height || img.width != b.width || img.channels != b.channels) {
      throw Error(ErrorKind::InputShapeError, "cannot stack images of different shapes");
    }
    b.values.insert(b.values.end(), img.values.begin(), img.values.end());
  }
  return b;
}

std::vector<std::vector<std::size_t>> plan_batches(std::size_t count, std::size_t batch_size,
                                                   std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (shuffle_seed) Rng(*shuffle_seed).shuffle(std::span(order));

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

ImageTensor load_frame(const FrameRecord& frame, const FrameSource& source) {
  return source.normalization.apply(load_and_resize(source.base_dir / frame.path, source.height, source.width));
}

std::vector<BatchTensor> make_batches(std::span<const FrameRecord* const> frames, const FrameSource& source,
                                      std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed) {
  if (frames.empty()) throw Error(ErrorKind::EmptySplit, "no frames to batch");
  const auto plan = plan_batches(frames.size(), batch_size, shuffle_seed);
  const std::size_t k = source.classes.size();

  std::vector<BatchTensor> out;
  out.reserve(plan.size());
  for (const auto& indices : plan) {
    std::vector<ImageTensor> images;
    images.reserve(indices.size());
    for (std::size_t i : indices) images.push_back(load_frame(*frames[i], source));
    BatchTensor batch = BatchTensor::stack(images);
    batch.num_classes = k;
    batch.onehot.assign(indices.size() * k, 0.0f);
    for (std::size_t row = 0; row < indices.size(); ++row) {
      const auto& label = frames[indices[row]]->label;
      auto it = std::find(source.classes.begin(), source.classes.end(), label);
      if (it == source.classes.end()) throw Error(ErrorKind::LabelError, "frame label '" + label + "' not in class set");
      batch.onehot[row * k + static_cast<std::size_t>(it - source.classes.begin())] = 1.0f;
    }
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace harbench
