#include "harbench/backbones.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include <opencv2/dnn.hpp>

#include "harbench/checksum.hpp"
#include "harbench/error.hpp"
#include "harbench/random.hpp"

namespace fs = std::filesystem;

namespace harbench {

int BackboneSpec::output_side(int input_side) const {
  int side = input_side;
  for (const auto& st : stages) {
    if (side <= 0) return 0;
    if (st.padding == Padding::Same) {
      side = (side + st.stride - 1) / st.stride;
    } else {
      side = side < st.kernel ? 0 : (side - st.kernel) / st.stride + 1;
    }
  }
  return side;
}

namespace {

constexpr const char* kExportHint =
    "export the ImageNet weights with tools/export_backbones.py --out <dir> on a machine with network access, "
    "then point HARBENCH_WEIGHTS_DIR at that directory (or use the stub backbone for offline runs)";

std::vector<DownsampleStage> repeat(DownsampleStage st, int times) { return std::vector<DownsampleStage>(times, st); }

std::vector<BackboneSpec> default_specs() {
  std::vector<BackboneSpec> specs;

  // 13 same-padded 3x3 convolutions, five 2x2/2 max pools.
  specs.push_back({"vgg16", "VGG-16", 512, 32, imagenet_mean_bgr_normalization(),
                   "keras.applications.VGG16(weights='imagenet', include_top=False)", 14714688,
                   repeat({2, 2, Padding::Valid}, 5)});

  // 7x7/2 stem, padded 3x3/2 pool, then stride-2 entries of conv3..conv5.
  specs.push_back({"resnet50", "ResNet-50", 2048, 32, imagenet_mean_bgr_normalization(),
                   "keras.applications.ResNet50(weights='imagenet', include_top=False)", 23587712,
                   repeat({1, 2, Padding::Same}, 5)});

  // Valid-padded stem and the two grid-reduction blocks.
  specs.push_back({"inceptionv3", "InceptionV3", 2048, 75, symmetric_unit_normalization(),
                   "keras.applications.InceptionV3(weights='imagenet', include_top=False)", 21802784,
                   {{3, 2, Padding::Valid}, {3, 1, Padding::Valid}, {3, 2, Padding::Valid},
                    {3, 1, Padding::Valid}, {3, 2, Padding::Valid}, {3, 2, Padding::Valid},
                    {3, 2, Padding::Valid}}});

  // Two valid 3x3 stem convolutions, four same-padded stride-2 pools.
  std::vector<DownsampleStage> xception{{3, 2, Padding::Valid}, {3, 1, Padding::Valid}};
  auto pools = repeat({3, 2, Padding::Same}, 4);
  xception.insert(xception.end(), pools.begin(), pools.end());
  specs.push_back({"xception", "Xception", 2048, 71, symmetric_unit_normalization(),
                   "keras.applications.Xception(weights='imagenet', include_top=False)", 20861480,
                   std::move(xception)});
  return specs;
}

void check_spec(const BackboneSpec& spec) {
  if (spec.id.empty()) throw Error(ErrorKind::InvalidArgument, "backbone id must not be empty");
  if (spec.feature_channels <= 0) throw Error(ErrorKind::InvalidArgument, spec.id + ": feature_channels must be > 0");
  if (spec.min_input < 1 || spec.min_input > kFrameSize) {
    throw Error(ErrorKind::InvalidArgument, spec.id + ": min_input must lie in [1, 160]");
  }
  if (spec.output_side(spec.min_input) < 1) {
    throw Error(ErrorKind::InvalidArgument, spec.id + ": stages collapse min_input to an empty map");
  }
}

}  // namespace

BackboneRegistry& BackboneRegistry::global() {
  static BackboneRegistry registry = with_defaults();
  return registry;
}

BackboneRegistry BackboneRegistry::with_defaults() {
  BackboneRegistry r;
  for (auto& spec : default_specs()) r.add(std::move(spec));
  return r;
}

BackboneRegistry::BackboneRegistry(const BackboneRegistry& other) {
  std::lock_guard lock(other.mutex_);
  specs_ = other.specs_;
}

BackboneSpec BackboneRegistry::get(std::string_view id) const {
  std::lock_guard lock(mutex_);
  for (const auto& s : specs_) {
    if (s.id == id) return s;
  }
  std::string known;
  for (const auto& s : specs_) known += (known.empty() ? "" : ", ") + s.id;
  throw Error(ErrorKind::UnknownBackbone, "unknown backbone '" + std::string(id) + "' (registered: " + known + ")");
}

bool BackboneRegistry::contains(std::string_view id) const {
  std::lock_guard lock(mutex_);
  return std::any_of(specs_.begin(), specs_.end(), [&](const BackboneSpec& s) { return s.id == id; });
}

std::vector<std::string> BackboneRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& s : specs_) out.push_back(s.id);
  return out;
}

void BackboneRegistry::add(BackboneSpec spec) {
  check_spec(spec);
  std::lock_guard lock(mutex_);
  auto it = std::find_if(specs_.begin(), specs_.end(), [&](const BackboneSpec& s) { return s.id == spec.id; });
  if (it != specs_.end()) {
    *it = std::move(spec);
  } else {
    specs_.push_back(std::move(spec));
  }
}

FeatureMaps FeatureExtractor::extract(const BatchTensor& batch) const {
  std::ostringstream why;
  if (batch.n == 0) why << "empty batch";
  else if (batch.channels != 3) why << "expected 3 channels, got " << batch.channels;
  else if (batch.height < spec_.min_input || batch.width < spec_.min_input)
    why << spec_.id << " needs inputs of at least " << spec_.min_input << "x" << spec_.min_input << ", got "
        << batch.height << "x" << batch.width;
  else if (batch.values.size() != batch.n * batch.image_size())
    why << "batch holds " << batch.values.size() << " values, expected " << batch.n * batch.image_size();
  const auto reason = why.str();
  if (!reason.empty()) throw Error(ErrorKind::InputShapeError, reason);
  return run(batch);
}

fs::path default_weights_dir() {
  if (const char* env = std::getenv("HARBENCH_WEIGHTS_DIR"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "harbench" / "weights";
  return fs::path(".harbench") / "weights";
}

fs::path weights_path(const fs::path& weights_dir, std::string_view id) {
  return weights_dir / (std::string(id) + ".onnx");
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Adaptive average pooling onto the architecture's output grid, then a fixed
// random projection of per-cell colour statistics (mean and mean square per
// channel) followed by ReLU.
class StubExtractor final : public FeatureExtractor {
public:
  static constexpr int kDescriptors = 6;

  explicit StubExtractor(BackboneSpec spec) : FeatureExtractor(std::move(spec)) {
    const auto c = static_cast<std::size_t>(this->spec().feature_channels);
    Rng rng(mix_seed(fnv1a(this->spec().id), 0));
    weights_.resize(c * kDescriptors);
    for (auto& w : weights_) w = static_cast<float>(rng.uniform(-1.0, 1.0));
    bias_.resize(c);
    for (auto& b : bias_) b = static_cast<float>(rng.uniform(-1.0, 1.0));

    float range = 1.0f;
    const auto lo = this->spec().normalization.range_low();
    const auto hi = this->spec().normalization.range_high();
    for (int k = 0; k < 3; ++k) range = std::max({range, std::abs(lo[k]), std::abs(hi[k])});
    input_scale_ = 1.0f / range;
    load_checksum_ = parameter_checksum();
  }

  std::string_view kind() const noexcept override { return "stub"; }
  std::string weights_checksum() const override { return "stub-" + load_checksum_; }
  std::string parameter_checksum() const override {
    Sha256 h;
    h.update_values(std::span<const float>(weights_));
    h.update_values(std::span<const float>(bias_));
    return h.hex();
  }
  std::size_t parameter_count() const override { return weights_.size() + bias_.size(); }

protected:
  FeatureMaps run(const BatchTensor& batch) const override {
    FeatureMaps out;
    out.n = batch.n;
    out.height = spec().output_side(batch.height);
    out.width = spec().output_side(batch.width);
    out.channels = spec().feature_channels;
    out.values.assign(out.n * out.map_size(), 0.0f);

    for (std::size_t i = 0; i < batch.n; ++i) {
      const auto image = batch.image(i);
      float* dst = out.values.data() + i * out.map_size();
      for (int oy = 0; oy < out.height; ++oy) {
        const int y0 = oy * batch.height / out.height;
        const int y1 = ((oy + 1) * batch.height + out.height - 1) / out.height;
        for (int ox = 0; ox < out.width; ++ox) {
          const int x0 = ox * batch.width / out.width;
          const int x1 = ((ox + 1) * batch.width + out.width - 1) / out.width;
          double desc[kDescriptors] = {};
          for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
              const float* px = image.data() + (static_cast<std::size_t>(y) * batch.width + x) * 3;
              for (int k = 0; k < 3; ++k) {
                const double v = px[k] * input_scale_;
                desc[k] += v;
                desc[3 + k] += v * v;
              }
            }
          }
          const double area = static_cast<double>((y1 - y0) * (x1 - x0));
          for (double& d : desc) d /= area;

          float* cell = dst + (static_cast<std::size_t>(oy) * out.width + ox) * out.channels;
          for (int c = 0; c < out.channels; ++c) {
            const float* w = weights_.data() + static_cast<std::size_t>(c) * kDescriptors;
            double acc = bias_[c];
            for (int j = 0; j < kDescriptors; ++j) acc += w[j] * desc[j];
            cell[c] = static_cast<float>(std::max(0.0, acc));
          }
        }
      }
    }
    return out;
  }

private:
  std::vector<float> weights_;
  std::vector<float> bias_;
  float input_scale_ = 1.0f;
  std::string load_checksum_;
};

// ONNX graph of a headless Keras application: NHWC float input, NHWC (or
// NCHW) feature-map output.
class OnnxExtractor final : public FeatureExtractor {
public:
  OnnxExtractor(BackboneSpec spec, const fs::path& file)
      : FeatureExtractor(std::move(spec)), file_checksum_(sha256_file(file)) {
    try {
      net_ = cv::dnn::readNetFromONNX(file.string());
    } catch (const cv::Exception& e) {
      throw Error(ErrorKind::WeightsUnavailable, "cannot parse " + file.string() + ": " + e.what());
    }
    if (net_.empty()) throw Error(ErrorKind::WeightsUnavailable, "empty network in " + file.string());
    net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
    net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
  }

  std::string_view kind() const noexcept override { return "pretrained"; }
  std::string weights_checksum() const override { return file_checksum_; }

  std::string parameter_checksum() const override {
    std::lock_guard lock(mutex_);
    Sha256 h;
    for (const auto& name : net_.getLayerNames()) {
      auto layer = net_.getLayer(net_.getLayerId(name));
      for (const auto& blob : layer->blobs) {
        cv::Mat dense = blob.isContinuous() ? blob : blob.clone();
        h.update(std::as_bytes(std::span(dense.data, dense.total() * dense.elemSize())));
      }
    }
    return h.hex();
  }

  std::size_t parameter_count() const override {
    std::lock_guard lock(mutex_);
    std::size_t total = 0;
    for (const auto& name : net_.getLayerNames()) {
      for (const auto& blob : net_.getLayer(net_.getLayerId(name))->blobs) total += blob.total();
    }
    return total;
  }

protected:
  FeatureMaps run(const BatchTensor& batch) const override {
    const int shape[] = {static_cast<int>(batch.n), batch.height, batch.width, batch.channels};
    cv::Mat input(4, shape, CV_32F, const_cast<float*>(batch.values.data()));

    cv::Mat output;
    {
      std::lock_guard lock(mutex_);
      net_.setInput(input);
      output = net_.forward().clone();
    }
    if (output.dims != 4 || output.size[0] != static_cast<int>(batch.n)) {
      throw Error(ErrorKind::InputShapeError, spec().id + ": unexpected feature map rank");
    }
    const int c = spec().feature_channels;
    FeatureMaps out;
    out.n = batch.n;
    out.channels = c;
    if (output.size[3] == c) {
      out.height = output.size[1];
      out.width = output.size[2];
      out.values.assign(output.ptr<float>(), output.ptr<float>() + output.total());
    } else if (output.size[1] == c) {
      out.height = output.size[2];
      out.width = output.size[3];
      out.values.resize(output.total());
      const float* src = output.ptr<float>();
      const std::size_t plane = static_cast<std::size_t>(out.height) * out.width;
      for (std::size_t i = 0; i < out.n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
          for (std::size_t p = 0; p < plane; ++p) {
            out.values[(i * plane + p) * c + ch] = src[(i * c + ch) * plane + p];
          }
        }
      }
    } else {
      throw Error(ErrorKind::InputShapeError, spec().id + ": feature map has no axis of depth " + std::to_string(c));
    }
    return out;
  }

private:
  std::string file_checksum_;
  mutable std::mutex mutex_;
  mutable cv::dnn::Net net_;
};

std::mutex& load_mutex_for(const std::string& id) {
  static std::mutex guard;
  static std::map<std::string, std::mutex> per_id;
  std::lock_guard lock(guard);
  return per_id[id];
}

}  // namespace

std::shared_ptr<const FeatureExtractor> load_backbone(std::string_view id, const LoadOptions& options) {
  const BackboneRegistry& registry = options.registry ? *options.registry : BackboneRegistry::global();
  BackboneSpec spec = registry.get(id);
  std::lock_guard lock(load_mutex_for(spec.id));

  if (options.mode == WeightsMode::Stub) return std::make_shared<StubExtractor>(std::move(spec));

  const fs::path dir = options.weights_dir.empty() ? default_weights_dir() : options.weights_dir;
  const fs::path file = weights_path(dir, spec.id);
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) {
    throw Error(ErrorKind::WeightsUnavailable,
                "no cached weights for " + spec.id + " at " + file.string() + "; " + kExportHint);
  }
  return std::make_shared<OnnxExtractor>(std::move(spec), file);
}

}  // namespace harbench
