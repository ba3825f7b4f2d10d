#include "harbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "harbench/checksum.hpp"
#include "harbench/error.hpp"
#include "harbench/random.hpp"

namespace harbench {

std::vector<double> global_average_pool(std::span<const float> featmap, int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1) throw Error(ErrorKind::ShapeError, "feature map must be non-empty");
  const std::size_t positions = static_cast<std::size_t>(height) * width;
  if (featmap.size() != positions * channels) throw Error(ErrorKind::ShapeError, "feature map size mismatch");
  std::vector<double> out(static_cast<std::size_t>(channels), 0.0);
  for (std::size_t p = 0; p < positions; ++p) {
    const float* px = featmap.data() + p * channels;
    for (int c = 0; c < channels; ++c) out[c] += px[c];
  }
  for (double& v : out) v /= static_cast<double>(positions);
  return out;
}

Matrix global_average_pool(const FeatureMaps& maps) {
  Matrix out(maps.n, static_cast<std::size_t>(maps.channels));
  for (std::size_t i = 0; i < maps.n; ++i) {
    const auto pooled = global_average_pool(maps.map(i), maps.height, maps.width, maps.channels);
    std::copy(pooled.begin(), pooled.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(ErrorKind::NumericError, "softmax of an empty vector");
  for (double z : logits) {
    if (!std::isfinite(z)) throw Error(ErrorKind::NumericError, "softmax input is not finite");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

double categorical_crossentropy(std::span<const double> probs, std::span<const double> onehot) {
  if (probs.size() != onehot.size() || probs.empty()) {
    throw Error(ErrorKind::NumericError, "probability and label vectors differ in length");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw Error(ErrorKind::NumericError, "probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorKind::NumericError, "probabilities do not sum to 1");
  std::size_t units = 0;
  std::size_t truth = 0;
  for (std::size_t i = 0; i < onehot.size(); ++i) {
    if (onehot[i] == 1.0) {
      ++units;
      truth = i;
    } else if (onehot[i] != 0.0) {
      throw Error(ErrorKind::NumericError, "label vector is not one-hot");
    }
  }
  if (units != 1) throw Error(ErrorKind::NumericError, "label vector is not one-hot");
  return -std::log(std::max(probs[truth], kProbabilityClip));
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::string HeadParameters::checksum() const {
  Sha256 h;
  h.update_values(std::span<const double>(weights.values));
  h.update_values(std::span<const double>(bias));
  return h.hex();
}

Matrix head_logits(const HeadParameters& head, const Matrix& features) {
  if (features.cols != head.weights.rows) {
    std::ostringstream msg;
    msg << "features have " << features.cols << " channels, head expects " << head.weights.rows;
    throw Error(ErrorKind::InputShapeError, msg.str());
  }
  const std::size_t k = head.weights.cols;
  Matrix logits(features.rows, k);
  for (std::size_t i = 0; i < features.rows; ++i) {
    auto out = logits.row(i);
    std::copy(head.bias.begin(), head.bias.end(), out.begin());
    const auto x = features.row(i);
    for (std::size_t c = 0; c < features.cols; ++c) {
      const double xc = x[c];
      const double* w = head.weights.values.data() + c * k;
      for (std::size_t j = 0; j < k; ++j) out[j] += xc * w[j];
    }
  }
  return logits;
}

Matrix head_probabilities(const HeadParameters& head, const Matrix& features) {
  Matrix probs = head_logits(head, features);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto p = softmax(probs.row(i));
    std::copy(p.begin(), p.end(), probs.row(i).begin());
  }
  return probs;
}

HeadGradient head_loss_and_gradient(const HeadParameters& head, const Matrix& features,
                                    std::span<const std::size_t> labels) {
  if (labels.size() != features.rows || features.rows == 0) {
    throw Error(ErrorKind::ShapeError, "label count must match a non-empty feature batch");
  }
  const std::size_t k = head.weights.cols;
  const Matrix probs = head_probabilities(head, features);
  const double inv_n = 1.0 / static_cast<double>(features.rows);

  HeadGradient g;
  g.weights = Matrix(head.weights.rows, k);
  g.bias.assign(k, 0.0);
  std::vector<double> delta(k);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto p = probs.row(i);
    const std::size_t y = labels[i];
    if (y >= k) throw Error(ErrorKind::LabelError, "label index out of range");
    g.loss -= std::log(std::max(p[y], kProbabilityClip));
    if (argmax(p) == y) ++g.correct;
    for (std::size_t j = 0; j < k; ++j) delta[j] = (p[j] - (j == y ? 1.0 : 0.0)) * inv_n;
    const auto x = features.row(i);
    for (std::size_t c = 0; c < features.cols; ++c) {
      double* gw = g.weights.values.data() + c * k;
      for (std::size_t j = 0; j < k; ++j) gw[j] += x[c] * delta[j];
    }
    for (std::size_t j = 0; j < k; ++j) g.bias[j] += delta[j];
  }
  g.loss *= inv_n;
  return g;
}

ClassifierModel::ClassifierModel(std::shared_ptr<const FeatureExtractor> backbone, std::vector<std::string> classes,
                                 HeadParameters head)
    : backbone_(std::move(backbone)), classes_(std::move(classes)), head_(std::move(head)) {
  if (!backbone_) throw Error(ErrorKind::InvalidArgument, "model needs a backbone");
  if (classes_.size() < 2) throw Error(ErrorKind::InvalidArgument, "model needs at least two classes");
  if (head_.weights.rows != static_cast<std::size_t>(backbone_->spec().feature_channels) ||
      head_.weights.cols != classes_.size() || head_.bias.size() != classes_.size()) {
    throw Error(ErrorKind::ShapeError, "head shape does not match backbone depth and class count");
  }
}

Matrix ClassifierModel::pooled_features(const BatchTensor& batch) const {
  return global_average_pool(backbone_->extract(batch));
}

Matrix ClassifierModel::predict_proba(const BatchTensor& batch) const {
  return head_probabilities(head_, pooled_features(batch));
}

std::vector<std::size_t> ClassifierModel::predict(const BatchTensor& batch) const {
  const Matrix probs = predict_proba(batch);
  std::vector<std::size_t> out(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) out[i] = argmax(probs.row(i));
  return out;
}

HeadParameters init_head(std::size_t feature_channels, std::size_t num_classes, std::uint64_t seed) {
  HeadParameters head;
  head.weights = Matrix(feature_channels, num_classes);
  head.bias.assign(num_classes, 0.0);
  const double limit = std::sqrt(6.0 / static_cast<double>(feature_channels + num_classes));
  Rng rng(mix_seed(seed, 0x68656164 /* "head" */));
  for (double& w : head.weights.values) w = rng.uniform(-limit, limit);
  return head;
}

ClassifierModel build_model(std::shared_ptr<const FeatureExtractor> backbone, std::vector<std::string> classes,
                            std::uint64_t seed) {
  if (!backbone) throw Error(ErrorKind::InvalidArgument, "model needs a backbone");
  if (classes.size() < 2) throw Error(ErrorKind::InvalidArgument, "model needs at least two classes");
  auto head = init_head(static_cast<std::size_t>(backbone->spec().feature_channels), classes.size(), seed);
  return ClassifierModel(std::move(backbone), std::move(classes), std::move(head));
}

ClassifierModel build_model(std::string_view backbone_id, std::vector<std::string> classes,
                            const ModelOptions& options) {
  if (classes.size() < 2) throw Error(ErrorKind::InvalidArgument, "model needs at least two classes");
  return build_model(load_backbone(backbone_id, options.backbone), std::move(classes), options.seed);
}

}  // namespace harbench
