#pragma once

// Global-average-pool + softmax classification head over a frozen backbone.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harbench/backbones.hpp"

namespace harbench {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

inline constexpr double kProbabilityClip = 1e-7;

/// out[c] = mean over the h x w positions of channel c. Throws Error{ShapeError}
/// when the map is empty or its size disagrees with the dimensions.
std::vector<double> global_average_pool(std::span<const float> featmap, int height, int width, int channels);
/// Row i of the result pools map i of the batch.
Matrix global_average_pool(const FeatureMaps& maps);

/// Max-subtracted softmax; throws Error{NumericError} for non-finite logits.
std::vector<double> softmax(std::span<const double> logits);

/// -log(max(p[true], kProbabilityClip)). Throws Error{NumericError} unless
/// `probs` is a distribution (entries in [0,1], sum 1 within 1e-6) and
/// `onehot` has a single unit entry.
double categorical_crossentropy(std::span<const double> probs, std::span<const double> onehot);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

/// Parameters of the trainable dense layer: logits = features . weights + bias.
struct HeadParameters {
  Matrix weights;            // feature_channels x K
  std::vector<double> bias;  // K

  std::size_t count() const noexcept { return weights.values.size() + bias.size(); }
  std::string checksum() const;
  bool operator==(const HeadParameters&) const = default;
};

Matrix head_logits(const HeadParameters& head, const Matrix& features);
/// Row-wise softmax of head_logits.
Matrix head_probabilities(const HeadParameters& head, const Matrix& features);

struct HeadGradient {
  Matrix weights;
  std::vector<double> bias;
  double loss = 0.0;      // mean cross-entropy over the batch
  std::size_t correct = 0;
};

/// Mean categorical cross-entropy of the batch and its analytic gradient,
/// (p - y) x^T / n for the weights and mean(p - y) for the bias.
HeadGradient head_loss_and_gradient(const HeadParameters& head, const Matrix& features,
                                    std::span<const std::size_t> labels);

class ClassifierModel {
public:
  ClassifierModel(std::shared_ptr<const FeatureExtractor> backbone, std::vector<std::string> classes,
                  HeadParameters head);

  const FeatureExtractor& backbone() const noexcept { return *backbone_; }
  std::shared_ptr<const FeatureExtractor> backbone_ptr() const noexcept { return backbone_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  std::size_t num_classes() const noexcept { return classes_.size(); }
  const HeadParameters& head() const noexcept { return head_; }
  HeadParameters& head() noexcept { return head_; }

  /// feature_channels * K + K; the backbone contributes nothing.
  std::size_t trainable_parameter_count() const noexcept { return head_.count(); }

  /// Pooled backbone features for normalized frames, one row per frame.
  Matrix pooled_features(const BatchTensor& batch) const;
  /// n x K softmax rows.
  Matrix predict_proba(const BatchTensor& batch) const;
  std::vector<std::size_t> predict(const BatchTensor& batch) const;

private:
  std::shared_ptr<const FeatureExtractor> backbone_;
  std::vector<std::string> classes_;
  HeadParameters head_;
};

struct ModelOptions {
  std::uint64_t seed = 42;
  LoadOptions backbone;
};

/// Glorot-uniform head weights (limit sqrt(6 / (fan_in + fan_out))), zero bias.
HeadParameters init_head(std::size_t feature_channels, std::size_t num_classes, std::uint64_t seed);

/// Loads the backbone and attaches a fresh head. Needs at least two classes.
ClassifierModel build_model(std::string_view backbone_id, std::vector<std::string> classes,
                            const ModelOptions& options = {});
ClassifierModel build_model(std::shared_ptr<const FeatureExtractor> backbone, std::vector<std::string> classes,
                            std::uint64_t seed);

}  // namespace harbench
