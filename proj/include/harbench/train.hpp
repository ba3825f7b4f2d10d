#pragma once

// Head training with Adam over cached pooled features, plus checkpoints.
//
// The backbone is frozen and runs in inference mode with no augmentation, so
// each frame's pooled feature vector is the same in every epoch; it is
// computed once per frame and reused across epochs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harbench/dataset.hpp"
#include "harbench/model.hpp"

namespace harbench {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  bool operator==(const AdamSettings&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  AdamSettings adam;
  std::size_t batch_size = 8;
  int epochs = 20;
  std::uint64_t seed = 42;
  // Keep the head with the best validation accuracy instead of the last one.
  bool keep_best_val = false;

  /// Throws Error{InvalidArgument} for non-positive hyperparameters.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_accuracy;
  double wall_time = 0.0;  // seconds
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

class AdamOptimizer {
public:
  AdamOptimizer(std::size_t feature_channels, std::size_t num_classes, double learning_rate, AdamSettings settings);

  /// One bias-corrected Adam update of every head parameter.
  void step(HeadParameters& head, const HeadGradient& grad);
  std::int64_t steps() const noexcept { return t_; }

private:
  double lr_;
  AdamSettings s_;
  std::int64_t t_ = 0;
  std::vector<double> m_w_, v_w_, m_b_, v_b_;
};

/// Pooled features with class indices, rows in input order.
struct FeatureSet {
  Matrix features;
  std::vector<std::size_t> labels;
};

/// Pooled backbone features for `frames`, computed in chunks of `batch_size`
/// spread over `threads` workers; results do not depend on the thread count.
FeatureSet compute_features(const ClassifierModel& model, std::span<const FrameRecord* const> frames,
                            const FrameSource& source, std::size_t batch_size, unsigned threads);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on the head alone. Throws Error{EmptySplit} for an empty training set
/// and Error{TrainingDiverged} (with epoch and batch) on a non-finite loss.
TrainHistory train_head(HeadParameters& head, const FeatureSet& train_set, const FeatureSet* val_set,
                        const TrainConfig& config, const EpochCallback& on_epoch = {});

struct TrainOptions {
  std::filesystem::path manifest_dir;  // frame paths are relative to this
  unsigned threads = 1;
  std::filesystem::path checkpoint_path;  // empty: do not persist
  EpochCallback on_epoch;
};

struct TrainResult {
  ClassifierModel model;
  TrainHistory history;
};

/// Trains the head of `model` on the manifest's train split, validating on the
/// val split when it is non-empty.
TrainResult train(ClassifierModel model, const DatasetManifest& manifest, const TrainConfig& config,
                  const TrainOptions& options);

/// Wall times are left out unless asked for, so the same seed gives the same
/// bytes on every run.
std::string history_to_json(const TrainHistory& history, bool include_timing = false);
TrainHistory history_from_json(std::string_view text);

struct Checkpoint {
  std::string backbone_id;
  std::string backbone_kind;       // "stub" or "pretrained"
  std::string backbone_checksum;   // weights checksum recorded at load
  std::vector<std::string> classes;
  HeadParameters head;
  TrainConfig config;
  std::string init_scheme;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(const ClassifierModel& model, const TrainConfig& config);
/// Self-describing JSON; head tensors are base64 little-endian float64.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Reloads the backbone the checkpoint names (stub checkpoints reload the
/// stub) and verifies its checksum. Throws Error{WeightsUnavailable} on a
/// checksum mismatch.
ClassifierModel restore_model(const Checkpoint& checkpoint, LoadOptions backbone_options = {});

}  // namespace harbench
