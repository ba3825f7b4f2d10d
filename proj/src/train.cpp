#include "harbench/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "harbench/error.hpp"
#include "harbench/parallel.hpp"
#include "harbench/random.hpp"

using nlohmann::json;

namespace harbench {

void TrainConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(learning_rate)) throw Error(ErrorKind::InvalidArgument, "learning rate must be > 0");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch size must be >= 1");
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (!positive(adam.epsilon)) throw Error(ErrorKind::InvalidArgument, "Adam epsilon must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "Adam betas must lie in [0, 1)");
  }
}

AdamOptimizer::AdamOptimizer(std::size_t feature_channels, std::size_t num_classes, double learning_rate,
                             AdamSettings settings)
    : lr_(learning_rate),
      s_(settings),
      m_w_(feature_channels * num_classes, 0.0),
      v_w_(feature_channels * num_classes, 0.0),
      m_b_(num_classes, 0.0),
      v_b_(num_classes, 0.0) {}

void AdamOptimizer::step(HeadParameters& head, const HeadGradient& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
  auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = s_.beta1 * m[i] + (1.0 - s_.beta1) * g[i];
      v[i] = s_.beta2 * v[i] + (1.0 - s_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      param[i] -= lr_ * m_hat / (std::sqrt(v_hat) + s_.epsilon);
    }
  };
  update(head.weights.values, grad.weights.values, m_w_, v_w_);
  update(head.bias, grad.bias, m_b_, v_b_);
}

FeatureSet compute_features(const ClassifierModel& model, std::span<const FrameRecord* const> frames,
                            const FrameSource& source, std::size_t batch_size, unsigned threads) {
  FeatureSet set;
  set.features = Matrix(frames.size(), static_cast<std::size_t>(model.backbone().spec().feature_channels));
  set.labels.resize(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto it = std::find(model.classes().begin(), model.classes().end(), frames[i]->label);
    if (it == model.classes().end()) {
      throw Error(ErrorKind::ClassMismatch, "frame label '" + frames[i]->label + "' is not a model class");
    }
    set.labels[i] = static_cast<std::size_t>(it - model.classes().begin());
  }

  const auto chunks = plan_batches(frames.size(), std::max<std::size_t>(1, batch_size));
  parallel_for(chunks.size(), threads, [&](std::size_t b) {
    std::vector<ImageTensor> images;
    images.reserve(chunks[b].size());
    for (std::size_t i : chunks[b]) images.push_back(load_frame(*frames[i], source));
    const Matrix pooled = model.pooled_features(BatchTensor::stack(images));
    for (std::size_t r = 0; r < chunks[b].size(); ++r) {
      auto dst = set.features.row(chunks[b][r]);
      const auto src = pooled.row(r);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  });
  return set;
}

namespace {

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

struct Score {
  double loss = 0.0;
  double accuracy = 0.0;
};

Score score(const HeadParameters& head, const FeatureSet& set) {
  const Matrix probs = head_probabilities(head, set.features);
  Score s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto p = probs.row(i);
    s.loss -= std::log(std::max(p[set.labels[i]], kProbabilityClip));
    if (argmax(p) == set.labels[i]) ++correct;
  }
  s.loss /= static_cast<double>(probs.rows);
  s.accuracy = static_cast<double>(correct) / static_cast<double>(probs.rows);
  return s;
}

}  // namespace

TrainHistory train_head(HeadParameters& head, const FeatureSet& train_set, const FeatureSet* val_set,
                        const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n = train_set.features.rows;
  if (n == 0) throw Error(ErrorKind::EmptySplit, "training split is empty");
  if (train_set.labels.size() != n) throw Error(ErrorKind::ShapeError, "one label per training row required");
  const bool validate = val_set && val_set->features.rows > 0;

  AdamOptimizer adam(head.weights.rows, head.weights.cols, config.learning_rate, config.adam);
  TrainHistory history;
  std::optional<HeadParameters> best;
  double best_accuracy = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto batches = plan_batches(n, config.batch_size, mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& rows = batches[b];
      std::vector<std::size_t> labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = train_set.labels[rows[i]];
      auto diverged = [&] {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << b + 1;
        return Error(ErrorKind::TrainingDiverged, msg.str());
      };
      HeadGradient grad;
      try {
        grad = head_loss_and_gradient(head, gather_rows(train_set.features, rows), labels);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericError) throw diverged();
        throw;
      }
      if (!std::isfinite(grad.loss)) throw diverged();
      loss_sum += grad.loss * static_cast<double>(rows.size());
      correct += grad.correct;
      adam.step(head, grad);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (validate) {
      const Score s = score(head, *val_set);
      rec.val_loss = s.loss;
      rec.val_accuracy = s.accuracy;
      if (config.keep_best_val && s.accuracy > best_accuracy) {
        best_accuracy = s.accuracy;
        best = head;
      }
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (best) head = std::move(*best);
  return history;
}

TrainResult train(ClassifierModel model, const DatasetManifest& manifest, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (model.classes() != manifest.classes) {
    throw Error(ErrorKind::ClassMismatch, "model classes differ from manifest classes");
  }
  const auto train_frames = manifest.frames_in(Split::Train);
  if (train_frames.empty()) throw Error(ErrorKind::EmptySplit, "manifest has no training frames");
  const auto val_frames = manifest.frames_in(Split::Val);

  FrameSource source;
  source.base_dir = options.manifest_dir;
  source.classes = manifest.classes;
  source.normalization = model.backbone().spec().normalization;

  const FeatureSet train_set = compute_features(model, train_frames, source, config.batch_size, options.threads);
  std::optional<FeatureSet> val_set;
  if (!val_frames.empty()) val_set = compute_features(model, val_frames, source, config.batch_size, options.threads);

  TrainHistory history =
      train_head(model.head(), train_set, val_set ? &*val_set : nullptr, config, options.on_epoch);

  if (!options.checkpoint_path.empty()) save_checkpoint(make_checkpoint(model, config), options.checkpoint_path);
  return {std::move(model), std::move(history)};
}

std::string history_to_json(const TrainHistory& history, bool include_timing) {
  json epochs = json::array();
  for (const auto& e : history.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_loss", e.val_loss ? json(*e.val_loss) : json(nullptr)},
                      {"val_accuracy", e.val_accuracy ? json(*e.val_accuracy) : json(nullptr)}});
    if (include_timing) epochs.back()["wall_time"] = e.wall_time;
  }
  return json{{"epochs", std::move(epochs)}}.dump(2) + "\n";
}

TrainHistory history_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    TrainHistory h;
    for (const auto& e : j.at("epochs")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<int>();
      r.train_loss = e.at("train_loss").get<double>();
      r.train_accuracy = e.at("train_accuracy").get<double>();
      if (!e.at("val_loss").is_null()) r.val_loss = e.at("val_loss").get<double>();
      if (!e.at("val_accuracy").is_null()) r.val_accuracy = e.at("val_accuracy").get<double>();
      r.wall_time = e.value("wall_time", 0.0);
      h.epochs.push_back(r);
    }
    return h;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("malformed history: ") + e.what());
  }
}

}  // namespace harbench
