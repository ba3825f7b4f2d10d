#include <doctest.h>

#include <cmath>

#include "harbench/error.hpp"
#include "harbench/io.hpp"
#include "harbench/random.hpp"
#include "harbench/train.hpp"
#include "support.hpp"

using namespace harbench;

namespace {

const LoadOptions kStub{.mode = WeightsMode::Stub, .weights_dir = {}, .registry = nullptr};

// Two gaussian blobs in 4-d.
FeatureSet blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  FeatureSet s;
  s.features = Matrix(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = i % 2;
    s.labels.push_back(y);
    for (std::size_t c = 0; c < 4; ++c) s.features(i, c) = (y ? 1.5 : -1.5) + rng.uniform(-1, 1);
  }
  return s;
}

}  // namespace

TEST_CASE("train config defaults") {
  const TrainConfig c;
  CHECK(c.learning_rate == 1e-4);
  CHECK(c.batch_size == 8);
  CHECK(c.epochs == 20);
  CHECK(c.adam.beta1 == 0.9);
  CHECK(c.adam.beta2 == 0.999);
  CHECK(c.adam.epsilon == 1e-7);
  CHECK_FALSE(c.keep_best_val);
  TrainConfig bad;
  bad.learning_rate = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("first Adam step moves each parameter by about lr against its gradient") {
  HeadParameters head = init_head(2, 2, 1);
  const auto start = head;
  HeadGradient g;
  g.weights = Matrix(2, 2);
  g.weights.values = {0.5, -2.0, 1e-3, 0.0};
  g.bias = {-0.1, 4.0};
  AdamOptimizer adam(2, 2, 0.01, {});
  adam.step(head, g);
  CHECK(adam.steps() == 1);
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 4; ++i) {
    const double gi = g.weights.values[i];
    CHECK(head.weights.values[i] == doctest::Approx(start.weights.values[i] - 0.01 * gi / (std::abs(gi) + 1e-7)));
  }
  CHECK(head.bias[0] == doctest::Approx(0.01));
  CHECK(head.bias[1] == doctest::Approx(-0.01));
}

TEST_CASE("head training fits separable features and is deterministic") {
  const auto train_set = blobs(64, 1);
  const auto val_set = blobs(16, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 10;
  HeadParameters a = init_head(4, 2, 3), b = a;
  int calls = 0;
  const auto h = train_head(a, train_set, &val_set, cfg, [&](const EpochRecord&) { ++calls; });
  CHECK(calls == 10);
  REQUIRE(h.epochs.size() == 10);
  CHECK(h.epochs.back().train_loss < h.epochs.front().train_loss);
  CHECK(h.epochs.back().train_accuracy >= 0.95);
  REQUIRE(h.epochs.back().val_accuracy);
  CHECK(*h.epochs.back().val_accuracy >= 0.9);
  train_head(b, train_set, &val_set, cfg);
  CHECK(a == b);

  HeadParameters c = init_head(4, 2, 3);
  train_head(c, train_set, nullptr, cfg);
  CHECK(c == a);
}

TEST_CASE("training errors") {
  HeadParameters head = init_head(4, 2, 3);
  FeatureSet empty;
  empty.features = Matrix(0, 4);
  CHECK_THROWS_AS(train_head(head, empty, nullptr, {}), Error);

  auto bad = blobs(16, 1);
  bad.features(9, 2) = INFINITY;
  try {
    train_head(head, bad, nullptr, {});
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TrainingDiverged);
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("history json round trip") {
  TrainHistory h;
  h.epochs.push_back({1, 0.75, 0.5, 0.8, 0.4, 0.01});
  h.epochs.push_back({2, 0.1 + 0.2, 1.0, std::nullopt, std::nullopt, 0.02});
  const auto back = history_from_json(history_to_json(h));
  REQUIRE(back.epochs.size() == 2);
  CHECK(back.epochs[1].train_loss == 0.1 + 0.2);
  CHECK(back.epochs[0].val_accuracy == 0.4);
  CHECK_FALSE(back.epochs[1].val_loss.has_value());
  CHECK(history_to_json(back) == history_to_json(h));
  CHECK(history_to_json(h).find("wall_time") == std::string::npos);
  CHECK(history_from_json(history_to_json(h, true)).epochs[1].wall_time == 0.02);
}

TEST_CASE("checkpoint round trip and integrity") {
  testing::TempDir dir("ckpt");
  auto model = build_model("xception", {"a", "b", "c"}, {.seed = 4, .backbone = kStub});
  model.head().bias = {0.1, -0.2, 1.0 / 3.0};
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto ck = make_checkpoint(model, cfg);
  CHECK(ck.backbone_kind == "stub");
  CHECK(parse_checkpoint(serialize_checkpoint(ck)) == ck);
  save_checkpoint(ck, dir / "c.json");
  CHECK(load_checkpoint(dir / "c.json") == ck);

  const auto restored = restore_model(ck);
  CHECK(restored.head() == model.head());
  CHECK(restored.classes() == model.classes());
  CHECK(restored.backbone().weights_checksum() == model.backbone().weights_checksum());

  auto wrong = ck;
  wrong.backbone_checksum = "stub-0000";
  CHECK_THROWS_AS(restore_model(wrong), Error);

  auto text = serialize_checkpoint(ck);
  const auto pos = text.find(ck.head.checksum());
  REQUIRE(pos != std::string::npos);
  text[pos] = text[pos] == '0' ? '1' : '0';
  CHECK_THROWS_AS(parse_checkpoint(text), Error);
  CHECK_THROWS_AS(parse_checkpoint("{}"), Error);
}

TEST_CASE("feature extraction does not depend on thread count") {
  testing::TempDir dir("feat");
  testing::make_image_corpus(dir / "corpus", {6, 6});
  const auto m = build_manifest(dir / "corpus", dir / "out", {}).manifest;
  const auto model = build_model("resnet50", m.classes, {.seed = 1, .backbone = kStub});
  FrameSource src;
  src.base_dir = dir / "out";
  src.classes = m.classes;
  src.normalization = model.backbone().spec().normalization;
  std::vector<const FrameRecord*> all;
  for (const auto& f : m.frames) all.push_back(&f);
  const auto one = compute_features(model, all, src, 3, 1);
  const auto four = compute_features(model, all, src, 3, 4);
  CHECK(one.features == four.features);
  CHECK(one.labels == four.labels);
  CHECK(one.features.rows == 12);
}

TEST_CASE("train on a manifest writes a checkpoint and leaves the backbone alone") {
  testing::TempDir dir("trainrun");
  testing::make_image_corpus(dir / "corpus", {8, 8});
  const auto m = build_manifest(dir / "corpus", dir / "out", {}).manifest;
  auto model = build_model("vgg16", m.classes, {.seed = 2, .backbone = kStub});
  const auto before = model.backbone().parameter_checksum();
  TrainConfig cfg;
  cfg.epochs = 2;
  TrainOptions opts;
  opts.manifest_dir = dir / "out";
  opts.checkpoint_path = dir / "run/checkpoint.json";
  const auto result = train(std::move(model), m, cfg, opts);
  CHECK(result.history.epochs.size() == 2);
  CHECK(result.model.backbone().parameter_checksum() == before);
  CHECK(std::filesystem::exists(dir / "run/checkpoint.json"));
  CHECK(load_checkpoint(dir / "run/checkpoint.json").head == result.model.head());
}
