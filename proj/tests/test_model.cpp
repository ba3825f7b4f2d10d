#include <doctest.h>

#include <cmath>

#include "harbench/error.hpp"
#include "harbench/model.hpp"
#include "harbench/random.hpp"

using namespace harbench;

namespace {

const LoadOptions kStub{.mode = WeightsMode::Stub, .weights_dir = {}, .registry = nullptr};

std::vector<std::string> classes(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back("k" + std::to_string(i));
  return out;
}

double loss_at(const HeadParameters& head, const Matrix& x, std::span<const std::size_t> y) {
  const Matrix p = head_probabilities(head, x);
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) total -= std::log(std::max(p(i, y[i]), kProbabilityClip));
  return total / static_cast<double>(x.rows);
}

}  // namespace

TEST_CASE("global average pool") {
  // 2x2x2 map, channel 0 = 1,2,3,4 and channel 1 = 10,20,30,40.
  const std::vector<float> map{1, 10, 2, 20, 3, 30, 4, 40};
  const auto pooled = global_average_pool(map, 2, 2, 2);
  REQUIRE(pooled.size() == 2);
  CHECK(pooled[0] == doctest::Approx(2.5));
  CHECK(pooled[1] == doctest::Approx(25.0));
  CHECK_THROWS_AS(global_average_pool(map, 2, 3, 2), Error);
}

TEST_CASE("softmax") {
  const std::vector<double> z{0.0, std::log(2.0)};
  const auto p = softmax(z);
  CHECK(p[0] == doctest::Approx(1.0 / 3.0));
  CHECK(p[1] == doctest::Approx(2.0 / 3.0));

  const auto big = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
  CHECK(big[0] == doctest::Approx(0.5));
  CHECK(big[2] == 0.0);

  const auto shifted = softmax(std::vector<double>{3.0, 4.0, 5.0});
  const auto base = softmax(std::vector<double>{0.0, 1.0, 2.0});
  for (int i = 0; i < 3; ++i) CHECK(shifted[i] == doctest::Approx(base[i]));

  try {
    softmax(std::vector<double>{1.0, NAN});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NumericError);
  }
}

TEST_CASE("categorical cross-entropy") {
  CHECK(categorical_crossentropy(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}) == 0.0);
  CHECK(categorical_crossentropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}, std::vector<double>{0, 0, 1, 0}) ==
        doctest::Approx(std::log(4.0)));
  CHECK(categorical_crossentropy(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) ==
        doctest::Approx(-std::log(1e-7)));
  CHECK_THROWS_AS(categorical_crossentropy(std::vector<double>{0.5, 0.6}, std::vector<double>{1, 0}), Error);
  CHECK_THROWS_AS(categorical_crossentropy(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 1}), Error);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
  CHECK(argmax(std::vector<double>{0.5, 0.5}) == 0);
}

TEST_CASE("glorot uniform head init") {
  const auto h = init_head(2048, 7, 42);
  const double limit = std::sqrt(6.0 / (2048 + 7));
  double lo = 1, hi = -1;
  for (double w : h.weights.values) {
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  CHECK(lo >= -limit);
  CHECK(hi <= limit);
  CHECK(hi - lo > 1.9 * limit);
  for (double b : h.bias) CHECK(b == 0.0);
  CHECK(h == init_head(2048, 7, 42));
  CHECK_FALSE(h == init_head(2048, 7, 43));
  CHECK(h.count() == 14343);
}

TEST_CASE("trainable parameters are C*K + K") {
  CHECK(build_model("xception", classes(7), {.seed = 1, .backbone = kStub}).trainable_parameter_count() == 14343);
  CHECK(build_model("vgg16", classes(7), {.seed = 1, .backbone = kStub}).trainable_parameter_count() == 3591);
  CHECK(build_model("resnet50", classes(3), {.seed = 1, .backbone = kStub}).trainable_parameter_count() == 2048 * 3 + 3);
  CHECK_THROWS_AS(build_model("xception", classes(1), {.seed = 1, .backbone = kStub}), Error);
}

TEST_CASE("head gradient matches central differences") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(6), c = 4, k = 3;
    HeadParameters head = init_head(c, k, trial);
    for (auto& b : head.bias) b = rng.uniform(-0.5, 0.5);
    Matrix x(n, c);
    for (auto& v : x.values) v = rng.uniform(-2, 2);
    std::vector<std::size_t> y(n);
    for (auto& v : y) v = rng.below(k);

    const auto g = head_loss_and_gradient(head, x, y);
    CHECK(g.loss == doctest::Approx(loss_at(head, x, y)));
    const double h = 1e-5;
    for (std::size_t i = 0; i < head.weights.values.size(); ++i) {
      auto plus = head, minus = head;
      plus.weights.values[i] += h;
      minus.weights.values[i] -= h;
      const double fd = (loss_at(plus, x, y) - loss_at(minus, x, y)) / (2 * h);
      CHECK(g.weights.values[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (std::size_t j = 0; j < k; ++j) {
      auto plus = head, minus = head;
      plus.bias[j] += h;
      minus.bias[j] -= h;
      CHECK(g.bias[j] == doctest::Approx((loss_at(plus, x, y) - loss_at(minus, x, y)) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("predictions come from pooled backbone features") {
  const auto model = build_model("xception", classes(3), {.seed = 5, .backbone = kStub});
  BatchTensor b;
  b.n = 2;
  b.height = b.width = 160;
  b.values.assign(2 * b.image_size(), 0.25f);
  const auto feats = model.pooled_features(b);
  CHECK(feats.rows == 2);
  CHECK(feats.cols == 2048);
  const auto probs = model.predict_proba(b);
  CHECK(probs == head_probabilities(model.head(), feats));
  for (std::size_t i = 0; i < 2; ++i) {
    double s = 0;
    for (double p : probs.row(i)) s += p;
    CHECK(s == doctest::Approx(1.0));
  }
  CHECK(model.predict(b).size() == 2);
}
