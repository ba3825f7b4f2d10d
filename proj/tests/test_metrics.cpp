#include <doctest.h>

#include <cmath>
#include <limits>

#include "harbench/error.hpp"
#include "harbench/io.hpp"
#include "harbench/metrics.hpp"
#include "harbench/random.hpp"
#include "support.hpp"

using namespace harbench;

namespace {

// P(score_pos > score_neg) + 0.5 P(tie), by counting every pair.
double pair_counting_auc(std::span<const std::uint8_t> pos, std::span<const double> s) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("two-class worked example") {
  // truth a,a,b,b predicted a,b,b,b -> [[1,1],[0,2]]
  const std::vector<std::string> t{"a", "a", "b", "b"}, p{"a", "b", "b", "b"};
  const auto m = confusion_matrix(t, p, {"a", "b"});
  CHECK(m.counts == std::vector<std::int64_t>{1, 1, 0, 2});
  CHECK(accuracy(m) == 0.75);
  const auto a = precision_recall_f1(m, 0);
  CHECK(a.precision == 1.0);
  CHECK(a.recall == 0.5);
  CHECK(a.f1 == doctest::Approx(2.0 / 3.0));
  const auto r = macro_report(m);
  CHECK(r.precision == doctest::Approx(5.0 / 6.0));
  CHECK(r.recall == doctest::Approx(0.75));
  const auto w = classification_report(m, Averaging::Weighted);
  CHECK(w.recall == doctest::Approx(0.75));
}

TEST_CASE("perfect predictions and degenerate classes") {
  const std::vector<std::size_t> y{0, 1, 2, 1};
  const auto m = confusion_matrix(y, y, {"x", "y", "z"});
  CHECK(accuracy(m) == 1.0);
  const auto r = macro_report(m);
  CHECK(r.precision == 1.0);
  CHECK(r.f1 == 1.0);

  const std::vector<std::size_t> t{0, 0}, p{0, 0};
  const auto d = confusion_matrix(t, p, {"x", "y"});
  const auto c = precision_recall_f1(d, 1);
  CHECK(c.degenerate);
  CHECK(c.precision == 0.0);
  CHECK(c.recall == 0.0);
  CHECK(c.f1 == 0.0);
  CHECK_FALSE(precision_recall_f1(d, 0).degenerate);
}

TEST_CASE("metric errors") {
  const std::vector<std::size_t> a{0, 1}, b{0};
  CHECK_THROWS_AS(confusion_matrix(a, b, {"x", "y"}), Error);
  const std::vector<std::size_t> c{0, 5};
  CHECK_THROWS_AS(confusion_matrix(a, c, {"x", "y"}), Error);
  const std::vector<std::string> s{"x", "q"};
  CHECK_THROWS_AS(confusion_matrix(s, s, {"x", "y"}), Error);
  try {
    accuracy(confusion_matrix(std::span<const std::size_t>{}, std::span<const std::size_t>{}, {"x", "y"}));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedMetric);
  }
  CHECK(parse_averaging("weighted") == Averaging::Weighted);
  CHECK_THROWS_AS(parse_averaging("micro"), Error);
}

TEST_CASE("confusion matrix cells add up") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = rng.below(50), k = 2 + rng.below(6);
    std::vector<std::size_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng.below(k);
      p[i] = rng.below(k);
    }
    std::vector<std::string> names(k, "");
    for (std::size_t i = 0; i < k; ++i) names[i] = std::to_string(i);
    const auto m = confusion_matrix(t, p, names);
    CHECK(m.total() == static_cast<std::int64_t>(n));
    for (std::size_t c = 0; c < k; ++c) CHECK(m.tp(c) + m.fp(c) + m.fn(c) + m.tn(c) == m.total());
  }
}

TEST_CASE("roc examples") {
  const std::vector<std::uint8_t> pos{1, 1, 0, 0};
  const auto perfect = roc_curve(pos, std::vector<double>{0.9, 0.8, 0.2, 0.1}, "a");
  CHECK(perfect.auc == 1.0);
  CHECK(std::isinf(perfect.thresholds.front()));
  CHECK(perfect.points.front().fpr == 0.0);
  CHECK(perfect.points.back().fpr == 1.0);
  CHECK(perfect.points.back().tpr == 1.0);

  CHECK(roc_curve(pos, std::vector<double>{0.1, 0.2, 0.8, 0.9}, "a").auc == 0.0);
  const auto flat = roc_curve(pos, std::vector<double>{0.5, 0.5, 0.5, 0.5}, "a");
  CHECK(flat.auc == 0.5);
  CHECK(flat.points.size() == 2);

  const auto mixed = roc_curve(std::vector<std::uint8_t>{1, 0, 1, 0}, std::vector<double>{0.9, 0.8, 0.7, 0.1}, "a");
  CHECK(mixed.auc == doctest::Approx(0.75));
  for (std::size_t i = 1; i < mixed.points.size(); ++i) {
    CHECK(mixed.points[i].fpr >= mixed.points[i - 1].fpr);
    CHECK(mixed.points[i].tpr >= mixed.points[i - 1].tpr);
    CHECK(mixed.thresholds[i] < mixed.thresholds[i - 1]);
  }
}

TEST_CASE("roc errors") {
  try {
    roc_curve(std::vector<std::uint8_t>{1, 1}, std::vector<double>{0.2, 0.4}, "only");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateRoc);
  }
  CHECK_THROWS_AS(roc_curve(std::vector<std::uint8_t>{1, 0}, std::vector<double>{NAN, 0.4}, "a"), Error);
  CHECK_THROWS_AS(roc_curve(std::vector<std::uint8_t>{1, 0}, std::vector<double>{0.4}, "a"), Error);
}

TEST_CASE("auc equals the pair-counting statistic, ties included") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<std::uint8_t> pos(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = rng.below(2) ? 1 : 0;
      s[i] = static_cast<double>(rng.below(8)) / 8.0;
    }
    pos[0] = 1;
    pos[1] = 0;
    CHECK(roc_curve(pos, s, "c").auc == doctest::Approx(pair_counting_auc(pos, s)).epsilon(1e-12));
  }
}

TEST_CASE("evaluation files round trip") {
  testing::TempDir dir("evalfiles");
  Matrix probs(5, 3);
  probs.values = {0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4, 0.6, 0.3, 0.1, 0.2, 0.2, 0.6};
  auto ev = evaluate_probabilities({"sit", "stand", "walk"}, {0, 1, 2, 1, 2}, probs, Averaging::Macro);
  ev.backbone_id = "xception";
  CHECK(ev.y_pred == std::vector<std::size_t>{0, 1, 2, 0, 2});
  CHECK(ev.report.accuracy == doctest::Approx(0.8));
  REQUIRE(ev.roc.size() == 3);
  for (const auto& r : ev.roc) CHECK(r.curve.has_value());

  write_evaluation(ev, dir.path());
  CHECK(confusion_from_csv(read_text_file(dir / "confusion.csv")) == ev.confusion);
  const auto roc = roc_from_csv(read_text_file(roc_csv_path(dir.path(), "stand")), "stand");
  CHECK(roc.points == ev.roc[1].curve->points);
  CHECK(roc.thresholds == ev.roc[1].curve->thresholds);
  CHECK(roc.auc == ev.roc[1].curve->auc);
  CHECK(read_text_file(dir / "report.json") == report_to_json(ev));
  CHECK(std::filesystem::exists(dir / "predictions.csv"));
}

TEST_CASE("a class absent from the split gets a roc diagnostic instead of a curve") {
  Matrix probs(2, 3);
  probs.values = {0.7, 0.2, 0.1, 0.1, 0.8, 0.1};
  const auto ev = evaluate_probabilities({"a", "b", "c"}, {0, 1}, probs, Averaging::Macro);
  CHECK(ev.roc[0].curve.has_value());
  CHECK_FALSE(ev.roc[2].curve.has_value());
  CHECK_FALSE(ev.roc[2].diagnostic.empty());
  CHECK(report_to_json(ev).find("\"auc\": null") != std::string::npos);
}
