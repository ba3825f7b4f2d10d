#include "harbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "harbench/error.hpp"

namespace harbench {

std::int64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::trace() const noexcept {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < size(); ++i) t += at(i, i);
  return t;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t i) const {
  std::int64_t s = 0;
  for (std::size_t j = 0; j < size(); ++j) s += at(i, j);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t j) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < size(); ++i) s += at(i, j);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                 std::vector<std::string> classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::ShapeError, "y_true has " + std::to_string(y_true.size()) + " labels, y_pred has " +
                                           std::to_string(y_pred.size()));
  }
  ConfusionMatrix m;
  m.classes = std::move(classes);
  const std::size_t k = m.size();
  m.counts.assign(k * k, 0);
  for (std::size_t t = 0; t < y_true.size(); ++t) {
    if (y_true[t] >= k || y_pred[t] >= k) {
      throw Error(ErrorKind::LabelError, "label index outside the " + std::to_string(k) + "-class set");
    }
    ++m.at(y_true[t], y_pred[t]);
  }
  return m;
}

ConfusionMatrix confusion_matrix(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                                 std::vector<std::string> classes) {
  auto index_of = [&](const std::string& label) {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw Error(ErrorKind::LabelError, "unknown label '" + label + "'");
    return static_cast<std::size_t>(it - classes.begin());
  };
  if (y_true.size() != y_pred.size()) throw Error(ErrorKind::ShapeError, "y_true and y_pred differ in length");
  std::vector<std::size_t> t(y_true.size()), p(y_pred.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    t[i] = index_of(y_true[i]);
    p[i] = index_of(y_pred[i]);
  }
  return confusion_matrix(t, p, std::move(classes));
}

double accuracy(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) throw Error(ErrorKind::UndefinedMetric, "accuracy of an empty confusion matrix");
  return static_cast<double>(m.trace()) / static_cast<double>(total);
}

ClassMetrics precision_recall_f1(const ConfusionMatrix& m, std::size_t cls) {
  if (cls >= m.size()) throw Error(ErrorKind::LabelError, "class index out of range");
  const auto tp = m.tp(cls);
  const auto fp = m.fp(cls);
  const auto fn = m.fn(cls);
  ClassMetrics out;
  out.support = m.row_sum(cls);
  auto ratio = [&](std::int64_t num, std::int64_t den) {
    if (den == 0) {
      out.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  out.precision = ratio(tp, tp + fp);
  out.recall = ratio(tp, tp + fn);
  out.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return out;
}

std::string_view to_string(Averaging mode) noexcept { return mode == Averaging::Macro ? "macro" : "weighted"; }

Averaging parse_averaging(std::string_view name) {
  if (name == "macro") return Averaging::Macro;
  if (name == "weighted") return Averaging::Weighted;
  throw Error(ErrorKind::InvalidArgument, "unknown averaging mode '" + std::string(name) + "'");
}

ClassificationReport classification_report(const ConfusionMatrix& m, Averaging mode) {
  ClassificationReport r;
  r.classes = m.classes;
  r.averaging = mode;
  r.total = m.total();
  r.accuracy = r.total > 0 ? static_cast<double>(m.trace()) / static_cast<double>(r.total) : 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) r.per_class.push_back(precision_recall_f1(m, i));
  if (r.per_class.empty()) return r;

  double weight_total = 0.0;
  for (const auto& c : r.per_class) {
    const double w = mode == Averaging::Macro ? 1.0 : static_cast<double>(c.support);
    r.precision += w * c.precision;
    r.recall += w * c.recall;
    r.f1 += w * c.f1;
    weight_total += w;
  }
  if (weight_total > 0.0) {
    r.precision /= weight_total;
    r.recall /= weight_total;
    r.f1 /= weight_total;
  }
  return r;
}

ClassificationReport macro_report(const ConfusionMatrix& m) { return classification_report(m, Averaging::Macro); }

RocCurve roc_curve(std::span<const std::uint8_t> positives, std::span<const double> scores, std::string class_name) {
  if (positives.size() != scores.size()) throw Error(ErrorKind::ShapeError, "labels and scores differ in length");
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorKind::NumericError, "ROC scores must be finite");
    pos += positives[i] ? 1 : 0;
  }
  const auto neg = static_cast<std::int64_t>(scores.size()) - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::DegenerateRoc, "class '" + class_name + "' needs both positive and negative samples");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.class_name = std::move(class_name);
  curve.points.push_back({0.0, 0.0});
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      if (positives[order[i]]) ++tp;
      else ++fp;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
    curve.thresholds.push_back(threshold);
  }
  curve.auc = auc(curve.points);
  return curve;
}

double auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

}  // namespace harbench
