#pragma once

// Multi-class evaluation: confusion matrix, accuracy / precision / recall / F1,
// one-vs-rest ROC curves and AUC.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harbench/dataset.hpp"
#include "harbench/model.hpp"

namespace harbench {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::int64_t> counts;  // K x K row-major

  std::size_t size() const noexcept { return classes.size(); }
  std::int64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * size() + predicted]; }
  std::int64_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * size() + predicted]; }

  std::int64_t total() const noexcept;
  std::int64_t trace() const noexcept;
  std::int64_t row_sum(std::size_t i) const;
  std::int64_t col_sum(std::size_t j) const;

  std::int64_t tp(std::size_t i) const { return at(i, i); }
  std::int64_t fp(std::size_t i) const { return col_sum(i) - tp(i); }
  std::int64_t fn(std::size_t i) const { return row_sum(i) - tp(i); }
  std::int64_t tn(std::size_t i) const { return total() - tp(i) - fp(i) - fn(i); }

  bool operator==(const ConfusionMatrix&) const = default;
};

/// M[i][j] = #{t : y_true[t] = i, y_pred[t] = j}. Throws Error{ShapeError} on a
/// length mismatch and Error{LabelError} for an index outside the class set.
ConfusionMatrix confusion_matrix(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                 std::vector<std::string> classes);
ConfusionMatrix confusion_matrix(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                                 std::vector<std::string> classes);

/// trace / total; throws Error{UndefinedMetric} for an empty matrix.
double accuracy(const ConfusionMatrix& m);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool degenerate = false;

  bool operator==(const ClassMetrics&) const = default;
};

/// p = TP/(TP+FP), r = TP/(TP+FN), f1 = 2TP/(2TP+FP+FN), each 0 (and flagged)
/// when its denominator is 0.
ClassMetrics precision_recall_f1(const ConfusionMatrix& m, std::size_t cls);

enum class Averaging { Macro, Weighted };
std::string_view to_string(Averaging mode) noexcept;
Averaging parse_averaging(std::string_view name);

struct ClassificationReport {
  std::vector<std::string> classes;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Averaging averaging = Averaging::Macro;
  std::int64_t total = 0;
};

/// Unweighted mean over classes of per-class precision, recall and F1.
ClassificationReport macro_report(const ConfusionMatrix& m);
/// Weighted mode averages by class support.
ClassificationReport classification_report(const ConfusionMatrix& m, Averaging mode);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

/// points[k] is reached by predicting positive for score >= thresholds[k];
/// thresholds[0] = +inf gives (0, 0) and the last threshold gives (1, 1).
struct RocCurve {
  std::string class_name;
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
  double auc = 0.0;
};

/// Threshold sweep over descending unique scores; tied scores move the curve in
/// a single diagonal step. Throws Error{DegenerateRoc} unless both classes are
/// present and Error{NumericError} for non-finite scores.
RocCurve roc_curve(std::span<const std::uint8_t> positives, std::span<const double> scores,
                   std::string class_name = {});

/// Trapezoidal area under the (fpr, tpr) polyline.
double auc(std::span<const RocPoint> points);
inline double auc(const RocCurve& curve) { return auc(curve.points); }

// --- model evaluation -------------------------------------------------------

struct RocEntry {
  std::string class_name;
  std::optional<RocCurve> curve;  // empty when degenerate
  std::string diagnostic;
};

struct Evaluation {
  Split split = Split::Test;
  std::string backbone_id;
  std::string backbone_kind;
  std::string backbone_checksum;
  std::string head_checksum;
  std::vector<std::string> frame_ids;
  std::vector<std::size_t> y_true;
  std::vector<std::size_t> y_pred;
  Matrix probabilities;
  ConfusionMatrix confusion;
  ClassificationReport report;
  std::vector<RocEntry> roc;
};

struct EvaluateOptions {
  std::filesystem::path manifest_dir;
  unsigned threads = 1;
  std::size_t batch_size = 8;
  Averaging averaging = Averaging::Macro;
};

/// Scores one split in manifest order. Throws Error{ClassMismatch} when the
/// model and manifest class lists differ and Error{EmptySplit} for no frames.
Evaluation evaluate(const ClassifierModel& model, const DatasetManifest& manifest, Split split,
                    const EvaluateOptions& options);

/// Same pipeline on precomputed probabilities (rows aligned with y_true).
Evaluation evaluate_probabilities(std::vector<std::string> classes, std::vector<std::size_t> y_true,
                                  Matrix probabilities, Averaging averaging = Averaging::Macro);

// --- persisted artifacts ----------------------------------------------------

std::string confusion_to_csv(const ConfusionMatrix& m);
ConfusionMatrix confusion_from_csv(std::string_view text);
/// Columns threshold, fpr, tpr.
std::string roc_to_csv(const RocCurve& curve);
RocCurve roc_from_csv(std::string_view text, std::string class_name = {});
std::string report_to_json(const Evaluation& evaluation);

/// Writes report.json, confusion.csv, predictions.csv and, per class,
/// roc_<class>.csv with an roc_<class>.json sidecar carrying the AUC.
void write_evaluation(const Evaluation& evaluation, const std::filesystem::path& run_dir);
std::filesystem::path roc_csv_path(const std::filesystem::path& run_dir, std::string_view class_name);

}  // namespace harbench
