#pragma once

// Cross-run comparison tables and SVG views of persisted results.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harbench/metrics.hpp"
#include "harbench/train.hpp"

namespace harbench {

struct ComparisonRow {
  std::string backbone;
  std::string model_name;  // display name, e.g. "ResNet-50"
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::string aggregation;
  std::string split;
  std::string report_path;

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonTable {
  std::vector<std::string> classes;
  std::vector<ComparisonRow> rows;  // accuracy descending, then backbone id

  bool operator==(const ComparisonTable&) const = default;
};

/// Reads one report.json. Throws Error{ReportLoadError}.
ComparisonRow load_report_row(const std::filesystem::path& report_path, std::vector<std::string>* classes = nullptr);

/// Throws Error{ReportLoadError} for no/unreadable reports and
/// Error{ClassMismatch} when the class lists differ.
ComparisonTable compare_runs(std::span<const std::filesystem::path> report_paths);

/// Accuracy-descending order with ties broken by backbone id.
void sort_rows(std::vector<ComparisonRow>& rows);

enum class TableFormat { Markdown, Csv, Json };
/// "md"/"markdown", "csv", "json"; throws Error{FormatError}.
TableFormat parse_table_format(std::string_view name);
std::string_view extension_for(TableFormat format) noexcept;

/// Whole percent, half away from zero: 0.916 -> "92%".
std::string whole_percent(double fraction);

/// Deterministic bytes. Markdown shows whole percents; CSV and JSON keep full
/// precision.
std::string render_table(const ComparisonTable& table, TableFormat format);
void write_table(const ComparisonTable& table, TableFormat format, const std::filesystem::path& path);
ComparisonTable parse_table_json(std::string_view text);

/// Published results of the four frozen-backbone runs on the private
/// classroom corpus. Reference targets only; they cannot be reproduced
/// without that corpus.
const std::vector<ComparisonRow>& published_reference_rows();

// SVG views. Each is a pure function of its input so a plot regenerated from
// the persisted CSV/JSON is byte-identical to the one written at run time.
std::string confusion_svg(const ConfusionMatrix& m);
std::string roc_svg(std::span<const RocCurve> curves);
std::string history_svg(const TrainHistory& history);
std::string comparison_svg(const ComparisonTable& table);

void plot_confusion(const ConfusionMatrix& m, const std::filesystem::path& out_path);
void plot_roc(std::span<const RocCurve> curves, const std::filesystem::path& out_path);
void plot_history(const TrainHistory& history, const std::filesystem::path& out_path);
void plot_comparison(const ComparisonTable& table, const std::filesystem::path& out_path);

}  // namespace harbench
