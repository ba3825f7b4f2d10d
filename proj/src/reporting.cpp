#include "harbench/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "harbench/backbones.hpp"
#include "harbench/error.hpp"
#include "harbench/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace harbench {

namespace {

std::string display_name_for(const std::string& backbone) {
  const auto& registry = BackboneRegistry::global();
  return registry.contains(backbone) ? registry.get(backbone).display_name : backbone;
}

}  // namespace

ComparisonRow load_report_row(const fs::path& report_path, std::vector<std::string>* classes) {
  std::string text;
  try {
    text = read_text_file(report_path);
  } catch (const Error& e) {
    throw Error(ErrorKind::ReportLoadError, e.what());
  }
  try {
    const json j = json::parse(text);
    ComparisonRow row;
    row.backbone = j.at("model").at("backbone").get<std::string>();
    row.model_name = display_name_for(row.backbone);
    row.accuracy = j.at("accuracy").get<double>();
    row.precision = j.at("precision").get<double>();
    row.recall = j.at("recall").get<double>();
    row.f1 = j.at("f1").get<double>();
    row.aggregation = j.at("aggregation").get<std::string>();
    row.split = j.at("split").get<std::string>();
    row.report_path = report_path.generic_string();
    for (double v : {row.accuracy, row.precision, row.recall, row.f1}) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::ReportLoadError, "metric outside [0,1] in " + row.report_path);
    }
    if (classes) *classes = j.at("classes").get<std::vector<std::string>>();
    return row;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ReportLoadError, "malformed report " + report_path.string() + ": " + e.what());
  }
}

void sort_rows(std::vector<ComparisonRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    return a.backbone < b.backbone;
  });
}

ComparisonTable compare_runs(std::span<const fs::path> report_paths) {
  if (report_paths.empty()) throw Error(ErrorKind::ReportLoadError, "no reports to compare");
  ComparisonTable table;
  for (std::size_t i = 0; i < report_paths.size(); ++i) {
    std::vector<std::string> classes;
    table.rows.push_back(load_report_row(report_paths[i], &classes));
    if (i == 0) {
      table.classes = std::move(classes);
    } else if (classes != table.classes) {
      throw Error(ErrorKind::ClassMismatch,
                  report_paths[i].string() + " has a different class set than " + report_paths[0].string());
    }
  }
  sort_rows(table.rows);
  return table;
}

TableFormat parse_table_format(std::string_view name) {
  if (name == "md" || name == "markdown") return TableFormat::Markdown;
  if (name == "csv") return TableFormat::Csv;
  if (name == "json") return TableFormat::Json;
  throw Error(ErrorKind::FormatError, "unknown table format '" + std::string(name) + "' (md, csv, json)");
}

std::string_view extension_for(TableFormat format) noexcept {
  switch (format) {
    case TableFormat::Markdown: return ".md";
    case TableFormat::Csv: return ".csv";
    case TableFormat::Json: return ".json";
  }
  return ".txt";
}

std::string whole_percent(double fraction) {
  // Nudge by 1e-9 so decimal halves such as 0.925 that land just below .5 in
  // binary still round away from zero.
  const double scaled = fraction * 100.0;
  const double rounded = std::round(scaled + std::copysign(1e-9, scaled));
  return std::to_string(static_cast<long long>(rounded)) + "%";
}

std::string render_table(const ComparisonTable& table, TableFormat format) {
  std::ostringstream out;
  switch (format) {
    case TableFormat::Markdown:
      out << "| Model | Accuracy | Precision | Recall | F1 Score |\n";
      out << "|---|---|---|---|---|\n";
      for (const auto& r : table.rows) {
        out << "| " << r.model_name << " | " << whole_percent(r.accuracy) << " | " << whole_percent(r.precision)
            << " | " << whole_percent(r.recall) << " | " << whole_percent(r.f1) << " |\n";
      }
      break;
    case TableFormat::Csv:
      out << "backbone,model,accuracy,precision,recall,f1,aggregation,split,report\n";
      for (const auto& r : table.rows) {
        out << csv_escape(r.backbone) << ',' << csv_escape(r.model_name) << ',' << format_double(r.accuracy) << ','
            << format_double(r.precision) << ',' << format_double(r.recall) << ',' << format_double(r.f1) << ','
            << csv_escape(r.aggregation) << ',' << csv_escape(r.split) << ',' << csv_escape(r.report_path) << '\n';
      }
      break;
    case TableFormat::Json: {
      json rows = json::array();
      for (const auto& r : table.rows) {
        rows.push_back({{"backbone", r.backbone},
                        {"model", r.model_name},
                        {"accuracy", r.accuracy},
                        {"precision", r.precision},
                        {"recall", r.recall},
                        {"f1", r.f1},
                        {"aggregation", r.aggregation},
                        {"split", r.split},
                        {"report", r.report_path}});
      }
      out << json{{"classes", table.classes}, {"rows", std::move(rows)}}.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

void write_table(const ComparisonTable& table, TableFormat format, const fs::path& path) {
  write_text_file(path, render_table(table, format));
}

ComparisonTable parse_table_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ComparisonTable t;
    t.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      ComparisonRow row;
      row.backbone = r.at("backbone").get<std::string>();
      row.model_name = r.at("model").get<std::string>();
      row.accuracy = r.at("accuracy").get<double>();
      row.precision = r.at("precision").get<double>();
      row.recall = r.at("recall").get<double>();
      row.f1 = r.at("f1").get<double>();
      row.aggregation = r.at("aggregation").get<std::string>();
      row.split = r.at("split").get<std::string>();
      row.report_path = r.at("report").get<std::string>();
      t.rows.push_back(std::move(row));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("malformed comparison table: ") + e.what());
  }
}

const std::vector<ComparisonRow>& published_reference_rows() {
  static const std::vector<ComparisonRow> rows = [] {
    std::vector<ComparisonRow> r{
        {"vgg16", "VGG-16", 0.66, 0.74, 0.66, 0.65, "unstated", "test", "reference"},
        {"resnet50", "ResNet-50", 0.83, 0.83, 0.85, 0.84, "unstated", "test", "reference"},
        {"inceptionv3", "InceptionV3", 0.89, 0.89, 0.89, 0.90, "unstated", "test", "reference"},
        {"xception", "Xception", 0.92, 0.94, 0.93, 0.93, "unstated", "test", "reference"},
    };
    sort_rows(r);
    return r;
  }();
  return rows;
}

}  // namespace harbench
