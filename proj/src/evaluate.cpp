#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "harbench/error.hpp"
#include "harbench/io.hpp"
#include "harbench/metrics.hpp"
#include "harbench/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace harbench {

Evaluation evaluate_probabilities(std::vector<std::string> classes, std::vector<std::size_t> y_true,
                                  Matrix probabilities, Averaging averaging) {
  if (probabilities.rows != y_true.size() || probabilities.cols != classes.size()) {
    throw Error(ErrorKind::ShapeError, "probability matrix does not match labels and classes");
  }
  Evaluation ev;
  ev.y_true = std::move(y_true);
  ev.y_pred.resize(probabilities.rows);
  for (std::size_t i = 0; i < probabilities.rows; ++i) ev.y_pred[i] = argmax(probabilities.row(i));
  ev.confusion = confusion_matrix(ev.y_true, ev.y_pred, classes);
  ev.report = classification_report(ev.confusion, averaging);

  std::vector<std::uint8_t> positives(probabilities.rows);
  std::vector<double> scores(probabilities.rows);
  for (std::size_t k = 0; k < classes.size(); ++k) {
    for (std::size_t i = 0; i < probabilities.rows; ++i) {
      positives[i] = ev.y_true[i] == k ? 1 : 0;
      scores[i] = probabilities(i, k);
    }
    RocEntry entry;
    entry.class_name = classes[k];
    try {
      entry.curve = roc_curve(positives, scores, classes[k]);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateRoc) throw;
      entry.diagnostic = e.what();
    }
    ev.roc.push_back(std::move(entry));
  }
  ev.probabilities = std::move(probabilities);
  return ev;
}

Evaluation evaluate(const ClassifierModel& model, const DatasetManifest& manifest, Split split,
                    const EvaluateOptions& options) {
  if (model.classes() != manifest.classes) {
    throw Error(ErrorKind::ClassMismatch, "model classes differ from manifest classes");
  }
  const auto frames = manifest.frames_in(split);
  if (frames.empty()) {
    throw Error(ErrorKind::EmptySplit, "manifest has no " + std::string(to_string(split)) + " frames");
  }

  FrameSource source;
  source.base_dir = options.manifest_dir;
  source.classes = manifest.classes;
  source.normalization = model.backbone().spec().normalization;
  FeatureSet features = compute_features(model, frames, source, options.batch_size, options.threads);

  Evaluation ev = evaluate_probabilities(model.classes(), std::move(features.labels),
                                         head_probabilities(model.head(), features.features), options.averaging);
  ev.split = split;
  ev.backbone_id = model.backbone().spec().id;
  ev.backbone_kind = std::string(model.backbone().kind());
  ev.backbone_checksum = model.backbone().weights_checksum();
  ev.head_checksum = model.head().checksum();
  for (const auto* f : frames) ev.frame_ids.push_back(f->frame_id);
  return ev;
}

std::string confusion_to_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& c : m.classes) out << ',' << csv_escape(c);
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << csv_escape(m.classes[i]);
    for (std::size_t j = 0; j < m.size(); ++j) out << ',' << m.at(i, j);
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix confusion_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::FormatError, "empty confusion matrix CSV");
  auto header = csv_split(line);
  ConfusionMatrix m;
  m.classes.assign(header.begin() + 1, header.end());
  const std::size_t k = m.size();
  m.counts.assign(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorKind::FormatError, "confusion matrix CSV has too few rows");
    const auto fields = csv_split(line);
    if (fields.size() != k + 1 || fields[0] != m.classes[i]) {
      throw Error(ErrorKind::FormatError, "confusion matrix CSV row " + std::to_string(i + 1) + " is malformed");
    }
    for (std::size_t j = 0; j < k; ++j) {
      try {
        m.at(i, j) = std::stoll(fields[j + 1]);
      } catch (const std::exception&) {
        throw Error(ErrorKind::FormatError, "non-integer confusion matrix cell '" + fields[j + 1] + "'");
      }
    }
  }
  return m;
}

std::string roc_to_csv(const RocCurve& curve) {
  std::ostringstream out;
  out << "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    out << format_double(curve.thresholds[i]) << ',' << format_double(curve.points[i].fpr) << ','
        << format_double(curve.points[i].tpr) << '\n';
  }
  return out.str();
}

RocCurve roc_from_csv(std::string_view text, std::string class_name) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "threshold,fpr,tpr") {
    throw Error(ErrorKind::FormatError, "ROC CSV must start with threshold,fpr,tpr");
  }
  RocCurve curve;
  curve.class_name = std::move(class_name);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 3) throw Error(ErrorKind::FormatError, "ROC CSV rows need 3 fields");
    curve.thresholds.push_back(parse_double(f[0]));
    curve.points.push_back({parse_double(f[1]), parse_double(f[2])});
  }
  curve.auc = auc(curve.points);
  return curve;
}

std::string report_to_json(const Evaluation& ev) {
  const auto& r = ev.report;
  json per_class = json::array();
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    const auto& c = r.per_class[i];
    per_class.push_back({{"class", r.classes[i]},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support},
                         {"degenerate", c.degenerate}});
  }
  const auto macro = ev.report.averaging == Averaging::Macro ? r : macro_report(ev.confusion);

  json roc = json::array();
  for (const auto& e : ev.roc) {
    if (e.curve) {
      roc.push_back({{"class", e.class_name}, {"auc", e.curve->auc}, {"degenerate", false}});
    } else {
      roc.push_back({{"class", e.class_name}, {"auc", nullptr}, {"degenerate", true}, {"diagnostic", e.diagnostic}});
    }
  }

  json matrix = json::array();
  for (std::size_t i = 0; i < ev.confusion.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < ev.confusion.size(); ++j) row.push_back(ev.confusion.at(i, j));
    matrix.push_back(std::move(row));
  }

  json j{{"format", "harbench-report/1"},
         {"split", to_string(ev.split)},
         {"model",
          {{"backbone", ev.backbone_id},
           {"backbone_kind", ev.backbone_kind},
           {"backbone_checksum", ev.backbone_checksum},
           {"head_checksum", ev.head_checksum}}},
         {"classes", r.classes},
         {"n_samples", r.total},
         {"aggregation", to_string(r.averaging)},
         {"accuracy", r.accuracy},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"macro", {{"precision", macro.precision}, {"recall", macro.recall}, {"f1", macro.f1}}},
         {"per_class", std::move(per_class)},
         {"confusion_matrix", std::move(matrix)},
         {"roc", std::move(roc)}};
  return j.dump(2) + "\n";
}

fs::path roc_csv_path(const fs::path& run_dir, std::string_view class_name) {
  return run_dir / ("roc_" + file_stem_for(class_name) + ".csv");
}

void write_evaluation(const Evaluation& ev, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  write_text_file(run_dir / "report.json", report_to_json(ev));
  write_text_file(run_dir / "confusion.csv", confusion_to_csv(ev.confusion));

  std::ostringstream preds;
  preds << "frame_id,true,predicted";
  for (const auto& c : ev.confusion.classes) preds << ',' << csv_escape("p_" + c);
  preds << '\n';
  for (std::size_t i = 0; i < ev.y_true.size(); ++i) {
    preds << csv_escape(i < ev.frame_ids.size() ? ev.frame_ids[i] : std::to_string(i)) << ','
          << csv_escape(ev.confusion.classes[ev.y_true[i]]) << ',' << csv_escape(ev.confusion.classes[ev.y_pred[i]]);
    for (double p : ev.probabilities.row(i)) preds << ',' << format_double(p);
    preds << '\n';
  }
  write_text_file(run_dir / "predictions.csv", preds.str());

  for (const auto& e : ev.roc) {
    const auto csv = roc_csv_path(run_dir, e.class_name);
    auto sidecar = csv;
    sidecar.replace_extension(".json");
    if (e.curve) {
      write_text_file(csv, roc_to_csv(*e.curve));
      write_text_file(sidecar, json{{"class", e.class_name}, {"auc", e.curve->auc}, {"points", e.curve->points.size()}}
                                       .dump(2) + "\n");
    } else {
      std::error_code ec;
      fs::remove(csv, ec);
      write_text_file(sidecar, json{{"class", e.class_name}, {"auc", nullptr}, {"degenerate", true},
                                    {"diagnostic", e.diagnostic}}
                                       .dump(2) + "\n");
    }
  }
}

}  // namespace harbench
