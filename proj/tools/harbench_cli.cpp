#include <glob.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/core/utils/logger.hpp>

#include "harbench/backbones.hpp"
#include "harbench/checksum.hpp"
#include "harbench/config.hpp"
#include "harbench/dataset.hpp"
#include "harbench/error.hpp"
#include "harbench/io.hpp"
#include "harbench/metrics.hpp"
#include "harbench/reporting.hpp"
#include "harbench/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace harbench;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      parts.push_back(parse_double(item));
    } catch (const Error&) {
      throw UsageError("--ratios expects three numbers, got '" + text + "'");
    }
  }
  if (parts.size() != 3) throw UsageError("--ratios expects three comma-separated numbers, got '" + text + "'");
  SplitRatios r{parts[0], parts[1], parts[2]};
  try {
    r.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return r;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns) {
    glob_t g{};
    if (::glob(p.c_str(), 0, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string version_json() {
  const auto weights_dir = default_weights_dir();
  json backbones = json::array();
  for (const auto& id : BackboneRegistry::global().ids()) {
    const auto path = weights_path(weights_dir, id);
    json entry{{"id", id}, {"weights", path.string()}};
    std::error_code ec;
    entry["weights_sha256"] = fs::is_regular_file(path, ec) ? json(sha256_file(path)) : json(nullptr);
    entry["stub_checksum"] = load_backbone(id, {.mode = WeightsMode::Stub})->weights_checksum();
    backbones.push_back(std::move(entry));
  }
  return json{{"name", "harbench"}, {"version", HARBENCH_VERSION}, {"backbones", std::move(backbones)}}.dump(2);
}

struct IngestArgs {
  std::string root, out, ratios = "0.7,0.1,0.2";
  std::int64_t stride = 15;
  std::optional<std::int64_t> limit;
  std::uint64_t seed = 42;
  std::optional<unsigned> threads;
};

int cmd_ingest(const IngestArgs& a) {
  ManifestOptions opts;
  opts.ratios = parse_ratios(a.ratios);
  opts.stride = a.stride;
  opts.frame_limit = a.limit;
  opts.seed = a.seed;
  opts.threads = resolve_run_config(std::nullopt, process_environment(), {.threads = a.threads}).threads;
  const auto build = build_manifest(a.root, a.out, opts);
  for (const auto& w : build.warnings) std::cerr << "warning: " << w << '\n';
  const auto report = validate_manifest(build.manifest);
  for (const auto& item : report.items) {
    if (item.status != CheckStatus::Pass) std::cerr << to_string(item.status) << ": " << item.check << ": " << item.message << '\n';
  }
  std::cout << "wrote " << build.manifest_path.string() << " (" << build.manifest.classes.size() << " classes, "
            << build.manifest.clips.size() << " clips, " << build.manifest.frames.size() << " frames)\n";
  return report.ok() ? 0 : kRuntimeFailure;
}

struct TrainArgs {
  std::string backbone, manifest, out = "runs";
  std::optional<std::string> config;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> weights_dir;
  bool stub = false;
  bool keep_best_val = false;
};

int cmd_train(const TrainArgs& a) {
  RunOverrides o{.learning_rate = a.lr,
                 .batch_size = a.batch_size,
                 .epochs = a.epochs,
                 .seed = a.seed,
                 .keep_best_val = a.keep_best_val ? std::optional<bool>(true) : std::nullopt,
                 .weights_mode = a.stub ? std::optional<WeightsMode>(WeightsMode::Stub) : std::nullopt,
                 .weights_dir = a.weights_dir ? std::optional<fs::path>(*a.weights_dir) : std::nullopt,
                 .threads = a.threads};
  RunConfig config;
  try {
    config = resolve_run_config(a.config ? std::optional<fs::path>(*a.config) : std::nullopt, process_environment(), o);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw UsageError(e.what());
    throw;
  }

  std::vector<std::string> ids;
  if (a.backbone == "all") {
    ids = BackboneRegistry::global().ids();
  } else if (BackboneRegistry::global().contains(a.backbone)) {
    ids = {a.backbone};
  } else {
    std::string known;
    for (const auto& id : BackboneRegistry::global().ids()) known += (known.empty() ? "" : ", ") + id;
    throw UsageError("unknown backbone '" + a.backbone + "'; registered: " + known + ", all");
  }

  const fs::path manifest_path = a.manifest;
  const auto manifest = load_manifest(manifest_path);
  for (const auto& id : ids) {
    const fs::path run_dir = fs::path(a.out) / id;
    ModelOptions mo;
    mo.seed = config.train.seed;
    mo.backbone = {.mode = config.weights_mode, .weights_dir = config.weights_dir};
    auto model = build_model(id, manifest.classes, mo);

    TrainOptions to;
    to.manifest_dir = manifest_path.parent_path();
    to.threads = config.threads;
    to.checkpoint_path = run_dir / "checkpoint.json";
    to.on_epoch = [&](const EpochRecord& e) {
      std::cerr << id << " epoch " << e.epoch << "/" << config.train.epochs << " loss " << format_double(e.train_loss)
                << " acc " << format_double(e.train_accuracy);
      if (e.val_accuracy) std::cerr << " val_loss " << format_double(*e.val_loss) << " val_acc " << format_double(*e.val_accuracy);
      std::cerr << '\n';
    };
    auto result = train(std::move(model), manifest, config.train, to);
    json meta = json::parse(run_config_to_json(config));
    meta["backbone"] = id;
    meta["manifest"] = fs::absolute(manifest_path).lexically_normal().string();
    meta["out"] = run_dir.string();
    write_text_file(run_dir / "run_config.json", meta.dump(2) + "\n");
    write_text_file(run_dir / "history.json", history_to_json(result.history));
    std::ostringstream timing;
    for (const auto& e : result.history.epochs) timing << "epoch " << e.epoch << " " << format_double(e.wall_time) << " s\n";
    write_text_file(run_dir / "timing.log", timing.str());
    plot_history(result.history, run_dir / "history.svg");
    std::cout << "wrote " << (run_dir / "checkpoint.json").string() << '\n';
  }
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint, manifest, split = "test", aggregation = "macro";
  std::optional<std::string> out, weights_dir;
  std::optional<unsigned> threads;
  bool plots = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  Split split;
  Averaging averaging;
  try {
    split = parse_split(a.split);
    averaging = parse_averaging(a.aggregation);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  RunOverrides o{.weights_dir = a.weights_dir ? std::optional<fs::path>(*a.weights_dir) : std::nullopt, .threads = a.threads};
  const auto config = resolve_run_config(std::nullopt, process_environment(), o);

  const fs::path checkpoint_path = a.checkpoint;
  const fs::path manifest_path = a.manifest;
  const auto checkpoint = load_checkpoint(checkpoint_path);
  const auto manifest = load_manifest(manifest_path);
  if (checkpoint.classes != manifest.classes) {
    throw Error(ErrorKind::ClassMismatch, "checkpoint classes differ from manifest classes");
  }
  const auto model = restore_model(checkpoint, {.mode = WeightsMode::Pretrained, .weights_dir = config.weights_dir});
  EvaluateOptions eo;
  eo.manifest_dir = manifest_path.parent_path();
  eo.threads = config.threads;
  eo.batch_size = checkpoint.config.batch_size;
  eo.averaging = averaging;
  const auto ev = evaluate(model, manifest, split, eo);

  const fs::path out = a.out ? fs::path(*a.out) : checkpoint_path.parent_path() / ("eval_" + std::string(to_string(split)));
  write_evaluation(ev, out);
  if (a.plots) {
    plot_confusion(ev.confusion, out / "confusion.svg");
    std::vector<RocCurve> curves;
    for (const auto& e : ev.roc) {
      if (e.curve) curves.push_back(*e.curve);
    }
    plot_roc(curves, out / "roc.svg");
  }
  std::cout << checkpoint.backbone_id << " " << to_string(split) << ": accuracy " << whole_percent(ev.report.accuracy)
            << ", precision " << whole_percent(ev.report.precision) << ", recall " << whole_percent(ev.report.recall)
            << ", f1 " << whole_percent(ev.report.f1) << '\n';
  std::cout << "wrote " << (out / "report.json").string() << '\n';
  return 0;
}

struct CompareArgs {
  std::vector<std::string> reports;
  std::string out = "comparison";
  std::string format = "all";
  bool plots = false;
};

int cmd_compare(const CompareArgs& a) {
  std::vector<TableFormat> formats;
  if (a.format == "all") {
    formats = {TableFormat::Markdown, TableFormat::Csv, TableFormat::Json};
  } else {
    try {
      formats = {parse_table_format(a.format)};
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  const auto matches = expand_globs(a.reports);
  if (matches.empty()) throw Error(ErrorKind::ReportLoadError, "no report files match the given patterns");
  std::vector<fs::path> paths(matches.begin(), matches.end());
  const auto table = compare_runs(paths);
  const fs::path out = a.out;
  for (auto f : formats) {
    auto path = out;
    path += extension_for(f);
    write_table(table, f, path);
    std::cout << "wrote " << path.string() << '\n';
  }
  if (formats.size() == 3 || formats.front() == TableFormat::Markdown) std::cout << render_table(table, TableFormat::Markdown);
  if (a.plots) {
    auto svg = out;
    svg += ".svg";
    plot_comparison(table, svg);
  }
  return 0;
}

int cmd_backbones_list() {
  for (const auto& id : BackboneRegistry::global().ids()) {
    const auto spec = BackboneRegistry::global().get(id);
    std::cout << id << "\t" << spec.display_name << "\tchannels=" << spec.feature_channels << "\tgrid@160="
              << spec.output_side(160) << "x" << spec.output_side(160) << "\tweights=" << spec.weight_source << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  cv::utils::logging::setLogLevel(cv::utils::logging::LOG_LEVEL_SILENT);
  CLI::App app{"harbench: frozen-backbone activity recognition benchmark"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print version and backbone registry as JSON");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Scan a folder-per-class corpus and write a split manifest");
  ingest_cmd->add_option("--root", ingest.root, "Corpus root (one folder per class)")->required();
  ingest_cmd->add_option("--out", ingest.out, "Output directory for manifest.json and frames/")->required();
  ingest_cmd->add_option("--stride", ingest.stride, "Keep every Nth video frame")->capture_default_str()->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--limit", ingest.limit, "Maximum frames per clip")->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--ratios", ingest.ratios, "train,val,test fractions")->capture_default_str();
  ingest_cmd->add_option("--seed", ingest.seed, "Split seed")->capture_default_str();
  ingest_cmd->add_option("--threads", ingest.threads, "Worker threads")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a classification head on a frozen backbone");
  train_cmd->add_option("--backbone", tr.backbone, "Backbone id or 'all'")->required();
  train_cmd->add_option("--manifest", tr.manifest, "manifest.json from ingest")->required();
  train_cmd->add_option("--out", tr.out, "Run directory root; each backbone writes <out>/<id>/")->capture_default_str();
  train_cmd->add_option("--config", tr.config, "JSON run configuration");
  train_cmd->add_option("--epochs", tr.epochs, "Epochs (default 20)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate (default 1e-4)");
  train_cmd->add_option("--batch-size", tr.batch_size, "Mini-batch size (default 8)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed, "Seed for head init and shuffling (default 42)");
  train_cmd->add_option("--threads", tr.threads, "Worker threads")->check(CLI::PositiveNumber);
  train_cmd->add_option("--weights-dir", tr.weights_dir, "Directory holding <id>.onnx backbones");
  auto* stub_flag = train_cmd->add_flag("--stub", tr.stub, "Use the offline stub backbone");
  train_cmd->add_flag("--weights", "Use pretrained weights (default)")->excludes(stub_flag);
  train_cmd->add_flag("--keep-best-val", tr.keep_best_val, "Keep the head with the best validation accuracy");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a manifest split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint.json from train")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "manifest.json from ingest")->required();
  eval_cmd->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Output directory (default <checkpoint dir>/eval_<split>)");
  eval_cmd->add_option("--aggregation", ev.aggregation, "macro or weighted")->capture_default_str();
  eval_cmd->add_option("--threads", ev.threads, "Worker threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--weights-dir", ev.weights_dir, "Directory holding <id>.onnx backbones");
  eval_cmd->add_flag("--plots", ev.plots, "Also write confusion.svg and roc.svg");

  CompareArgs cmp;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate report.json files from several runs");
  compare_cmd->add_option("reports", cmp.reports, "report.json paths or glob patterns")->required();
  compare_cmd->add_option("--out", cmp.out, "Output path without extension")->capture_default_str();
  compare_cmd->add_option("--format", cmp.format, "md, csv, json or all")->capture_default_str();
  compare_cmd->add_flag("--plots", cmp.plots, "Also write a bar chart (<out>.svg)");

  auto* backbones_cmd = app.add_subcommand("backbones", "Backbone registry");
  backbones_cmd->require_subcommand(1);
  auto* list_cmd = backbones_cmd->add_subcommand("list", "List registered backbones");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (show_version) {
      std::cout << version_json() << '\n';
      return 0;
    }
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_evaluate(ev);
    if (*compare_cmd) return cmd_compare(cmp);
    if (*list_cmd) return cmd_backbones_list();
    std::cerr << app.help();
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
