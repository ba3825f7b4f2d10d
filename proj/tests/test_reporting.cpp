#include <doctest.h>

#include "harbench/error.hpp"
#include "harbench/io.hpp"
#include "harbench/reporting.hpp"
#include "support.hpp"

using namespace harbench;
namespace fs = std::filesystem;

namespace {

fs::path write_report(const fs::path& dir, const std::string& backbone, double acc,
                      std::vector<std::string> classes = {"a", "b"}) {
  Matrix probs(4, classes.size(), 0.0);
  for (std::size_t i = 0; i < 4; ++i) probs(i, i % 2) = 1.0;
  auto ev = evaluate_probabilities(classes, {0, 1, 0, 1}, probs, Averaging::Macro);
  ev.backbone_id = backbone;
  ev.report.accuracy = acc;
  write_evaluation(ev, dir / backbone);
  return dir / backbone / "report.json";
}

}  // namespace

TEST_CASE("whole percent rounding") {
  CHECK(whole_percent(0.916) == "92%");
  CHECK(whole_percent(0.925) == "93%");
  CHECK(whole_percent(0.66) == "66%");
  CHECK(whole_percent(0.0) == "0%");
  CHECK(whole_percent(1.0) == "100%");
  CHECK(whole_percent(0.005) == "1%");
  CHECK(whole_percent(0.00499) == "0%");
}

TEST_CASE("published reference table") {
  const auto& rows = published_reference_rows();
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].backbone == "xception");
  CHECK(rows[3].backbone == "vgg16");
  const auto md = render_table({{}, rows}, TableFormat::Markdown);
  CHECK(md ==
        "| Model | Accuracy | Precision | Recall | F1 Score |\n"
        "|---|---|---|---|---|\n"
        "| Xception | 92% | 94% | 93% | 93% |\n"
        "| InceptionV3 | 89% | 89% | 89% | 90% |\n"
        "| ResNet-50 | 83% | 83% | 85% | 84% |\n"
        "| VGG-16 | 66% | 74% | 66% | 65% |\n");
}

TEST_CASE("compare runs sorts by accuracy then backbone id") {
  testing::TempDir dir("cmp");
  const std::vector<fs::path> paths{write_report(dir.path(), "vgg16", 0.5), write_report(dir.path(), "xception", 0.9),
                                    write_report(dir.path(), "resnet50", 0.5)};
  const auto t = compare_runs(paths);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].backbone == "xception");
  CHECK(t.rows[1].backbone == "resnet50");
  CHECK(t.rows[2].backbone == "vgg16");
  CHECK(t.rows[0].model_name == "Xception");
  CHECK(t.classes == std::vector<std::string>{"a", "b"});

  const auto json_text = render_table(t, TableFormat::Json);
  CHECK(parse_table_json(json_text) == t);
  const auto csv = render_table(t, TableFormat::Csv);
  CHECK(csv.rfind("backbone,model,accuracy,precision,recall,f1,aggregation,split,report\n", 0) == 0);
  CHECK(render_table(t, TableFormat::Markdown) == render_table(compare_runs(paths), TableFormat::Markdown));
}

TEST_CASE("compare errors") {
  testing::TempDir dir("cmperr");
  CHECK_THROWS_AS(compare_runs(std::span<const fs::path>{}), Error);
  const std::vector<fs::path> mixed{write_report(dir.path(), "vgg16", 0.5),
                                    write_report(dir.path(), "xception", 0.9, {"a", "c"})};
  try {
    compare_runs(mixed);
    FAIL("expected mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ClassMismatch);
  }
  write_text_file(dir / "bad.json", "{\"accuracy\": 2}");
  const std::vector<fs::path> bad{dir / "bad.json"};
  CHECK_THROWS_AS(compare_runs(bad), Error);
  CHECK(parse_table_format("markdown") == TableFormat::Markdown);
  CHECK_THROWS_AS(parse_table_format("xlsx"), Error);
}

TEST_CASE("empty table renders a header only") {
  CHECK(render_table({}, TableFormat::Markdown) == "| Model | Accuracy | Precision | Recall | F1 Score |\n|---|---|---|---|---|\n");
}

TEST_CASE("plots regenerate byte-identically from persisted files") {
  testing::TempDir dir("plots");
  Matrix probs(6, 3);
  probs.values = {0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4, 0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 0.1, 0.45, 0.45};
  const auto ev = evaluate_probabilities({"hand raise", "reading", "writing"}, {0, 1, 2, 1, 2, 1}, probs, Averaging::Macro);
  write_evaluation(ev, dir.path());

  const auto svg = confusion_svg(ev.confusion);
  CHECK(svg.find("hand raise") != std::string::npos);
  CHECK(svg.find("Predicted label") != std::string::npos);
  CHECK(confusion_svg(confusion_from_csv(read_text_file(dir / "confusion.csv"))) == svg);

  std::vector<RocCurve> live, reloaded;
  for (const auto& e : ev.roc) {
    live.push_back(*e.curve);
    reloaded.push_back(roc_from_csv(read_text_file(roc_csv_path(dir.path(), e.class_name)), e.class_name));
  }
  CHECK(roc_svg(reloaded) == roc_svg(live));
  CHECK(roc_svg(live).find("AUC = ") != std::string::npos);

  TrainHistory h;
  h.epochs = {{1, 1.2, 0.4, 1.1, 0.5, 0.1}, {2, 0.7, 0.8, 0.9, 0.7, 0.1}};
  CHECK(history_svg(history_from_json(history_to_json(h))) == history_svg(h));

  ComparisonTable t{{}, published_reference_rows()};
  CHECK(comparison_svg(parse_table_json(render_table(t, TableFormat::Json))) == comparison_svg(t));
  plot_confusion(ev.confusion, dir / "c.svg");
  CHECK(read_text_file(dir / "c.svg") == svg);
}
