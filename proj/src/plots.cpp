#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "harbench/io.hpp"
#include "harbench/reporting.hpp"

namespace harbench {

namespace {

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Svg {
public:
  Svg(int width, int height) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
         << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n";
    out_ << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  }

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none") {
    out_ << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(w) << "\" height=\""
         << fixed(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            std::string_view dash = "") {
    out_ << "<line x1=\"" << fixed(x1) << "\" y1=\"" << fixed(y1) << "\" x2=\"" << fixed(x2) << "\" y2=\""
         << fixed(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fixed(width, 1) << '"';
    if (!dash.empty()) out_ << " stroke-dasharray=\"" << dash << '"';
    out_ << "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke, double width = 2.0) {
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fixed(width, 1) << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out_ << (i ? " " : "") << fixed(pts[i].first) << ',' << fixed(pts[i].second);
    out_ << "\"/>\n";
  }

  void text(double x, double y, std::string_view content, int size = 12, std::string_view anchor = "start",
            std::string_view fill = "black", double rotate = 0.0) {
    out_ << "<text x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" font-size=\"" << size << "\" text-anchor=\""
         << anchor << "\" fill=\"" << fill << '"';
    if (rotate != 0.0) out_ << " transform=\"rotate(" << fixed(rotate, 1) << ' ' << fixed(x) << ' ' << fixed(y) << ")\"";
    out_ << '>' << escape_xml(content) << "</text>\n";
  }

  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

private:
  std::ostringstream out_;
};

// White -> dark blue.
std::string heat_colour(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(247 - t * (247 - 8)));
  const int g = static_cast<int>(std::lround(251 - t * (251 - 48)));
  const int b = static_cast<int>(std::lround(255 - t * (255 - 107)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string confusion_svg(const ConfusionMatrix& m) {
  const int k = static_cast<int>(m.size());
  const double cell = 56.0;
  const double left = 170.0;
  const double top = 60.0;
  const int width = static_cast<int>(left + cell * k + 40);
  const int height = static_cast<int>(top + cell * k + 150);
  Svg svg(width, height);
  svg.text(left + cell * k / 2, 30, "Confusion matrix", 16, "middle");

  std::int64_t peak = 1;
  for (auto c : m.counts) peak = std::max(peak, c);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const auto count = m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      const double t = static_cast<double>(count) / static_cast<double>(peak);
      svg.rect(left + j * cell, top + i * cell, cell, cell, heat_colour(t), "#cccccc");
      svg.text(left + j * cell + cell / 2, top + i * cell + cell / 2 + 5, std::to_string(count), 13, "middle",
               t > 0.5 ? "white" : "black");
    }
    svg.text(left - 8, top + i * cell + cell / 2 + 4, m.classes[static_cast<std::size_t>(i)], 12, "end");
    svg.text(left + i * cell + cell / 2, top + k * cell + 10, m.classes[static_cast<std::size_t>(i)], 12, "end", "black",
             -45.0);
  }
  svg.text(20, top + k * cell / 2, "True label", 13, "middle", "black", -90.0);
  svg.text(left + k * cell / 2, height - 10, "Predicted label", 13, "middle");
  return svg.finish();
}

std::string roc_svg(std::span<const RocCurve> curves) {
  const double left = 60.0, top = 40.0, side = 400.0;
  const int legend_rows = static_cast<int>(curves.size());
  Svg svg(static_cast<int>(left + side + 260), static_cast<int>(top + side + 60 + std::max(0, legend_rows - 20) * 18));
  svg.text(left + side / 2, 25, "ROC curves (one-vs-rest)", 16, "middle");
  svg.rect(left, top, side, side, "none", "black");
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    svg.text(left + v * side, top + side + 16, fixed(v, 1), 11, "middle");
    svg.text(left - 6, top + side - v * side + 4, fixed(v, 1), 11, "end");
  }
  svg.line(left, top + side, left + side, top, "#999999", 1.0, "4,4");
  svg.text(left + side / 2, top + side + 36, "False positive rate", 13, "middle");
  svg.text(18, top + side / 2, "True positive rate", 13, "middle", "black", -90.0);

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto colour = kPalette[c % kPalette.size()];
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : curves[c].points) pts.emplace_back(left + p.fpr * side, top + side - p.tpr * side);
    svg.polyline(pts, colour);
    const double ly = top + 10 + static_cast<double>(c) * 18;
    svg.line(left + side + 20, ly, left + side + 44, ly, colour, 3.0);
    svg.text(left + side + 50, ly + 4, curves[c].class_name + " (AUC = " + fixed(curves[c].auc, 2) + ")", 12);
  }
  return svg.finish();
}

std::string history_svg(const TrainHistory& history) {
  const double panel_w = 360.0, panel_h = 260.0, top = 50.0, left = 60.0, gap = 90.0;
  Svg svg(static_cast<int>(left + 2 * panel_w + gap + 40), static_cast<int>(top + panel_h + 90));
  const auto n = history.epochs.size();

  double max_loss = 1e-12;
  for (const auto& e : history.epochs) {
    max_loss = std::max(max_loss, e.train_loss);
    if (e.val_loss) max_loss = std::max(max_loss, *e.val_loss);
  }

  auto panel = [&](double x0, const std::string& title, double y_max, auto train_value, auto val_value) {
    svg.text(x0 + panel_w / 2, top - 15, title, 15, "middle");
    svg.rect(x0, top, panel_w, panel_h, "none", "black");
    for (int t = 0; t <= 4; ++t) {
      const double v = y_max * t / 4.0;
      svg.text(x0 - 6, top + panel_h - panel_h * t / 4.0 + 4, fixed(v, 2), 11, "end");
    }
    auto x_of = [&](std::size_t i) { return n <= 1 ? x0 + panel_w / 2 : x0 + panel_w * i / static_cast<double>(n - 1); };
    for (std::size_t i = 0; i < n; ++i) {
      svg.text(x_of(i), top + panel_h + 16, std::to_string(history.epochs[i].epoch), 10, "middle");
    }
    svg.text(x0 + panel_w / 2, top + panel_h + 36, "Epoch", 13, "middle");
    std::vector<std::pair<double, double>> train_pts, val_pts;
    for (std::size_t i = 0; i < n; ++i) {
      train_pts.emplace_back(x_of(i), top + panel_h - panel_h * train_value(history.epochs[i]) / y_max);
      if (auto v = val_value(history.epochs[i])) val_pts.emplace_back(x_of(i), top + panel_h - panel_h * *v / y_max);
    }
    svg.polyline(train_pts, kPalette[0]);
    if (!val_pts.empty()) svg.polyline(val_pts, kPalette[1]);
    svg.line(x0 + 10, top + panel_h + 58, x0 + 34, top + panel_h + 58, kPalette[0], 3.0);
    svg.text(x0 + 40, top + panel_h + 62, "train", 12);
    if (!val_pts.empty()) {
      svg.line(x0 + 100, top + panel_h + 58, x0 + 124, top + panel_h + 58, kPalette[1], 3.0);
      svg.text(x0 + 130, top + panel_h + 62, "validation", 12);
    }
  };
  panel(left, "Loss", max_loss, [](const EpochRecord& e) { return e.train_loss; },
        [](const EpochRecord& e) { return e.val_loss; });
  panel(left + panel_w + gap, "Accuracy", 1.0, [](const EpochRecord& e) { return e.train_accuracy; },
        [](const EpochRecord& e) { return e.val_accuracy; });
  return svg.finish();
}

std::string comparison_svg(const ComparisonTable& table) {
  const double left = 60.0, top = 50.0, plot_h = 300.0, group_w = 150.0;
  const auto groups = table.rows.size();
  Svg svg(static_cast<int>(left + std::max<std::size_t>(groups, 1) * group_w + 160), static_cast<int>(top + plot_h + 70));
  svg.text(left + groups * group_w / 2, 25, "Model comparison", 16, "middle");
  svg.line(left, top + plot_h, left + groups * group_w, top + plot_h, "black");
  svg.line(left, top, left, top + plot_h, "black");
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    svg.text(left - 6, top + plot_h - v * plot_h + 4, whole_percent(v), 11, "end");
  }
  const std::array<const char*, 4> names{"Accuracy", "Precision", "Recall", "F1 Score"};
  const double bar_w = (group_w - 30) / 4.0;
  for (std::size_t g = 0; g < groups; ++g) {
    const auto& r = table.rows[g];
    const std::array<double, 4> values{r.accuracy, r.precision, r.recall, r.f1};
    for (std::size_t m = 0; m < 4; ++m) {
      const double x = left + g * group_w + 15 + m * bar_w;
      const double h = values[m] * plot_h;
      svg.rect(x, top + plot_h - h, bar_w - 2, h, kPalette[m]);
      svg.text(x + bar_w / 2, top + plot_h - h - 4, whole_percent(values[m]), 9, "middle");
    }
    svg.text(left + g * group_w + group_w / 2, top + plot_h + 18, r.model_name, 12, "middle");
  }
  for (std::size_t m = 0; m < 4; ++m) {
    const double ly = top + 10 + m * 18;
    svg.rect(left + groups * group_w + 20, ly - 9, 14, 12, kPalette[m]);
    svg.text(left + groups * group_w + 40, ly + 1, names[m], 12);
  }
  return svg.finish();
}

void plot_confusion(const ConfusionMatrix& m, const std::filesystem::path& out_path) {
  write_text_file(out_path, confusion_svg(m));
}

void plot_roc(std::span<const RocCurve> curves, const std::filesystem::path& out_path) {
  write_text_file(out_path, roc_svg(curves));
}

void plot_history(const TrainHistory& history, const std::filesystem::path& out_path) {
  write_text_file(out_path, history_svg(history));
}

void plot_comparison(const ComparisonTable& table, const std::filesystem::path& out_path) {
  write_text_file(out_path, comparison_svg(table));
}

}  // namespace harbench
