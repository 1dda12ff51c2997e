#include <algorithm>
#include <cstdio>
#include <limits>

#include "mtvqa/harness.hpp"

namespace mtvqa::harness {

namespace {

constexpr double kWidth = 720;
constexpr double kPanelHeight = 260;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 40;

struct Panel {
  double top;
  double ymin, ymax;
  std::size_t epochs;

  double x(double epoch) const {
    const double span = epochs > 1 ? static_cast<double>(epochs - 1) : 1.0;
    return kLeft + (epoch - 1.0) / span * (kWidth - kLeft - kRight);
  }
  double y(double v) const {
    const double span = ymax > ymin ? ymax - ymin : 1.0;
    return top + kPanelHeight - kBottom - (v - ymin) / span * (kPanelHeight - kTop - kBottom);
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string polyline(const Panel& p, const std::vector<EpochRecord>& rows, double EpochRecord::*field,
                     const char* colour) {
  std::string pts;
  for (const auto& r : rows) {
    pts += fmt("%.2f", p.x(static_cast<double>(r.epoch))) + "," + fmt("%.2f", p.y(r.*field)) + " ";
  }
  if (!pts.empty()) pts.pop_back();
  return "  <polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\" points=\"" + pts +
         "\"/>\n";
}

std::string frame(const Panel& p, const std::string& label, const std::vector<EpochRecord>& rows) {
  const double bottom = p.top + kPanelHeight - kBottom;
  const double top = p.top + kTop;
  std::string out;
  out += "  <rect x=\"" + fmt("%.0f", kLeft) + "\" y=\"" + fmt("%.0f", top) + "\" width=\"" +
         fmt("%.0f", kWidth - kLeft - kRight) + "\" height=\"" + fmt("%.0f", bottom - top) +
         "\" fill=\"none\" stroke=\"#888\"/>\n";
  out += "  <text x=\"" + fmt("%.0f", kLeft) + "\" y=\"" + fmt("%.0f", top - 8) + "\" font-size=\"13\">" +
         escape(label) + "</text>\n";
  out += "  <text x=\"" + fmt("%.0f", kLeft - 6) + "\" y=\"" + fmt("%.1f", top + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">" + fmt("%.4g", p.ymax) + "</text>\n";
  out += "  <text x=\"" + fmt("%.0f", kLeft - 6) + "\" y=\"" + fmt("%.1f", bottom) +
         "\" font-size=\"11\" text-anchor=\"end\">" + fmt("%.4g", p.ymin) + "</text>\n";
  out += "  <text x=\"" + fmt("%.0f", kLeft) + "\" y=\"" + fmt("%.0f", bottom + 16) + "\" font-size=\"11\">1</text>\n";
  out += "  <text x=\"" + fmt("%.0f", kWidth - kRight) + "\" y=\"" + fmt("%.0f", bottom + 16) +
         "\" font-size=\"11\" text-anchor=\"end\">" + fmt("%.0f", static_cast<double>(p.epochs)) + "</text>\n";
  out += "  <text x=\"" + fmt("%.0f", (kLeft + kWidth - kRight) / 2) + "\" y=\"" + fmt("%.0f", bottom + 16) +
         "\" font-size=\"11\" text-anchor=\"middle\">epoch</text>\n";
  const auto sgd = std::find_if(rows.begin(), rows.end(), [](const EpochRecord& r) { return r.phase == Phase::Sgd; });
  if (sgd != rows.end()) {
    const double x = p.x(static_cast<double>(sgd->epoch));
    out += "  <line x1=\"" + fmt("%.2f", x) + "\" y1=\"" + fmt("%.0f", top) + "\" x2=\"" + fmt("%.2f", x) +
           "\" y2=\"" + fmt("%.0f", bottom) + "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }
  return out;
}

}  // namespace

std::string render_history_svg(const TrainHistory& history, std::string_view title) {
  const auto& rows = history.epochs;
  const std::size_t n = rows.empty() ? 1 : rows.back().epoch;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rows) {
    lo = std::min({lo, r.train_loss, r.val_loss});
    hi = std::max({hi, r.train_loss, r.val_loss});
  }
  if (rows.empty()) lo = 0.0, hi = 1.0;
  const Panel loss{0, std::min(lo, 0.0), hi, n};
  const Panel acc{kPanelHeight, 0.0, 100.0, n};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) + "\" height=\"" +
         fmt("%.0f", 2 * kPanelHeight + 20) + "\" font-family=\"sans-serif\">\n";
  out += "  <text x=\"" + fmt("%.0f", kWidth / 2) + "\" y=\"18\" font-size=\"15\" text-anchor=\"middle\">" +
         escape(title) + "</text>\n";
  out += frame(loss, "loss (blue: training, orange: monitored)", rows);
  out += polyline(loss, rows, &EpochRecord::train_loss, "#1f77b4");
  out += polyline(loss, rows, &EpochRecord::val_loss, "#ff7f0e");
  out += frame(acc, "monitored accuracy (%)", rows);
  out += polyline(acc, rows, &EpochRecord::val_accuracy, "#2ca02c");
  if (history.best_epoch > 0) {
    out += "  <text x=\"" + fmt("%.0f", kWidth - kRight) + "\" y=\"" + fmt("%.0f", 2 * kPanelHeight + 12) +
           "\" font-size=\"11\" text-anchor=\"end\">best epoch " +
           std::to_string(history.best_epoch) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mtvqa::harness
