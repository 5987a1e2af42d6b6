#include "unfold/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "unfold/errors.hpp"

namespace unfold {

namespace {

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kLeft = 72.0, kRight = 24.0, kTop = 40.0, kBottom = 56.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log_scale = false;
  std::vector<double> ticks;  // in plot units (log10 if log_scale)

  double to_unit(double v) const { return (v - lo) / (hi - lo); }
};

Axis make_axis(double lo, double hi, bool log_scale) {
  Axis ax;
  ax.log_scale = log_scale;
  if (!(hi > lo)) {
    const double pad = std::max(std::fabs(lo) * 0.05, 0.5);
    lo -= pad;
    hi += pad;
  }
  if (log_scale) {
    // Decade ticks over [lo, hi] already in log10 units.
    ax.lo = lo;
    ax.hi = hi;
    const int k0 = int(std::ceil(lo - 1e-9));
    const int k1 = int(std::floor(hi + 1e-9));
    for (int k = k0; k <= k1; ++k) ax.ticks.push_back(double(k));
    if (ax.ticks.empty()) {
      ax.ticks.push_back(lo);
      ax.ticks.push_back(hi);
    }
    return ax;
  }
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
  const double t0 = std::ceil(lo / step) * step;
  ax.lo = lo;
  ax.hi = hi;
  for (double t = t0; t <= hi + step * 1e-9; t += step)
    ax.ticks.push_back(std::fabs(t) < step * 1e-9 ? 0.0 : t);
  return ax;
}

std::string tick_label(const Axis& ax, double t) {
  if (ax.log_scale) {
    if (std::fabs(t - std::round(t)) < 1e-9) return "1e" + fmt(std::round(t), "%.0f");
    return fmt(std::pow(10.0, t), "%.3g");
  }
  return fmt(t, "%.3g");
}

}  // namespace

std::string render_svg(const SvgPlot& plot) {
  // Transform points into plot units and gather ranges.
  std::vector<std::vector<std::pair<double, double>>> data(plot.series.size());
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool first = true;
  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    for (auto [x, y] : plot.series[s].points) {
      if (plot.log_x) {
        if (!(x > 0.0)) throw ConfigError("log-scale x requires positive values");
        x = std::log10(x);
      }
      if (plot.log_y) {
        if (!(y > 0.0)) throw ConfigError("log-scale y requires positive values");
        y = std::log10(y);
      }
      if (!std::isfinite(x) || !std::isfinite(y))
        throw ConfigError("plot point is not finite");
      data[s].emplace_back(x, y);
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (first) throw ConfigError("plot has no points");

  const double ypad = (ymax - ymin) > 0 ? (ymax - ymin) * 0.06 : 0.0;
  Axis xa = make_axis(xmin, xmax, plot.log_x);
  Axis ya = make_axis(ymin - ypad, ymax + ypad, plot.log_y);

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + xa.to_unit(x) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - ya.to_unit(y)) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << int(kWidth)
      << "\" height=\"" << int(kHeight) << "\" viewBox=\"0 0 " << int(kWidth) << " "
      << int(kHeight) << "\">\n";
  if (plot.timestamp) {
    char stamp[64];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc;
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    out << "<!-- generated " << stamp << " -->\n";
  }
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(kWidth / 2, "%.1f")
      << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" "
         "text-anchor=\"middle\">"
      << escape(plot.title) << "</text>\n";

  // Frame.
  out << "<rect x=\"" << fmt(kLeft, "%.1f") << "\" y=\"" << fmt(kTop, "%.1f")
      << "\" width=\"" << fmt(pw, "%.1f") << "\" height=\"" << fmt(ph, "%.1f")
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // Ticks and grid.
  for (double t : xa.ticks) {
    const double x = px(t);
    out << "<line x1=\"" << fmt(x, "%.2f") << "\" y1=\"" << fmt(kTop, "%.1f")
        << "\" x2=\"" << fmt(x, "%.2f") << "\" y2=\"" << fmt(kTop + ph, "%.1f")
        << "\" stroke=\"#ddd\"/>\n";
    out << "<line x1=\"" << fmt(x, "%.2f") << "\" y1=\"" << fmt(kTop + ph, "%.1f")
        << "\" x2=\"" << fmt(x, "%.2f") << "\" y2=\"" << fmt(kTop + ph + 5, "%.1f")
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << fmt(x, "%.2f") << "\" y=\"" << fmt(kTop + ph + 18, "%.1f")
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
        << tick_label(xa, t) << "</text>\n";
  }
  for (double t : ya.ticks) {
    const double y = py(t);
    out << "<line x1=\"" << fmt(kLeft, "%.1f") << "\" y1=\"" << fmt(y, "%.2f")
        << "\" x2=\"" << fmt(kLeft + pw, "%.1f") << "\" y2=\"" << fmt(y, "%.2f")
        << "\" stroke=\"#ddd\"/>\n";
    out << "<line x1=\"" << fmt(kLeft - 5, "%.1f") << "\" y1=\"" << fmt(y, "%.2f")
        << "\" x2=\"" << fmt(kLeft, "%.1f") << "\" y2=\"" << fmt(y, "%.2f")
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << fmt(kLeft - 8, "%.1f") << "\" y=\"" << fmt(y + 4, "%.2f")
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
        << tick_label(ya, t) << "</text>\n";
  }

  // Axis labels.
  out << "<text x=\"" << fmt(kLeft + pw / 2, "%.1f") << "\" y=\""
      << fmt(kHeight - 12, "%.1f")
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
      << escape(plot.x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << fmt(kTop + ph / 2, "%.1f")
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 "
      << fmt(kTop + ph / 2, "%.1f") << ")\">" << escape(plot.y_label) << "</text>\n";

  // Series.
  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    if (data[s].empty()) continue;
    const std::string color = plot.series[s].color.empty()
                                  ? kPalette[s % (sizeof kPalette / sizeof *kPalette)]
                                  : plot.series[s].color;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (plot.series[s].dashed) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (std::size_t i = 0; i < data[s].size(); ++i) {
      if (i) out << ' ';
      out << fmt(px(data[s][i].first), "%.2f") << ','
          << fmt(py(data[s][i].second), "%.2f");
    }
    out << "\"/>\n";
  }

  // Legend, top-right inside the frame.
  double ly = kTop + 16;
  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    if (plot.series[s].label.empty()) continue;
    const std::string color = plot.series[s].color.empty()
                                  ? kPalette[s % (sizeof kPalette / sizeof *kPalette)]
                                  : plot.series[s].color;
    const double lx = kLeft + pw - 150;
    out << "<line x1=\"" << fmt(lx, "%.1f") << "\" y1=\"" << fmt(ly - 4, "%.1f")
        << "\" x2=\"" << fmt(lx + 22, "%.1f") << "\" y2=\"" << fmt(ly - 4, "%.1f")
        << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (plot.series[s].dashed) out << " stroke-dasharray=\"6 4\"";
    out << "/>\n";
    out << "<text x=\"" << fmt(lx + 28, "%.1f") << "\" y=\"" << fmt(ly, "%.1f")
        << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape(plot.series[s].label) << "</text>\n";
    ly += 16;
  }

  out << "</svg>\n";
  return out.str();
}

void write_svg(const SvgPlot& plot, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write SVG: " + path);
  out << render_svg(plot);
  if (!out) throw IoError("short write on SVG: " + path);
}

}  // namespace unfold
