#pragma once

#include <string>
#include <utility>
#include <vector>

namespace unfold {

struct SvgSeries {
  std::string label;
  std::string color;  // empty picks from the default palette
  std::vector<std::pair<double, double>> points;
  bool dashed = false;
};

struct SvgPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  bool timestamp = true;  // emits a generation-time comment; off for byte-stable runs
  std::vector<SvgSeries> series;
};

std::string render_svg(const SvgPlot& plot);
void write_svg(const SvgPlot& plot, const std::string& path);

}  // namespace unfold
