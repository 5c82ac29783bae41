#pragma once

#include <string>
#include <vector>

namespace seea {

struct PlotSeries {
  std::string label;
  std::vector<double> values;        // x is the 1-based index (epoch)
  unsigned char rgb[3] = {0, 0, 0};
};

/// Renders a simple line plot (axes, ticks, legend) to a PNG file.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace seea
