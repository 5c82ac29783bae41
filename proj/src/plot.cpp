#include "seea/plot.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

#include "seea/tensor.hpp"

namespace seea {

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<PlotSeries>& series) {
  const int W = 900, H = 600;
  const int ml = 90, mr = 30, mt = 60, mb = 70;  // margins
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));

  double lo = 0.0, hi = 1e-9;
  size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (n == 0) n = 1;
  if (hi <= lo) hi = lo + 1.0;
  const double span = hi - lo;
  hi += 0.05 * span;
  lo -= lo == 0.0 ? 0.0 : 0.05 * span;

  auto px = [&](size_t i) {
    if (n == 1) return ml;
    return ml + static_cast<int>(std::lround((W - ml - mr) * static_cast<double>(i) /
                                             static_cast<double>(n - 1)));
  };
  auto py = [&](double v) {
    return mt + static_cast<int>(std::lround((H - mt - mb) * (hi - v) / (hi - lo)));
  };

  const cv::Scalar axis(60, 60, 60);
  cv::line(img, {ml, mt}, {ml, H - mb}, axis, 1);
  cv::line(img, {ml, H - mb}, {W - mr, H - mb}, axis, 1);
  cv::putText(img, title, {ml, mt - 25}, cv::FONT_HERSHEY_SIMPLEX, 0.7, axis, 1, cv::LINE_AA);
  cv::putText(img, y_label, {10, mt - 5}, cv::FONT_HERSHEY_SIMPLEX, 0.5, axis, 1, cv::LINE_AA);
  cv::putText(img, "epoch", {W / 2 - 20, H - 20}, cv::FONT_HERSHEY_SIMPLEX, 0.5, axis, 1,
              cv::LINE_AA);

  for (int t = 0; t <= 5; ++t) {
    const double v = lo + (hi - lo) * t / 5.0;
    const int y = py(v);
    cv::line(img, {ml - 4, y}, {ml, y}, axis, 1);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    cv::putText(img, buf, {8, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1, cv::LINE_AA);
  }
  for (size_t i = 0; i < n; ++i) {
    const int x = px(i);
    cv::line(img, {x, H - mb}, {x, H - mb + 4}, axis, 1);
    cv::putText(img, std::to_string(i + 1), {x - 6, H - mb + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                axis, 1, cv::LINE_AA);
  }

  int legend_y = mt + 10;
  for (const auto& s : series) {
    const cv::Scalar color(s.rgb[2], s.rgb[1], s.rgb[0]);
    for (size_t i = 0; i + 1 < s.values.size(); ++i) {
      cv::line(img, {px(i), py(s.values[i])}, {px(i + 1), py(s.values[i + 1])}, color, 2,
               cv::LINE_AA);
    }
    if (s.values.size() == 1) {
      cv::circle(img, {px(0), py(s.values[0])}, 3, color, cv::FILLED);
    }
    cv::line(img, {W - mr - 150, legend_y}, {W - mr - 120, legend_y}, color, 2);
    cv::putText(img, s.label, {W - mr - 112, legend_y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.45, axis,
                1, cv::LINE_AA);
    legend_y += 20;
  }

  if (!cv::imwrite(path, img)) {
    throw IoError("cannot write plot: " + path);
  }
}

}  // namespace seea
