#pragma once

#include <span>
#include <string>
#include <vector>

namespace qalign {

struct SvgSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct SvgAxes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
};

/// Polyline chart with one line per series and a legend. Output is byte-deterministic.
std::string svg_line_chart(const SvgAxes& axes, std::span<const SvgSeries> series);

/// Density-normalized histogram of `data` with optional density curves drawn on top.
std::string svg_histogram(const SvgAxes& axes, std::span<const double> data, int bins,
                          std::span<const SvgSeries> overlays = {});

}  // namespace qalign
