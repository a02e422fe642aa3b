#include "qalign/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "qalign/core.hpp"

namespace qalign {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Frame {
  double x0, x1, y0, y1;
  bool log_x;

  double tx(double x) const {
    double a = log_x ? std::log10(x) : x;
    double lo = log_x ? std::log10(x0) : x0;
    double hi = log_x ? std::log10(x1) : x1;
    double span = hi > lo ? hi - lo : 1.0;
    return kLeft + (a - lo) / span * (kWidth - kLeft - kRight);
  }
  double ty(double y) const {
    double span = y1 > y0 ? y1 - y0 : 1.0;
    return kHeight - kBottom - (y - y0) / span * (kHeight - kTop - kBottom);
  }
};

std::string header(const SvgAxes& axes, const Frame& f) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
                  num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(axes.title) + "</text>\n";
  const double bx = kLeft, by = kHeight - kBottom, ex = kWidth - kRight, ey = kTop;
  s += "<path d=\"M" + num(bx) + " " + num(ey) + " L" + num(bx) + " " + num(by) + " L" + num(ex) + " " + num(by) +
       "\" stroke=\"black\" fill=\"none\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    double xv = f.log_x ? std::pow(10.0, std::log10(f.x0) + (std::log10(f.x1) - std::log10(f.x0)) * i / 4.0)
                        : f.x0 + (f.x1 - f.x0) * i / 4.0;
    s += "<text x=\"" + num(bx - 5) + "\" y=\"" + num(f.ty(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) +
         "</text>\n";
    s += "<text x=\"" + num(f.tx(xv)) + "\" y=\"" + num(by + 15) + "\" text-anchor=\"middle\">" + tick(xv) +
         "</text>\n";
  }
  s += "<text x=\"" + num((bx + ex) / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
       escape(axes.x_label) + "</text>\n";
  s += "<text x=\"15\" y=\"" + num((by + ey) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
       num((by + ey) / 2) + ")\">" + escape(axes.y_label) + "</text>\n";
  return s;
}

std::string polyline(const Frame& f, const SvgSeries& s, const char* color) {
  std::string out = "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    if (i) out += ' ';
    out += num(f.tx(s.xs[i])) + "," + num(f.ty(s.ys[i]));
  }
  return out + "\"/>\n";
}

std::string legend(std::span<const SvgSeries> series, std::size_t offset) {
  std::string out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[(i + offset) % std::size(kPalette)];
    double y = kTop + 15.0 * static_cast<double>(i + offset);
    out += "<rect x=\"" + num(kWidth - kRight + 10) + "\" y=\"" + num(y - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
           color + "\"/>\n";
    out += "<text x=\"" + num(kWidth - kRight + 25) + "\" y=\"" + num(y) + "\">" + escape(series[i].label) +
           "</text>\n";
  }
  return out;
}

void extend(double v, double& lo, double& hi) {
  if (!std::isfinite(v)) return;
  lo = std::min(lo, v);
  hi = std::max(hi, v);
}

void widen(double& lo, double& hi) {
  if (!(lo <= hi)) {
    lo = 0.0;
    hi = 1.0;
  } else if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
}

}  // namespace

std::string svg_line_chart(const SvgAxes& axes, std::span<const SvgSeries> series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) throw Error("series '" + s.label + "' has mismatched x/y lengths");
    for (double x : s.xs) {
      if (axes.log_x && !(x > 0.0)) throw Error("log-scale x axis needs positive values");
      extend(x, x0, x1);
    }
    for (double y : s.ys) extend(y, y0, y1);
  }
  widen(x0, x1);
  widen(y0, y1);
  if (axes.log_x && x0 <= 0.0) x0 = x1 / 10.0;
  Frame f{x0, x1, y0, y1, axes.log_x};
  std::string out = header(axes, f);
  for (std::size_t i = 0; i < series.size(); ++i) out += polyline(f, series[i], kPalette[i % std::size(kPalette)]);
  out += legend(series, 0);
  return out + "</svg>\n";
}

std::string svg_histogram(const SvgAxes& axes, std::span<const double> data, int bins,
                          std::span<const SvgSeries> overlays) {
  if (data.empty()) throw Error("histogram of an empty sample");
  if (bins < 1) throw Error("histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : data) extend(v, lo, hi);
  widen(lo, hi);
  const double width = (hi - lo) / bins;
  std::vector<double> density(static_cast<std::size_t>(bins), 0.0);
  for (double v : data) {
    if (!std::isfinite(v)) continue;
    auto b = static_cast<std::size_t>(std::clamp((v - lo) / width, 0.0, static_cast<double>(bins - 1)));
    density[b] += 1.0;
  }
  for (double& d : density) d /= static_cast<double>(data.size()) * width;

  double x0 = lo, x1 = hi, y0 = 0.0, y1 = 0.0;
  for (double d : density) y1 = std::max(y1, d);
  for (const auto& s : overlays) {
    for (double x : s.xs) extend(x, x0, x1);
    for (double y : s.ys) extend(y, y0, y1);
  }
  widen(y0, y1);
  Frame f{x0, x1, y0, y1, false};
  std::string out = header(axes, f);
  for (int b = 0; b < bins; ++b) {
    double left = lo + width * b;
    double top = f.ty(density[static_cast<std::size_t>(b)]);
    out += "<rect x=\"" + num(f.tx(left)) + "\" y=\"" + num(top) + "\" width=\"" +
           num(f.tx(left + width) - f.tx(left)) + "\" height=\"" + num(f.ty(0.0) - top) +
           "\" fill=\"#c7c7c7\" stroke=\"white\"/>\n";
  }
  for (std::size_t i = 0; i < overlays.size(); ++i) out += polyline(f, overlays[i], kPalette[i % std::size(kPalette)]);
  out += legend(overlays, 0);
  return out + "</svg>\n";
}

}  // namespace qalign
