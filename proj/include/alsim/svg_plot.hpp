#pragma once

// Learning-curve rendering to standalone SVG. The root element carries the
// data-to-pixel calibration as data-* attributes and every curve point is
// emitted as a circle, so tests can recover plotted values from the markup.

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "alsim/metrics.hpp"
#include "alsim/textio.hpp"

namespace alsim {

struct PlotSeries {
  std::string name;
  std::vector<CurvePoint> points;
};

struct PlotOptions {
  std::string title = "learning curves";
  std::string x_label = "labeled fraction";
  std::string y_label = "metric";
  double width = 800.0;
  double height = 500.0;
};

namespace detail {

inline std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Tol bright palette; cycles when a plot has more series than entries.
inline const char* series_color(std::size_t i) {
  static const char* kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                                   "#66ccee", "#aa3377", "#bbbbbb", "#222222"};
  return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

inline AxisRange padded(double lo, double hi, double pad_fraction,
                        double min_pad) {
  if (hi < lo) std::swap(lo, hi);
  double pad = std::max((hi - lo) * pad_fraction, min_pad);
  if (hi == lo) pad = std::max(std::abs(lo) * 0.1, min_pad);
  return {lo - pad, hi + pad};
}

}  // namespace detail

/// Renders mean curves with +-stddev bands, one color per series, a legend,
/// labeled ticks and axis titles. Output is deterministic for fixed input.
inline std::string render_curves_svg(const std::vector<PlotSeries>& series,
                                     const PlotOptions& opts = {}) {
  if (series.empty()) {
    throw std::invalid_argument("plot needs at least one series");
  }
  double fx_lo = 0.0, fx_hi = 0.0, fy_lo = 0.0, fy_hi = 0.0;
  bool first = true;
  for (const PlotSeries& s : series) {
    if (s.points.empty()) {
      throw std::invalid_argument("series '" + s.name + "' has no points");
    }
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const CurvePoint& p = s.points[i];
      if (i > 0 && !(p.fraction > s.points[i - 1].fraction)) {
        throw std::invalid_argument("series '" + s.name +
                                    "' fractions must increase");
      }
      if (first) {
        fx_lo = fx_hi = p.fraction;
        fy_lo = p.mean - p.stddev;
        fy_hi = p.mean + p.stddev;
        first = false;
      } else {
        fx_lo = std::min(fx_lo, p.fraction);
        fx_hi = std::max(fx_hi, p.fraction);
        fy_lo = std::min(fy_lo, p.mean - p.stddev);
        fy_hi = std::max(fy_hi, p.mean + p.stddev);
      }
    }
  }
  const auto xr = detail::padded(fx_lo, fx_hi, 0.02, 0.005);
  const auto yr = detail::padded(fy_lo, fy_hi, 0.05, 0.01);

  const double left = 70.0, right = 150.0, top = 40.0, bottom = 55.0;
  const double px0 = left, px1 = opts.width - right;
  const double py0 = opts.height - bottom, py1 = top;  // y grows upward
  auto map_x = [&](double x) {
    return px0 + (x - xr.lo) / (xr.hi - xr.lo) * (px1 - px0);
  };
  auto map_y = [&](double y) {
    return py0 + (y - yr.lo) / (yr.hi - yr.lo) * (py1 - py0);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         detail::px(opts.width) + "\" height=\"" + detail::px(opts.height) +
         "\" viewBox=\"0 0 " + detail::px(opts.width) + " " +
         detail::px(opts.height) + "\"";
  svg += " data-x0=\"" + format_double(xr.lo) + "\" data-x1=\"" +
         format_double(xr.hi) + "\"";
  svg += " data-y0=\"" + format_double(yr.lo) + "\" data-y1=\"" +
         format_double(yr.hi) + "\"";
  svg += " data-px0=\"" + format_double(px0) + "\" data-px1=\"" +
         format_double(px1) + "\"";
  svg += " data-py0=\"" + format_double(py0) + "\" data-py1=\"" +
         format_double(py1) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  svg += "<text x=\"" + detail::px((px0 + px1) / 2) + "\" y=\"24\" " +
         "text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         detail::escape_xml(opts.title) + "</text>\n";

  // Axes with 5 ticks each.
  svg += "<line x1=\"" + detail::px(px0) + "\" y1=\"" + detail::px(py0) +
         "\" x2=\"" + detail::px(px1) + "\" y2=\"" + detail::px(py0) +
         "\" stroke=\"#333333\"/>\n";
  svg += "<line x1=\"" + detail::px(px0) + "\" y1=\"" + detail::px(py0) +
         "\" x2=\"" + detail::px(px0) + "\" y2=\"" + detail::px(py1) +
         "\" stroke=\"#333333\"/>\n";
  for (int i = 0; i < 5; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double cx = map_x(fx);
    svg += "<line x1=\"" + detail::px(cx) + "\" y1=\"" + detail::px(py0) +
           "\" x2=\"" + detail::px(cx) + "\" y2=\"" + detail::px(py0 + 5) +
           "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + detail::px(cx) + "\" y=\"" + detail::px(py0 + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           detail::tick_label(fx) + "</text>\n";
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double cy = map_y(fy);
    svg += "<line x1=\"" + detail::px(px0 - 5) + "\" y1=\"" + detail::px(cy) +
           "\" x2=\"" + detail::px(px0) + "\" y2=\"" + detail::px(cy) +
           "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + detail::px(px0 - 8) + "\" y=\"" +
           detail::px(cy + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           detail::tick_label(fy) + "</text>\n";
  }
  svg += "<text x=\"" + detail::px((px0 + px1) / 2) + "\" y=\"" +
         detail::px(opts.height - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" +
         detail::escape_xml(opts.x_label) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + detail::px((py0 + py1) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 18 " +
         detail::px((py0 + py1) / 2) + ")\">" +
         detail::escape_xml(opts.y_label) + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const std::string color = detail::series_color(si);
    const std::string name = detail::escape_xml(s.name);

    bool has_band = false;
    for (const CurvePoint& p : s.points) has_band |= p.stddev > 0.0;
    if (has_band && s.points.size() > 1) {
      std::string d;
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        d += (i == 0 ? "M" : "L") + detail::px(map_x(s.points[i].fraction)) +
             " " + detail::px(map_y(s.points[i].mean + s.points[i].stddev));
      }
      for (std::size_t i = s.points.size(); i-- > 0;) {
        d += "L" + detail::px(map_x(s.points[i].fraction)) + " " +
             detail::px(map_y(s.points[i].mean - s.points[i].stddev));
      }
      d += "Z";
      svg += "<path class=\"band\" data-series=\"" + name + "\" d=\"" + d +
             "\" fill=\"" + color + "\" fill-opacity=\"0.15\" "
             "stroke=\"none\"/>\n";
    }

    if (s.points.size() > 1) {
      std::string pts;
      for (const CurvePoint& p : s.points) {
        if (!pts.empty()) pts += " ";
        pts += detail::px(map_x(p.fraction)) + "," + detail::px(map_y(p.mean));
      }
      svg += "<polyline class=\"mean\" data-series=\"" + name +
             "\" points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
    }
    for (const CurvePoint& p : s.points) {
      svg += "<circle class=\"pt\" data-series=\"" + name + "\" cx=\"" +
             detail::px(map_x(p.fraction)) + "\" cy=\"" +
             detail::px(map_y(p.mean)) + "\" r=\"3\" fill=\"" + color +
             "\"/>\n";
    }

    const double ly = top + 14.0 + 20.0 * static_cast<double>(si);
    svg += "<rect x=\"" + detail::px(px1 + 16) + "\" y=\"" +
           detail::px(ly - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
           color + "\"/>\n";
    svg += "<text class=\"legend\" x=\"" + detail::px(px1 + 34) + "\" y=\"" +
           detail::px(ly) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + name +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace alsim
