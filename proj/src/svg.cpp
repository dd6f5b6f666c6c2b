#include "gamaudit/svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace gamaudit::svg {

Range range_of(const FeatureShape& s) {
  Range r;
  if (!s.grid.empty()) {
    r.x_min = s.grid.front();
    r.x_max = s.grid.back();
  }
  if (!(r.x_max > r.x_min)) r.x_max = r.x_min + 1.0;
  double lo = 0.0, hi = 0.0;
  for (const double v : s.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  if (span > 0.0) {
    r.y_min = lo - 0.05 * span;
    r.y_max = hi + 0.05 * span;
  } else {
    r.y_min = lo - 1.0;
    r.y_max = hi + 1.0;
  }
  return r;
}

double px_x(const Range& r, const Layout& l, double x) {
  const double w = l.width - l.margin_left - l.margin_right;
  return l.margin_left + (x - r.x_min) / (r.x_max - r.x_min) * w;
}

double px_y(const Range& r, const Layout& l, double y) {
  const double h = l.height - l.margin_top - l.margin_bottom;
  return l.margin_top + (r.y_max - y) / (r.y_max - r.y_min) * h;
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
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

// Panel body without the <svg> wrapper, translated by (dx, dy).
std::string panel(const FeatureShape& s, const std::string& title, const Layout& l, double dx, double dy) {
  const auto r = range_of(s);
  const double x0 = l.margin_left, x1 = l.width - l.margin_right;
  const double y0 = l.margin_top, y1 = l.height - l.margin_bottom;
  std::string out = fmt::format("<g transform=\"translate({},{})\">\n", dx, dy);
  out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n", x0, y0,
                     x1 - x0, y1 - y0);
  const double zero = px_y(r, l, 0.0);
  out += fmt::format("<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#ccc\" stroke-dasharray=\"4 3\"/>\n",
                     x0, zero, x1, zero);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2,
                     y0 - 10, escape(title));
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"start\">{:.3g}</text>\n", x0, y1 + 16,
                     r.x_min);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n", x1, y1 + 16,
                     r.x_max);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2,
                     y1 + 32, escape(s.feature));
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n", x0 - 4, y0 + 4,
                     r.y_max);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n", x0 - 4, y1,
                     r.y_min);
  out += "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    if (i > 0) out += ' ';
    out += fmt::format("{:.2f},{:.2f}", px_x(r, l, s.grid[i]), px_y(r, l, s.values[i]));
  }
  out += "\"/>\n</g>\n";
  return out;
}

std::string open_svg(double w, double h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      w, h);
}

}  // namespace

std::string shape_chart(const FeatureShape& s, const std::string& title, const Layout& l) {
  return open_svg(l.width, l.height) + panel(s, title, l, 0, 0) + "</svg>\n";
}

std::string overview(std::span<const PanelColumn> columns, const Layout& l) {
  constexpr double kHeader = 24;
  std::size_t rows = 0;
  for (const auto& c : columns) rows = std::max(rows, c.shapes.size());
  const double w = l.width * static_cast<double>(columns.size());
  const double h = kHeader + l.height * static_cast<double>(rows);
  std::string out = open_svg(w, h);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const double dx = l.width * static_cast<double>(c);
    out += fmt::format("<text x=\"{}\" y=\"17\" font-size=\"14\" font-weight=\"bold\" text-anchor=\"middle\">{}</text>\n",
                       dx + l.width / 2, escape(columns[c].heading));
    for (std::size_t i = 0; i < columns[c].shapes.size(); ++i) {
      const auto& s = columns[c].shapes[i];
      out += panel(s, fmt::format("{} (sd {:.3g})", s.feature, s.shape_sd), l, dx,
                   kHeader + l.height * static_cast<double>(i));
    }
  }
  return out + "</svg>\n";
}

std::string shape_csv(const FeatureShape& s) {
  std::string out = "grid,value\n";
  for (std::size_t i = 0; i < s.grid.size(); ++i) out += fmt::format("{},{}\n", s.grid[i], s.values[i]);
  return out;
}

}  // namespace gamaudit::svg
