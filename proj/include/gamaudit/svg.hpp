#pragma once

#include <span>
#include <string>
#include <vector>

#include "gamaudit/gam.hpp"

namespace gamaudit::svg {

// Panel geometry in pixels. The plot area spans
//   x: [margin_left, width - margin_right]
//   y: [margin_top, height - margin_bottom]
struct Layout {
  double width = 480;
  double height = 320;
  double margin_left = 60;
  double margin_right = 20;
  double margin_top = 30;
  double margin_bottom = 40;
};

struct Range {
  double x_min = 0, x_max = 1;
  double y_min = 0, y_max = 1;
};

// x spans the grid; y spans the values and 0, padded by 5% of the span on
// both sides (a flat shape gets +-1 around its level).
Range range_of(const FeatureShape& s);

double px_x(const Range& r, const Layout& l, double x);
double px_y(const Range& r, const Layout& l, double y);

// One standalone chart. Polyline vertices are written with two decimals.
std::string shape_chart(const FeatureShape& s, const std::string& title, const Layout& l = {});

struct PanelColumn {
  std::string heading;
  std::vector<FeatureShape> shapes;
};

// Grid of panels: one column per model, one row per feature.
std::string overview(std::span<const PanelColumn> columns, const Layout& l = {});

// "grid,value" rows.
std::string shape_csv(const FeatureShape& s);

}  // namespace gamaudit::svg
