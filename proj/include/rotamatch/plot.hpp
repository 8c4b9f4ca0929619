#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rotamatch/geometry.hpp"

namespace rotamatch::plot {

struct Color {
  double r = 0, g = 0, b = 0;
};

// Fixed series palette; index wraps.
const Color& palette(size_t i);

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> ci_half;  // optional CI half-width per point, else empty
  Color color;
};

struct PlotConfig {
  int width = 720, height = 540;
  std::string title, xlabel, ylabel;
  // Axis limits; auto-fitted over the data when min >= max.
  double xmin = 0, xmax = -1;
  double ymin = 0, ymax = -1;
};

// Line chart with optional CI bands, tick labels, and a legend, rendered with
// an internal 5x7 bitmap font. Output depends only on the inputs.
geom::Image render_plot(const PlotConfig& cfg, const std::vector<Series>& series);

void write_plot(const std::filesystem::path& path, const PlotConfig& cfg,
                const std::vector<Series>& series);

}  // namespace rotamatch::plot
