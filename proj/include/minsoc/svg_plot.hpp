#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace minsoc::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool steps = false;  // draw as a staircase (piecewise-constant signal)
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  int width = 900;
  int height = 420;
};

/// Standalone SVG line chart with labelled axes, ticks and a legend.
std::string render(const Chart& chart);
void write(const std::filesystem::path& path, const Chart& chart);

}  // namespace minsoc::svg
