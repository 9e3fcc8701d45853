#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cardloss {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
};

/// Static line chart: axes with ticks, a legend, one <polyline> per series.
/// Non-finite points are skipped.
std::string render_line_chart(const ChartSpec& chart, const std::vector<Series>& series);

void write_line_chart(const std::filesystem::path& path, const ChartSpec& chart,
                      const std::vector<Series>& series);

}  // namespace cardloss
