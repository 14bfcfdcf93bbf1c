#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dsrc::svgplot {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal hand-rolled SVG line plot: axes, tick labels, legend.
void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series, bool log_y = false);

}  // namespace dsrc::svgplot
