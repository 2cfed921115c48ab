#pragma once

#include <string>
#include <vector>

namespace gesturelab::tools {

struct Series {
  std::string label;
  std::vector<double> ys;
};

// Minimal static SVG charts; output is deterministic (fixed formatting, no
// timestamps) so plot files participate in byte-identity checks.
std::string line_chart_svg(const std::string& title, const std::vector<double>& xs,
                           const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label);
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& y_label);

}  // namespace gesturelab::tools
