#pragma once

#include <string>
#include <vector>

namespace mfgkit {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal self-contained SVG line chart (no plotting dependency). Output is
/// deterministic for identical inputs.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

}  // namespace mfgkit
