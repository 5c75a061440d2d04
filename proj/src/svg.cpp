#include "mfgkit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mfgkit/errors.hpp"

namespace mfgkit {

namespace {
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
}

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (!(xmin <= xmax)) {
        xmin = 0.0;
        xmax = 1.0;
    }
    if (!(ymin <= ymax)) {
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double W = 720, H = 440, mL = 70, mR = 20, mT = 40, mB = 50;
    auto px = [&](double x) { return mL + (x - xmin) / (xmax - xmin) * (W - mL - mR); };
    auto py = [&](double y) { return H - mB - (y - ymin) / (ymax - ymin) * (H - mT - mB); };

    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.precision(8);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
    // axes + ticks
    f << "<line x1=\"" << mL << "\" y1=\"" << H - mB << "\" x2=\"" << W - mR << "\" y2=\""
      << H - mB << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << mL << "\" y1=\"" << mT << "\" x2=\"" << mL << "\" y2=\"" << H - mB
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double tx = xmin + (xmax - xmin) * i / 5.0;
        const double ty = ymin + (ymax - ymin) * i / 5.0;
        f << "<line x1=\"" << px(tx) << "\" y1=\"" << H - mB << "\" x2=\"" << px(tx) << "\" y2=\""
          << H - mB + 4 << "\" stroke=\"black\"/>\n";
        f << "<text x=\"" << px(tx) << "\" y=\"" << H - mB + 18
          << "\" text-anchor=\"middle\" font-size=\"11\">" << tx << "</text>\n";
        f << "<line x1=\"" << mL - 4 << "\" y1=\"" << py(ty) << "\" x2=\"" << mL << "\" y2=\""
          << py(ty) << "\" stroke=\"black\"/>\n";
        f << "<text x=\"" << mL - 8 << "\" y=\"" << py(ty) + 4
          << "\" text-anchor=\"end\" font-size=\"11\">" << ty << "</text>\n";
    }
    f << "<text x=\"" << (mL + W - mR) / 2 << "\" y=\"" << H - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    f << "<text x=\"16\" y=\"" << (mT + H - mB) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (mT + H - mB) / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % 6];
        f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i)
            f << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
        f << "\"/>\n";
        f << "<text x=\"" << W - mR - 6 << "\" y=\"" << mT + 16 * (s + 1)
          << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">" << series[s].name
          << "</text>\n";
    }
    f << "</svg>\n";
}

}  // namespace mfgkit
