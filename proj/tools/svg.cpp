#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "util.hpp"

namespace dimtool {

namespace {
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<ChartSeries>& series, bool log_x,
                     bool log_y) {
  const double W = 860, H = 520, ml = 90, mr = 180, mt = 50, mb = 60;
  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  auto tx = [&](double v) { return log_x ? std::log10(std::max(v, 1e-300)) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      x_min = std::min(x_min, tx(x));
      x_max = std::max(x_max, tx(x));
      y_min = std::min(y_min, ty(y));
      y_max = std::max(y_max, ty(y));
    }
  if (x_min > x_max) throw std::invalid_argument("chart has no points");
  if (x_max - x_min < 1e-12) x_max = x_min + 1;
  if (y_max - y_min < 1e-12) y_max = y_min + 1;
  auto px = [&](double x) {
    return ml + (tx(x) - x_min) / (x_max - x_min) * (W - ml - mr);
  };
  auto py = [&](double y) {
    return H - mb - (ty(y) - y_min) / (y_max - y_min) * (H - mt - mb);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write chart: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 16
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label
      << (log_x ? " (log)" : "") << "</text>\n";
  out << "<text x=\"20\" y=\"" << (mt + H - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 "
      << (mt + H - mb) / 2 << ")\">" << y_label << (log_y ? " (log)" : "")
      << "</text>\n";
  // Axis extremes.
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4g", log_x || log_y ? v : v);
    return std::string(buf);
  };
  out << "<text x=\"" << ml << "\" y=\"" << H - mb + 18
      << "\" font-size=\"11\" text-anchor=\"middle\">"
      << fmt(log_x ? std::pow(10, x_min) : x_min) << "</text>\n";
  out << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 18
      << "\" font-size=\"11\" text-anchor=\"middle\">"
      << fmt(log_x ? std::pow(10, x_max) : x_max) << "</text>\n";
  out << "<text x=\"" << ml - 8 << "\" y=\"" << H - mb
      << "\" font-size=\"11\" text-anchor=\"end\">"
      << fmt(log_y ? std::pow(10, y_min) : y_min) << "</text>\n";
  out << "<text x=\"" << ml - 8 << "\" y=\"" << mt + 4
      << "\" font-size=\"11\" text-anchor=\"end\">"
      << fmt(log_y ? std::pow(10, y_max) : y_max) << "</text>\n";

  size_t color = 0;
  double legend_y = mt;
  for (const auto& s : series) {
    const char* stroke = kPalette[color % 6];
    out << "<polyline fill=\"none\" stroke=\"" << stroke
        << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : s.points) out << px(x) << "," << py(y) << " ";
    out << "\"/>\n";
    for (auto [x, y] : s.points)
      out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
          << "\" r=\"3\" fill=\"" << stroke << "\"/>\n";
    out << "<rect x=\"" << W - mr + 12 << "\" y=\"" << legend_y
        << "\" width=\"14\" height=\"4\" fill=\"" << stroke << "\"/>\n";
    out << "<text x=\"" << W - mr + 32 << "\" y=\"" << legend_y + 6
        << "\" font-size=\"12\">" << s.name << "</text>\n";
    legend_y += 22;
    ++color;
  }
  out << "</svg>\n";
}

}  // namespace dimtool
