#pragma once

#include <string>
#include <utility>
#include <vector>

namespace rml::io {

struct Series {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<double> x, y;
  bool points = false;  // markers instead of a polyline
  bool dashed = false;
  double width = 1.5;
  std::vector<double> err;  // optional symmetric error bars (points only)
};

// Minimal self-contained SVG line/scatter plot with fixed axis ranges.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string xlabel, std::string ylabel, std::pair<double, double> xrange,
          std::pair<double, double> yrange);
  void add(Series s) { series_.push_back(std::move(s)); }
  std::string render(int width = 720, int height = 480) const;

 private:
  std::string title_, xlabel_, ylabel_;
  std::pair<double, double> xr_, yr_;
  std::vector<Series> series_;
};

}  // namespace rml::io
