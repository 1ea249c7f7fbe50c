#include "rml/svg.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "rml/error.hpp"

namespace rml::io {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::vector<double> ticks(double lo, double hi) {
  double span = hi - lo;
  double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (span / (step * m) <= 8.0) {
      step *= m;
      break;
    }
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(v);
  return out;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string xlabel, std::string ylabel, std::pair<double, double> xrange,
                 std::pair<double, double> yrange)
    : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), xr_(xrange), yr_(yrange) {
  if (!(xr_.second > xr_.first) || !(yr_.second > yr_.first))
    throw DomainError("experiments-cli/svg", "empty axis range");
}

std::string SvgPlot::render(int width, int height) const {
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double x) { return ml + (x - xr_.first) / (xr_.second - xr_.first) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (y - yr_.first) / (yr_.second - yr_.first)) * ph; };
  auto inside = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && x >= xr_.first && x <= xr_.second && y >= yr_.first &&
           y <= yr_.second;
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<defs><clipPath id=\"plot\"><rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
     << "\" height=\"" << num(ph) << "\"/></clipPath></defs>\n";
  os << "<text x=\"" << num(width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title_)
     << "</text>\n";
  os << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : ticks(xr_.first, xr_.second)) {
    os << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(px(v)) << "\" y2=\""
       << num(mt + ph + 5) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << num(px(v)) << "\" y=\"" << num(mt + ph + 18) << "\" text-anchor=\"middle\">"
       << tick_label(v) << "</text>\n";
  }
  for (double v : ticks(yr_.first, yr_.second)) {
    os << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(ml) << "\" y2=\""
       << num(py(v)) << "\" stroke=\"black\"/>";
    os << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << tick_label(v)
       << "</text>\n";
  }
  os << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(height - 12.0) << "\" text-anchor=\"middle\">"
     << escape(xlabel_) << "</text>\n";
  os << "<text transform=\"translate(16," << num(mt + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(ylabel_) << "</text>\n";
  os << "<g clip-path=\"url(#plot)\">\n";
  for (const auto& s : series_) {
    if (s.points) {
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (!inside(s.x[k], s.y[k])) continue;
        if (k < s.err.size() && s.err[k] > 0) {
          os << "<line x1=\"" << num(px(s.x[k])) << "\" y1=\"" << num(py(s.y[k] - s.err[k])) << "\" x2=\""
             << num(px(s.x[k])) << "\" y2=\"" << num(py(s.y[k] + s.err[k])) << "\" stroke=\"" << s.color
             << "\"/>";
        }
        os << "<circle cx=\"" << num(px(s.x[k])) << "\" cy=\"" << num(py(s.y[k])) << "\" r=\"2\" fill=\""
           << s.color << "\"/>\n";
      }
      continue;
    }
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << num(s.width) << "\"";
    if (s.dashed) os << " stroke-dasharray=\"6,4\"";
    os << " points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      os << num(px(s.x[k])) << "," << num(py(s.y[k])) << " ";
    }
    os << "\"/>\n";
  }
  os << "</g>\n";
  double ly = mt + 14;
  for (const auto& s : series_) {
    if (s.label.empty()) continue;
    double lx = ml + pw - 170;
    if (s.points) {
      os << "<circle cx=\"" << num(lx + 12) << "\" cy=\"" << num(ly - 4) << "\" r=\"3\" fill=\"" << s.color
         << "\"/>";
    } else {
      os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 24) << "\" y2=\""
         << num(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
         << "/>";
    }
    os << "<text x=\"" << num(lx + 30) << "\" y=\"" << num(ly) << "\">" << escape(s.label) << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace rml::io
