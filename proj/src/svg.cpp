#include "synthcf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "synthcf/errors.hpp"

namespace synthcf {

namespace {

// Fixed two-decimal coordinates: enough for pixel space, and stable across
// runs so identical plots are byte-identical.
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  if (std::abs(v - std::round(v)) < 1e-9)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// "Nice" tick spacing: 1/2/5 times a power of ten covering the span.
std::vector<double> ticks(double lo, double hi, int target = 6) {
  std::vector<double> out;
  if (!(hi > lo)) {
    out.push_back(lo);
    return out;
  }
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  const double first = std::ceil(lo / step) * step;
  for (double v = first; v <= hi + 1e-9 * step; v += step) out.push_back(v);
  return out;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string xlabel, std::string ylabel, int width,
                 int height)
    : title_(std::move(title)),
      xlabel_(std::move(xlabel)),
      ylabel_(std::move(ylabel)),
      width_(width),
      height_(height) {}

std::string SvgPlot::render() const {
  // Data extent over everything drawable.
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  auto take = [&](double x, double y) {
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  };
  for (const auto& s : series_)
    for (std::size_t i = 0; i < s.x.size(); ++i) take(s.x[i], s.y[i]);
  for (const auto& b : bands_)
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      take(b.x[i], b.lo[i]);
      take(b.x[i], b.hi[i]);
    }
  for (const auto& b : bars_)
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      take(b.x[i], b.y[i]);
      take(b.x[i], 0.0);
    }
  for (const auto& h : hlines_) {
    y_lo = std::min(y_lo, h.y);
    y_hi = std::max(y_hi, h.y);
  }
  if (!std::isfinite(x_lo) || !std::isfinite(y_lo))
    throw ValidationError("svg: nothing to plot");
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.06 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double ml = 72, mr = 16, mt = 34, mb = 52;  // margins
  const double pw = width_ - ml - mr, ph = height_ - mt - mb;
  auto sx = [&](double x) { return ml + pw * (x - x_lo) / (x_hi - x_lo); };
  auto sy = [&](double y) { return mt + ph * (1.0 - (y - y_lo) / (y_hi - y_lo)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
    << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\">\n";
  o << "<rect width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(width_ / 2.0) << "\" y=\"20\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"14\" font-weight=\"bold\">"
    << escape(title_) << "</text>\n";

  // Axes, grid, ticks.
  o << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
  for (double t : ticks(x_lo, x_hi)) {
    const double px = sx(t);
    o << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(px)
      << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"#e0e0e0\" stroke-width=\"0.7\"/>\n";
    o << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(mt + ph + 16)
      << "\" text-anchor=\"middle\">" << fmt_tick(t) << "</text>\n";
  }
  for (double t : ticks(y_lo, y_hi)) {
    const double py = sy(t);
    o << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(ml + pw)
      << "\" y2=\"" << fmt(py) << "\" stroke=\"#e0e0e0\" stroke-width=\"0.7\"/>\n";
    o << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(py + 4)
      << "\" text-anchor=\"end\">" << fmt_tick(t) << "</text>\n";
  }
  o << "</g>\n";
  o << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw)
    << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  o << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(height_ - 12.0)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
    << escape(xlabel_) << "</text>\n";
  o << "<text x=\"16\" y=\"" << fmt(mt + ph / 2)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
       "transform=\"rotate(-90 16 "
    << fmt(mt + ph / 2) << ")\">" << escape(ylabel_) << "</text>\n";

  for (const auto& b : bands_) {
    o << "<path d=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i)
      o << (i == 0 ? 'M' : 'L') << fmt(sx(b.x[i])) << ' ' << fmt(sy(b.hi[i]));
    for (std::size_t i = b.x.size(); i-- > 0;)
      o << 'L' << fmt(sx(b.x[i])) << ' ' << fmt(sy(b.lo[i]));
    o << "Z\" fill=\"" << b.color << "\" fill-opacity=\"" << fmt(b.opacity)
      << "\" stroke=\"none\"/>\n";
  }

  for (const auto& b : bars_) {
    double spacing = 1.0;
    if (b.x.size() > 1) spacing = (b.x.back() - b.x.front()) / (b.x.size() - 1);
    const double half = 0.5 * b.rel_width * spacing;
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      const double x0 = sx(b.x[i] - half), x1 = sx(b.x[i] + half);
      const double y0 = sy(std::max(0.0, b.y[i])), y1 = sy(std::min(0.0, b.y[i]));
      o << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(x1 - x0)
        << "\" height=\"" << fmt(y1 - y0) << "\" fill=\"" << b.color << "\"/>\n";
    }
  }

  for (const auto& h : hlines_)
    o << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(sy(h.y)) << "\" x2=\"" << fmt(ml + pw)
      << "\" y2=\"" << fmt(sy(h.y)) << "\" stroke=\"" << h.color << "\" stroke-width=\"1\""
      << (h.dashed ? " stroke-dasharray=\"5 4\"" : "") << "/>\n";

  for (const auto& v : vlines_) {
    o << "<line x1=\"" << fmt(sx(v.x)) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(sx(v.x))
      << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"" << v.color << "\" stroke-width=\"1.2\""
      << (v.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    if (!v.label.empty())
      o << "<text x=\"" << fmt(sx(v.x) + 4) << "\" y=\"" << fmt(mt + 14)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << v.color << "\">"
        << escape(v.label) << "</text>\n";
  }

  for (const auto& s : series_) {
    o << "<path d=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      o << (i == 0 ? 'M' : 'L') << fmt(sx(s.x[i])) << ' ' << fmt(sy(s.y[i]));
    o << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << fmt(s.width)
      << "\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
  }

  // Legend, top-left inside the plot area.
  double ly = mt + 16;
  for (const auto& s : series_) {
    if (!s.in_legend || s.label.empty()) continue;
    o << "<line x1=\"" << fmt(ml + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
      << fmt(ml + 34) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << s.color
      << "\" stroke-width=\"" << fmt(s.width) << "\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    o << "<text x=\"" << fmt(ml + 40) << "\" y=\"" << fmt(ly)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label) << "</text>\n";
    ly += 16;
  }

  o << "</svg>\n";
  return o.str();
}

void SvgPlot::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("svg: cannot open '" + path + "' for writing");
  f << render();
}

}  // namespace synthcf
