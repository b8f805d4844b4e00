#pragma once

// Minimal deterministic SVG plotting: line series, shaded bands, bars,
// vertical rules, legend.  Number formatting is fixed-precision so identical
// inputs render byte-identical files.

#include <string>
#include <vector>

namespace synthcf {

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f4e8c";
  double width = 1.6;
  bool dashed = false;
  bool in_legend = true;
};

struct SvgBand {
  std::vector<double> x, lo, hi;
  std::string color = "#9ecae1";
  double opacity = 0.45;
};

struct SvgBars {
  std::vector<double> x, y;
  std::string color = "#888888";
  double rel_width = 0.7;  // fraction of the x spacing
};

struct SvgVLine {
  double x = 0.0;
  std::string color = "#b00000";
  bool dashed = true;
  std::string label;
};

struct SvgHLine {
  double y = 0.0;
  std::string color = "#555555";
  bool dashed = true;
};

class SvgPlot {
 public:
  SvgPlot(std::string title, std::string xlabel, std::string ylabel,
          int width = 760, int height = 460);

  void add_series(SvgSeries s) { series_.push_back(std::move(s)); }
  void add_band(SvgBand b) { bands_.push_back(std::move(b)); }
  void add_bars(SvgBars b) { bars_.push_back(std::move(b)); }
  void add_vline(SvgVLine v) { vlines_.push_back(std::move(v)); }
  void add_hline(SvgHLine h) { hlines_.push_back(std::move(h)); }

  std::string render() const;
  void save(const std::string& path) const;

 private:
  std::string title_, xlabel_, ylabel_;
  int width_, height_;
  std::vector<SvgSeries> series_;
  std::vector<SvgBand> bands_;
  std::vector<SvgBars> bars_;
  std::vector<SvgVLine> vlines_;
  std::vector<SvgHLine> hlines_;
};

}  // namespace synthcf
