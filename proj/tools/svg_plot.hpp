#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace disko {

// Minimal polyline chart writer: axes, ticks, legend, one polyline per series.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_series(const std::string& label, const std::vector<double>& x,
                  const std::vector<double>& y);
  // Shaded band (e.g. mean +/- spread) drawn under the polylines.
  void add_band(const std::string& label, const std::vector<double>& x,
                const std::vector<double>& lo, const std::vector<double>& hi);

  void write(std::ostream& out) const;
  void write(const std::string& path) const;

 private:
  struct Series {
    std::string label;
    std::vector<double> x, y;
  };
  struct Band {
    std::string label;
    std::vector<double> x, lo, hi;
  };
  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  std::vector<Band> bands_;
};

}  // namespace disko
