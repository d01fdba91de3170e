#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "disko/errors.hpp"

namespace disko {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Round the raw span to a 1/2/5 decade step so tick labels stay readable.
double nice_step(double span, int target_ticks) {
  if (!(span > 0.0)) return 1.0;
  double raw = span / std::max(target_ticks, 1);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0;
  return step * mag;
}

}  // namespace

void SvgPlot::add_series(const std::string& label, const std::vector<double>& x,
                         const std::vector<double>& y) {
  if (x.size() != y.size())
    throw config_error("plot series '" + label + "' has mismatched x/y lengths");
  series_.push_back({label, x, y});
}

void SvgPlot::add_band(const std::string& label, const std::vector<double>& x,
                       const std::vector<double>& lo, const std::vector<double>& hi) {
  if (x.size() != lo.size() || x.size() != hi.size())
    throw config_error("plot band '" + label + "' has mismatched lengths");
  bands_.push_back({label, x, lo, hi});
}

void SvgPlot::write(std::ostream& out) const {
  const double W = 900, H = 560;
  const double ml = 80, mr = 170, mt = 50, mb = 60;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto fold = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
    for (size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
      xmin = std::min(xmin, xs[i]);
      xmax = std::max(xmax, xs[i]);
      ymin = std::min(ymin, ys[i]);
      ymax = std::max(ymax, ys[i]);
    }
  };
  for (const auto& s : series_) fold(s.x, s.y);
  for (const auto& b : bands_) {
    fold(b.x, b.lo);
    fold(b.x, b.hi);
  }
  if (!std::isfinite(xmin) || !std::isfinite(ymin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << " " << H
      << "\" font-family=\"sans-serif\" font-size=\"14\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << (ml + pw / 2) << "\" y=\"28\" text-anchor=\"middle\" "
      << "font-size=\"18\">" << title_ << "</text>\n";

  // axes + ticks
  out << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << mt + ph << "\"/>\n";
  out << "</g>\n";
  double xstep = nice_step(xmax - xmin, 6), ystep = nice_step(ymax - ymin, 6);
  out << "<g stroke=\"#bbb\" stroke-width=\"0.5\">\n";
  for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-12 * xstep; t += xstep)
    out << "<line x1=\"" << px(t) << "\" y1=\"" << mt << "\" x2=\"" << px(t)
        << "\" y2=\"" << mt + ph << "\"/>\n";
  for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-12 * ystep; t += ystep)
    out << "<line x1=\"" << ml << "\" y1=\"" << py(t) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << py(t) << "\"/>\n";
  out << "</g>\n<g fill=\"#333\">\n";
  for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-12 * xstep; t += xstep)
    out << "<text x=\"" << px(t) << "\" y=\"" << mt + ph + 20
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-12 * ystep; t += ystep)
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(t) + 5
        << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  out << "</g>\n";
  out << "<text x=\"" << (ml + pw / 2) << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\">" << xlabel_ << "</text>\n";
  out << "<text x=\"20\" y=\"" << (mt + ph / 2) << "\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 20 " << (mt + ph / 2) << ")\">" << ylabel_
      << "</text>\n";

  // bands under the lines
  size_t color_i = 0;
  for (const auto& b : bands_) {
    const char* color = kPalette[color_i++ % 8];
    out << "<polygon fill=\"" << color << "\" opacity=\"0.15\" points=\"";
    for (size_t i = 0; i < b.x.size(); ++i)
      out << px(b.x[i]) << "," << py(b.hi[i]) << " ";
    for (size_t i = b.x.size(); i-- > 0;)
      out << px(b.x[i]) << "," << py(b.lo[i]) << " ";
    out << "\"/>\n";
  }

  color_i = 0;
  for (const auto& s : series_) {
    const char* color = kPalette[color_i++ % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      out << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    out << "\"/>\n";
  }

  // legend
  double lx = ml + pw + 14, ly = mt + 10;
  color_i = 0;
  for (const auto& s : series_) {
    const char* color = kPalette[color_i++ % 8];
    out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << lx + 30 << "\" y=\"" << ly + 5 << "\">" << s.label
        << "</text>\n";
    ly += 22;
  }
  out << "</svg>\n";
}

void SvgPlot::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  write(out);
}

}  // namespace disko
