#include "plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gesturelab::tools {

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0;
constexpr double kLeft = 70.0, kRight = 30.0, kTop = 50.0, kBottom = 60.0;

const char* kPalette[] = {"#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo, hi;
  double map(double v, double a, double b) const {
    if (hi == lo) return 0.5 * (a + b);
    return a + (b - a) * (v - lo) / (hi - lo);
  }
};

Range nice_range(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
}

void axes(std::ostringstream& os, const Range& xr, const Range& yr,
          const std::string& x_label, const std::string& y_label) {
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
     << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
     << "\" stroke=\"black\"/>\n<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\""
     << kLeft << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = static_cast<double>(i) / 4.0;
    const double xv = xr.lo + f * (xr.hi - xr.lo);
    const double yv = yr.lo + f * (yr.hi - yr.lo);
    const double xp = xr.map(xv, kLeft, kWidth - kRight);
    const double yp = yr.map(yv, kHeight - kBottom, kTop);
    os << "<text x=\"" << xp << "\" y=\"" << kHeight - kBottom + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(xv)
       << "</text>\n"
       << "<text x=\"" << kLeft - 8 << "\" y=\"" << yp + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 16
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
     << "</text>\n"
     << "<text x=\"18\" y=\"" << (kTop + kHeight - kBottom) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
     << "transform=\"rotate(-90 18 " << (kTop + kHeight - kBottom) / 2 << ")\">" << y_label
     << "</text>\n";
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::vector<double>& xs,
                           const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label) {
  double ylo = 0.0, yhi = 1.0;
  bool first = true;
  for (const auto& s : series)
    for (double v : s.ys) {
      if (first) {
        ylo = yhi = v;
        first = false;
      }
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  const Range xr = nice_range(xs.empty() ? 0.0 : xs.front(), xs.empty() ? 1.0 : xs.back());
  const Range yr = nice_range(ylo, yhi);

  std::ostringstream os;
  header(os, title);
  axes(os, xr, yr, x_label, y_label);
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < xs.size() && i < series[si].ys.size(); ++i)
      os << xr.map(xs[i], kLeft, kWidth - kRight) << ","
         << yr.map(series[si].ys[i], kHeight - kBottom, kTop) << " ";
    os << "\"/>\n";
    for (size_t i = 0; i < xs.size() && i < series[si].ys.size(); ++i)
      os << "<circle cx=\"" << xr.map(xs[i], kLeft, kWidth - kRight) << "\" cy=\""
         << yr.map(series[si].ys[i], kHeight - kBottom, kTop) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight - 6 << "\" y=\"" << kTop + 16.0 * static_cast<double>(si)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color
       << "\">" << series[si].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values, const std::string& y_label) {
  double ylo = 0.0, yhi = 0.0;
  for (double v : values) {
    ylo = std::min(ylo, v);
    yhi = std::max(yhi, v);
  }
  const Range yr = nice_range(ylo, yhi);
  const double span = kWidth - kLeft - kRight;
  const double slot = span / std::max<size_t>(values.size(), 1);

  std::ostringstream os;
  header(os, title);
  axes(os, {0.0, 1.0}, yr, "", y_label);
  const double zero = yr.map(0.0, kHeight - kBottom, kTop);
  for (size_t i = 0; i < values.size(); ++i) {
    const double x = kLeft + slot * (static_cast<double>(i) + 0.2);
    const double y = yr.map(values[i], kHeight - kBottom, kTop);
    os << "<rect x=\"" << x << "\" y=\"" << std::min(y, zero) << "\" width=\"" << slot * 0.6
       << "\" height=\"" << std::fabs(zero - y) << "\" fill=\"" << kPalette[i % 5] << "\"/>\n"
       << "<text x=\"" << x + slot * 0.3 << "\" y=\"" << kHeight - kBottom + 32
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << (i < labels.size() ? labels[i] : "") << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace gesturelab::tools
