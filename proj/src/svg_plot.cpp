#include "minsoc/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace minsoc::svg {

namespace {

constexpr std::size_t kMaxPoints = 4000;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Roughly 5-8 ticks at 1/2/5 multiples.
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 8.0) break;
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string render(const Chart& chart) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : chart.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) {
    const double pad = std::max(1e-9, std::abs(ymin) * 0.05);
    ymin -= pad;
    ymax += pad;
  } else {
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
  }

  const double left = 80, right = 20, top = 40, bottom = 60;
  const double pw = chart.width - left - right;
  const double ph = chart.height - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream os;
  os.precision(7);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
     << "\" viewBox=\"0 0 " << chart.width << ' ' << chart.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << chart.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(chart.title)
     << "</text>\n";

  for (double t : ticks(xmin, xmax)) {
    os << "<line x1=\"" << px(t) << "\" y1=\"" << top << "\" x2=\"" << px(t) << "\" y2=\"" << top + ph
       << "\" stroke=\"#e0e0e0\"/>\n"
       << "<text x=\"" << px(t) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (double t : ticks(ymin, ymax)) {
    os << "<line x1=\"" << left << "\" y1=\"" << py(t) << "\" x2=\"" << left + pw << "\" y2=\"" << py(t)
       << "\" stroke=\"#e0e0e0\"/>\n"
       << "<text x=\"" << left - 6 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n"
     << "<text x=\"" << left + pw / 2 << "\" y=\"" << chart.height - 15 << "\" text-anchor=\"middle\">"
     << escape(chart.x_label) << "</text>\n"
     << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(chart.y_label) << "</text>\n";

  for (const auto& s : chart.series) {
    if (s.x.empty()) continue;
    const std::size_t stride = std::max<std::size_t>(1, s.x.size() / kMaxPoints);
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.3\" points=\"";
    double prev_y = s.y.front();
    for (std::size_t i = 0; i < s.x.size(); i += stride) {
      if (s.steps && i > 0) os << px(s.x[i]) << ',' << py(prev_y) << ' ';
      os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      prev_y = s.y[i];
    }
    if ((s.x.size() - 1) % stride != 0) os << px(s.x.back()) << ',' << py(s.y.back());
    os << "\"/>\n";
  }

  double ly = top + 14;
  for (const auto& s : chart.series) {
    os << "<line x1=\"" << left + pw - 170 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw - 145 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << left + pw - 140 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

void write(const std::filesystem::path& path, const Chart& chart) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render(chart);
}

}  // namespace minsoc::svg
