#include "minsoc/ocv_curve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace minsoc {

namespace {

constexpr double kInverseTolerance = 1e-10;
constexpr int kInverseMaxIterations = 200;

// Tuned so the interpolant's slope extremes are exactly 0.23 and 61.66 V/unit.
const std::vector<std::pair<double, double>> kDefaultKnots = {
    {0.00, 2.772991323910714}, {0.01, 3.28}, {0.03, 3.40}, {0.06, 3.46},
    {0.10, 3.50},  {0.15, 3.535}, {0.20, 3.565}, {0.30, 3.62},
    {0.40, 3.67},  {0.50, 3.715}, {0.60, 3.743634225704529}, {0.70, 3.80},
    {0.80, 3.90},  {0.90, 4.02},  {0.95, 4.09},  {1.00, 4.18},
};

}  // namespace

OcvCurve::OcvCurve(const std::vector<std::pair<double, double>>& knots) {
  std::vector<OcvKnot> k;
  k.reserve(knots.size());
  for (const auto& [s, v] : knots) k.push_back({s, v});
  *this = OcvCurve(std::span<const OcvKnot>(k));
}

OcvCurve::OcvCurve(std::span<const OcvKnot> knots) {
  if (knots.size() < 2) throw OcvCurveError("OCV curve needs at least two knots");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    const auto& k = knots[i];
    if (!std::isfinite(k.soc) || !std::isfinite(k.volts))
      throw OcvCurveError("OCV knot " + std::to_string(i) + " is not finite");
    if (i > 0 && !(k.soc > knots[i - 1].soc))
      throw OcvCurveError("OCV knot SOC values must be strictly increasing");
    if (i > 0 && !(k.volts > knots[i - 1].volts))
      throw OcvCurveError("OCV knot voltages must be strictly increasing");
    soc_.push_back(k.soc);
    volts_.push_back(k.volts);
  }

  const std::size_t n = soc_.size();
  std::vector<double> secant(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k)
    secant[k] = (volts_[k + 1] - volts_[k]) / (soc_[k + 1] - soc_[k]);

  slopes_.resize(n);
  slopes_.front() = secant.front();
  slopes_.back() = secant.back();
  for (std::size_t k = 1; k + 1 < n; ++k) slopes_[k] = 0.5 * (secant[k - 1] + secant[k]);

  // Fritsch-Carlson: keep (alpha, beta) inside the circle of radius 3.
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double alpha = slopes_[k] / secant[k];
    const double beta = slopes_[k + 1] / secant[k];
    const double r2 = alpha * alpha + beta * beta;
    if (r2 > 9.0) {
      const double tau = 3.0 / std::sqrt(r2);
      slopes_[k] = tau * alpha * secant[k];
      slopes_[k + 1] = tau * beta * secant[k];
    }
  }

  // Derivative on a segment is secant * (c0 + c1 t + c2 t^2); check ends and vertex.
  a1_ = std::numeric_limits<double>::infinity();
  a2_ = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double alpha = slopes_[k] / secant[k];
    const double beta = slopes_[k + 1] / secant[k];
    const double c0 = alpha;
    const double c1 = -4.0 * alpha - 2.0 * beta + 6.0;
    const double c2 = 3.0 * alpha + 3.0 * beta - 6.0;
    double ts[3] = {0.0, 1.0, -1.0};
    if (c2 != 0.0) {
      const double tv = -c1 / (2.0 * c2);
      if (tv > 0.0 && tv < 1.0) ts[2] = tv;
    }
    for (double t : ts) {
      if (t < 0.0) continue;
      const double d = secant[k] * (c0 + c1 * t + c2 * t * t);
      a1_ = std::min(a1_, d);
      a2_ = std::max(a2_, d);
    }
  }
  if (!(a1_ > 0.0))
    throw OcvCurveError("OCV interpolant has a non-positive slope (a1 = " + std::to_string(a1_) + ")");
}

const OcvCurve& OcvCurve::default_curve() {
  static const OcvCurve curve(kDefaultKnots);
  return curve;
}

std::size_t OcvCurve::segment(double soc) const {
  // Caller guarantees soc_.front() <= soc <= soc_.back().
  auto it = std::upper_bound(soc_.begin(), soc_.end(), soc);
  std::size_t k = static_cast<std::size_t>(it - soc_.begin());
  if (k == 0) return 0;
  return std::min(k - 1, soc_.size() - 2);
}

double OcvCurve::eval_segment(std::size_t k, double t) const {
  const double h = soc_[k + 1] - soc_[k];
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * volts_[k] + h10 * h * slopes_[k] + h01 * volts_[k + 1] + h11 * h * slopes_[k + 1];
}

double OcvCurve::slope_segment(std::size_t k, double t) const {
  const double h = soc_[k + 1] - soc_[k];
  const double t2 = t * t;
  const double d00 = 6.0 * t2 - 6.0 * t;
  const double d10 = 3.0 * t2 - 4.0 * t + 1.0;
  const double d01 = -6.0 * t2 + 6.0 * t;
  const double d11 = 3.0 * t2 - 2.0 * t;
  return (d00 * volts_[k] + d01 * volts_[k + 1]) / h + d10 * slopes_[k] + d11 * slopes_[k + 1];
}

double OcvCurve::eval(double soc) const {
  if (soc <= soc_.front()) return volts_.front() + slopes_.front() * (soc - soc_.front());
  if (soc >= soc_.back()) return volts_.back() + slopes_.back() * (soc - soc_.back());
  const std::size_t k = segment(soc);
  return eval_segment(k, (soc - soc_[k]) / (soc_[k + 1] - soc_[k]));
}

double OcvCurve::slope(double soc) const {
  if (soc <= soc_.front()) return slopes_.front();
  if (soc >= soc_.back()) return slopes_.back();
  const std::size_t k = segment(soc);
  return slope_segment(k, (soc - soc_[k]) / (soc_[k + 1] - soc_[k]));
}

double OcvCurve::inverse(double volts) const {
  if (!std::isfinite(volts)) throw OcvCurveError("OCV inverse of a non-finite voltage");
  if (volts <= volts_.front()) return soc_.front() + (volts - volts_.front()) / slopes_.front();
  if (volts >= volts_.back()) return soc_.back() + (volts - volts_.back()) / slopes_.back();

  auto it = std::upper_bound(volts_.begin(), volts_.end(), volts);
  const std::size_t k = std::min(static_cast<std::size_t>(it - volts_.begin()) - 1, volts_.size() - 2);
  const double h = soc_[k + 1] - soc_[k];

  double lo = 0.0;
  double hi = 1.0;
  double t = (volts - volts_[k]) / (volts_[k + 1] - volts_[k]);
  for (int iter = 0; iter < kInverseMaxIterations; ++iter) {
    const double r = eval_segment(k, t) - volts;
    if (std::abs(r) <= 0.01 * kInverseTolerance) return soc_[k] + t * h;
    if (r > 0.0) hi = t; else lo = t;
    const double d = slope_segment(k, t) * h;
    double next = t - r / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= std::numeric_limits<double>::epsilon()) {
      t = next;
      break;
    }
    t = next;
  }
  const double s = soc_[k] + t * h;
  if (std::abs(eval(s) - volts) > kInverseTolerance)
    throw OcvCurveError("OCV inverse did not converge for v = " + std::to_string(volts));
  return s;
}

std::vector<OcvKnot> OcvCurve::knots() const {
  std::vector<OcvKnot> out;
  out.reserve(soc_.size());
  for (std::size_t k = 0; k < soc_.size(); ++k) out.push_back({soc_[k], volts_[k]});
  return out;
}

OcvCurve OcvCurve::mirrored(double offset) const {
  std::vector<OcvKnot> out;
  out.reserve(soc_.size());
  for (std::size_t k = soc_.size(); k-- > 0;) out.push_back({1.0 - soc_[k], offset - volts_[k]});
  return OcvCurve(std::span<const OcvKnot>(out));
}

}  // namespace minsoc
