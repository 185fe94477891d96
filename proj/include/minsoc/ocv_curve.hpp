#pragma once

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace minsoc {

/// Raised when an OCV knot table cannot produce a strictly increasing C1 map.
class OcvCurveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct OcvKnot {
  double soc;
  double volts;
};

/// Open-circuit voltage as a function of SOC (unit fraction).
///
/// Knots are joined by a monotone cubic Hermite interpolant whose knot slopes
/// are limited with the Fritsch-Carlson circle criterion. Outside the knot
/// range the curve continues linearly with the end slopes, so the map is C1
/// and strictly increasing on the whole real line. The slope bounds a1/a2 are
/// computed exactly from the piecewise quadratic derivative.
///
/// Instances are immutable and safe to share between threads.
class OcvCurve {
 public:
  explicit OcvCurve(std::span<const OcvKnot> knots);
  explicit OcvCurve(const std::vector<std::pair<double, double>>& knots);

  /// Default graphite/NCA-like table. Its slope bounds are a1 = 0.23 V and
  /// a2 = 61.66 V per unit SOC (2.3 mV/% and 616.6 mV/%).
  static const OcvCurve& default_curve();

  double eval(double soc) const;
  double slope(double soc) const;

  /// Unique s with |eval(s) - volts| <= 1e-10. Throws OcvCurveError if the
  /// safeguarded Newton iteration does not converge.
  double inverse(double volts) const;

  double a1() const { return a1_; }
  double a2() const { return a2_; }
  double left_slope() const { return slopes_.front(); }
  double right_slope() const { return slopes_.back(); }

  std::vector<OcvKnot> knots() const;
  std::span<const double> knot_slopes() const { return slopes_; }

  /// Curve s -> offset - eval(1 - s), built from reflected knots. Used to turn
  /// a min-SOC problem into the equivalent max-SOC one.
  OcvCurve mirrored(double offset) const;

 private:
  std::size_t segment(double soc) const;
  double eval_segment(std::size_t k, double t) const;
  double slope_segment(std::size_t k, double t) const;

  std::vector<double> soc_;
  std::vector<double> volts_;
  std::vector<double> slopes_;
  double a1_ = 0.0;
  double a2_ = 0.0;
};

}  // namespace minsoc
