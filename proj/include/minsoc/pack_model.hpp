#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "minsoc/ocv_curve.hpp"

namespace minsoc {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which SOC extreme the estimator targets.
enum class Mode { min, max };

/// First-order ECM constants of one cell. Positive current discharges.
struct CellParams {
  double tau_d = 0.0;  // s, = r_d * c_d
  double r_d = 0.0;    // ohm
  double c_d = 0.0;    // F
  double r_int = 0.0;  // ohm
  double q_ah = 0.0;   // Ah

  /// Builds from any two of (tau_d, r_d, c_d); when all three are given they
  /// must agree to 1e-12 relative.
  static CellParams make(std::optional<double> tau_d, double r_d, std::optional<double> c_d,
                         double r_int, double q_ah);

  void validate() const;
};

struct PackConfig {
  std::vector<CellParams> cells;
  OcvCurve ocv = OcvCurve::default_curve();

  std::size_t size() const { return cells.size(); }
  void validate() const;
};

/// Plant state x: per-cell RC voltage and SOC.
struct PlantState {
  std::vector<double> u_rc;
  std::vector<double> soc;

  std::size_t size() const { return soc.size(); }
  bool operator==(const PlantState&) const = default;
};

/// Time derivative of the plant for pack current u; the series connection
/// feeds the same current to every cell.
PlantState plant_flow(const PackConfig& cfg, const PlantState& x, double u);

/// Terminal voltage of cell i (0-based): -U_RC,i - R_int,i u + V_OCV(SOC_i).
double cell_voltage(const PackConfig& cfg, const PlantState& x, double u, std::size_t i);

/// All terminal voltages.
std::vector<double> cell_voltages(const PackConfig& cfg, const PlantState& x, double u);

struct ExtremeSoc {
  double value;
  std::vector<std::size_t> indices;  // every attaining cell, ascending
};

ExtremeSoc true_extreme_soc(const PlantState& x, Mode mode);

}  // namespace minsoc
