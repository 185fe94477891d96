#include "minsoc/pack_model.hpp"

#include <cmath>
#include <string>

namespace minsoc {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

CellParams CellParams::make(std::optional<double> tau_d, double r_d, std::optional<double> c_d,
                            double r_int, double q_ah) {
  CellParams p;
  p.r_d = r_d;
  p.r_int = r_int;
  p.q_ah = q_ah;
  if (tau_d && c_d) {
    p.tau_d = *tau_d;
    p.c_d = *c_d;
  } else if (tau_d) {
    p.tau_d = *tau_d;
    p.c_d = *tau_d / r_d;
  } else if (c_d) {
    p.c_d = *c_d;
    p.tau_d = r_d * *c_d;
  } else {
    throw ConfigError("cell needs tau_d or c_d");
  }
  p.validate();
  return p;
}

void CellParams::validate() const {
  if (!positive_finite(tau_d) || !positive_finite(r_d) || !positive_finite(c_d) ||
      !positive_finite(r_int) || !positive_finite(q_ah))
    throw ConfigError("cell parameters must be finite and strictly positive");
  if (std::abs(tau_d - r_d * c_d) > 1e-12 * tau_d)
    throw ConfigError("inconsistent cell time constant: tau_d = " + std::to_string(tau_d) +
                      " but r_d * c_d = " + std::to_string(r_d * c_d));
}

void PackConfig::validate() const {
  if (cells.empty()) throw ConfigError("pack must contain at least one cell");
  for (const auto& c : cells) c.validate();
}

PlantState plant_flow(const PackConfig& cfg, const PlantState& x, double u) {
  const std::size_t n = cfg.size();
  PlantState dx{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = cfg.cells[i];
    dx.u_rc[i] = -x.u_rc[i] / c.tau_d + u / c.c_d;
    dx.soc[i] = -u / (3600.0 * c.q_ah);
  }
  return dx;
}

double cell_voltage(const PackConfig& cfg, const PlantState& x, double u, std::size_t i) {
  if (i >= cfg.size()) throw std::out_of_range("cell index " + std::to_string(i) + " out of range");
  return -x.u_rc[i] - cfg.cells[i].r_int * u + cfg.ocv.eval(x.soc[i]);
}

std::vector<double> cell_voltages(const PackConfig& cfg, const PlantState& x, double u) {
  std::vector<double> v(cfg.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = -x.u_rc[i] - cfg.cells[i].r_int * u + cfg.ocv.eval(x.soc[i]);
  return v;
}

ExtremeSoc true_extreme_soc(const PlantState& x, Mode mode) {
  ExtremeSoc out{x.soc.empty() ? 0.0 : x.soc.front(), {}};
  for (std::size_t i = 0; i < x.soc.size(); ++i) {
    const double s = x.soc[i];
    const bool better = mode == Mode::min ? s < out.value : s > out.value;
    if (better) {
      out.value = s;
      out.indices.clear();
    }
    if (s == out.value) out.indices.push_back(i);
  }
  return out;
}

}  // namespace minsoc
