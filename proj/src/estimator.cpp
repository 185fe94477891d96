#include "minsoc/estimator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace minsoc {

void EstimatorParams::validate() const {
  if (!(std::isfinite(ell) && ell > 0.0)) throw ConfigError("ell must be > 0");
  if (!(std::isfinite(tau_d) && tau_d > 0.0)) throw ConfigError("tau_d must be > 0");
  if (!(std::isfinite(epsilon) && epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(mu > 0.0 && mu <= 1.0)) throw ConfigError("mu must lie in (0, 1]");
}

TauChoice TauChoice::parse(const std::string& text) {
  if (text == "mean") return {Kind::mean, 0.0};
  if (text == "minimax") return {Kind::minimax, 0.0};
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("tau-d must be 'mean', 'minimax' or a number, got '" + text + "'");
  if (!(std::isfinite(v) && v > 0.0)) throw ConfigError("explicit tau_d must be positive");
  return {Kind::explicit_value, v};
}

double select_tau_d(const PackConfig& cfg, const TauChoice& choice) {
  cfg.validate();
  switch (choice.kind) {
    case TauChoice::Kind::mean: {
      double sum = 0.0;
      for (const auto& c : cfg.cells) sum += c.tau_d;
      return sum / static_cast<double>(cfg.size());
    }
    case TauChoice::Kind::minimax: {
      // max_i |1/a - 1/tau_i| is minimised at the midpoint of the reciprocal range.
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      for (const auto& c : cfg.cells) {
        lo = std::min(lo, 1.0 / c.tau_d);
        hi = std::max(hi, 1.0 / c.tau_d);
      }
      return 2.0 / (lo + hi);
    }
    case TauChoice::Kind::explicit_value:
      if (!(choice.value > 0.0)) throw ConfigError("explicit tau_d must be positive");
      return choice.value;
  }
  throw ConfigError("unknown tau_d strategy");
}

std::vector<double> compute_z(const PackConfig& cfg, const EstimatorState& est,
                              std::span<const double> cell_volts, double u) {
  if (cell_volts.size() != cfg.size()) throw std::invalid_argument("voltage vector length mismatch");
  std::vector<double> z(cfg.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto& c = cfg.cells[i];
    z[i] = cell_volts[i] + est.u_bar_rc / c.c_d + c.r_int * u;
  }
  return z;
}

std::vector<double> compute_z(const PackConfig& cfg, const HybridState& q, double u) {
  const auto v = cell_voltages(cfg, q.plant, u);
  return compute_z(cfg, q.est, v, u);
}

EstimatorRate estimator_flow(const PackConfig& cfg, const EstimatorParams& params,
                             const EstimatorState& est, double y_sigma, double u) {
  const auto& cell = cfg.cells.at(est.sigma);
  const double u_rc_hat = est.u_bar_rc / cell.c_d;
  const double feedthrough = -cell.r_int;
  const double y_hat = -u_rc_hat + feedthrough * u + cfg.ocv.eval(est.soc_hat);
  return {-est.u_bar_rc / params.tau_d + u,
          -u / (3600.0 * cell.q_ah) + params.ell * (y_sigma - y_hat)};
}

bool in_flow_set(const PackConfig& cfg, const EstimatorParams& params, const EstimatorState& est,
                 std::span<const double> z) {
  const double v_hat = cfg.ocv.eval(est.soc_hat);
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i == est.sigma) continue;
    const bool ok = params.mode == Mode::min ? v_hat - params.epsilon <= z[i]
                                             : v_hat >= z[i] - params.epsilon;
    if (!ok) return false;
  }
  return true;
}

bool in_jump_set(const PackConfig& cfg, const EstimatorParams& params, const EstimatorState& est,
                 std::span<const double> z) {
  const double v_hat = cfg.ocv.eval(est.soc_hat);
  const double eps = params.epsilon;
  const double mu_eps = params.mu * params.epsilon;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i == est.sigma) continue;
    const bool hit = params.mode == Mode::min
                         ? (v_hat - eps <= z[i] && z[i] <= v_hat - mu_eps)
                         : (z[i] - eps <= v_hat && v_hat <= z[i] - mu_eps);
    if (hit) return true;
  }
  return false;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return static_cast<std::size_t>(draw % range);
}

EstimatorState apply_jump(const PackConfig& cfg, const EstimatorParams& params,
                          const EstimatorState& est, std::span<const double> z,
                          std::mt19937_64& rng) {
  if (z.size() < 2) throw std::logic_error("jump map requires at least two cells");
  if (z.size() != cfg.size()) throw std::invalid_argument("z vector length mismatch");

  std::vector<std::size_t> ties;
  double best = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i == est.sigma) continue;
    const bool better = ties.empty() || (params.mode == Mode::min ? z[i] < best : z[i] > best);
    if (better) {
      best = z[i];
      ties.clear();
    }
    if (z[i] == best) ties.push_back(i);
  }

  EstimatorState next = est;
  next.sigma = ties.size() == 1 ? ties.front() : ties[uniform_index(rng, ties.size())];
  next.soc_hat = cfg.ocv.inverse(best);
  return next;
}

EstimatorState jump_map(const PackConfig& cfg, const EstimatorParams& params,
                        const EstimatorState& est, std::span<const double> z,
                        std::mt19937_64& rng) {
  if (z.size() < 2) throw std::logic_error("jump map requires at least two cells");
  if (!in_jump_set(cfg, params, est, z)) throw std::logic_error("jump map applied outside the jump set");
  return apply_jump(cfg, params, est, z, rng);
}

}  // namespace minsoc
