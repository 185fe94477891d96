#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "minsoc/pack_model.hpp"

namespace minsoc {

/// When to leave the flow set once the jump set is reached.
///   priority: jump at first entry into D.
///   boundary: keep flowing through D and jump on reaching the edge of C.
enum class JumpPolicy { priority, boundary };

struct EstimatorParams {
  double ell = 2.0;        // output-injection gain, 1/(s V)
  double tau_d = 12.0;     // shared diffusion time constant, s
  double epsilon = 1e-3;   // V
  double mu = 0.95;        // in (0, 1]
  Mode mode = Mode::min;
  JumpPolicy policy = JumpPolicy::priority;

  void validate() const;
};

/// Two continuous states plus the selected cell (0-based).
struct EstimatorState {
  double u_bar_rc = 0.0;  // A s; U_RC,i estimate is u_bar_rc / C_d,i
  double soc_hat = 0.0;
  std::size_t sigma = 0;

  bool operator==(const EstimatorState&) const = default;
};

struct HybridState {
  PlantState plant;
  EstimatorState est;
};

struct TauChoice {
  enum class Kind { mean, minimax, explicit_value } kind = Kind::mean;
  double value = 0.0;

  /// "mean", "minimax" or a positive number of seconds.
  static TauChoice parse(const std::string& text);
};

double select_tau_d(const PackConfig& cfg, const TauChoice& choice);

/// Per-cell OCV estimates z_i = V_i + u_bar_rc / C_d,i + R_int,i u.
std::vector<double> compute_z(const PackConfig& cfg, const EstimatorState& est,
                              std::span<const double> cell_volts, double u);

/// z computed from the plant's own terminal voltages.
std::vector<double> compute_z(const PackConfig& cfg, const HybridState& q, double u);

struct EstimatorRate {
  double u_bar_rc;
  double soc_hat;
};

/// Observer flow driven by the measured voltage of cell sigma.
EstimatorRate estimator_flow(const PackConfig& cfg, const EstimatorParams& params,
                             const EstimatorState& est, double y_sigma, double u);

bool in_flow_set(const PackConfig& cfg, const EstimatorParams& params, const EstimatorState& est,
                 std::span<const double> z);
bool in_jump_set(const PackConfig& cfg, const EstimatorParams& params, const EstimatorState& est,
                 std::span<const double> z);

/// Uniform index in [0, n) drawn by rejection so results do not depend on the
/// standard library's distribution implementation.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

/// Jump map without the D-membership precondition. Used for re-projection
/// when a state has left C and D.
EstimatorState apply_jump(const PackConfig& cfg, const EstimatorParams& params,
                          const EstimatorState& est, std::span<const double> z,
                          std::mt19937_64& rng);

/// Jump map. Requires N >= 2 and a state in D; ties among the extreme z_i
/// (i != sigma) are broken uniformly with `rng`.
EstimatorState jump_map(const PackConfig& cfg, const EstimatorParams& params,
                        const EstimatorState& est, std::span<const double> z,
                        std::mt19937_64& rng);

}  // namespace minsoc
