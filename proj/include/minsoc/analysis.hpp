#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "minsoc/hybrid_sim.hpp"

namespace minsoc {

/// Constants entering the ISS bounds, evaluated for one pack and estimator.
struct BoundConstants {
  double d;       // max_i |1/tau_d - 1/tau_d,i|, 1/s
  double a1;      // min OCV slope, V per unit SOC
  double a2;      // max OCV slope
  double lambda;  // 4 / a1^2
  double a;       // min(ell a1, 1/tau_d)
  double c1;
  double c2;
  double c3;
  double c4;
  double b;       // convergence rate of the min-SOC bound
  double tau_d;
  double epsilon;

  /// Residual the SOC-extreme bound settles to once transients vanish.
  double steady_thm1(std::size_t n, double u_rc_sup) const;
};

BoundConstants compute_constants(const PackConfig& cfg, const EstimatorParams& params);

struct BoundRow {
  double t;
  std::size_t j;
  double lhs;
  double rhs;
  double margin;  // rhs + tol - lhs; negative means violated
};

struct BoundReport {
  std::string name;
  std::vector<BoundRow> rows;
  bool pass = true;
  double max_violation = 0.0;  // max over rows of lhs - rhs - tol, clipped at 0
  double argmax_t = 0.0;       // time of the worst margin
  std::string diagnosis;       // set on failure
  double worst_margin = std::numeric_limits<double>::infinity();

  void add(double t, std::size_t j, double lhs, double rhs, double tol);
};

/// Closed-form tolerance: 1e-9 + 1e-6 * rhs.
double bound_tolerance(double rhs);

/// Running sup of |U_RC| (Euclidean) over the recorded samples.
std::vector<double> running_u_rc_sup(const HybridTrace& trace);

/// |U_RC - U_RC_hat| (Euclidean) at sample k.
double u_rc_error_norm(const PackConfig& cfg, const HybridTrace& trace, std::size_t k);

/// |e| with e = (SOC_sigma - soc_hat, U_RC,1 - U_RC_hat,1, ...).
double full_error_norm(const PackConfig& cfg, const HybridTrace& trace, std::size_t k);

BoundReport check_prop1(const PackConfig& cfg, const HybridTrace& trace);
BoundReport check_prop2(const PackConfig& cfg, const HybridTrace& trace);
BoundReport check_thm1(const PackConfig& cfg, const HybridTrace& trace);

double lyapunov_v1(const PackConfig& cfg, const HybridState& q);
double lyapunov_v2(const PackConfig& cfg, const HybridState& q, const BoundConstants& k);

/// Flow and jump inequalities for V1 and V2. Returns four reports:
/// v1_flow, v2_flow, v1_jump, v2_jump.
std::vector<BoundReport> check_lyapunov_inequalities(const PackConfig& cfg, const HybridTrace& trace,
                                                     const BoundConstants& k);

struct DwellStats {
  double tau_min = std::numeric_limits<double>::infinity();
  bool rate_bound_ok = true;
  std::size_t jumps = 0;
  std::size_t max_jumps_in_1s = 0;
};

DwellStats dwell_time_stats(const HybridTrace& trace);

/// Assumption checks that explain a failed bound (OCV slope window, forced
/// re-projections, D outside C).
std::string assumption_diagnosis(const PackConfig& cfg, const HybridTrace& trace);

/// Every check above on one trace.
std::vector<BoundReport> verify_trace(const PackConfig& cfg, const HybridTrace& trace);

struct OracleInit {
  std::vector<double> soc_hat0;   // empty: exact (soc_hat_i = SOC_i)
  std::vector<double> u_bar_rc0;  // empty: exact (C_d,i U_RC,i)
};

struct OracleResult {
  std::vector<double> t;
  std::vector<std::vector<double>> soc_hat;  // [cell][sample]
  std::vector<std::vector<double>> soc;      // [cell][sample]
  std::vector<double> soc_hat_extreme(Mode mode) const;
};

/// Brute-force baseline: one single-cell observer per cell, each with its own
/// time constant, integrated with the same fixed-step RK4 and breakpoint
/// alignment as the hybrid simulator.
OracleResult observer_bank_oracle(const PackConfig& cfg, const CurrentProfile& profile,
                                  const PlantState& x0, double t_end, double h, double ell,
                                  const OracleInit& init = {});

}  // namespace minsoc
