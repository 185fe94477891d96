#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "minsoc/estimator.hpp"

namespace minsoc {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the jump-rate guards trip.
class ZenoError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Piecewise-constant, right-continuous pack current.
class CurrentProfile {
 public:
  struct Breakpoint {
    double t;
    double amps;
  };

  CurrentProfile() = default;
  explicit CurrentProfile(std::vector<Breakpoint> points);

  static CurrentProfile constant(double amps) { return CurrentProfile({{0.0, amps}}); }

  double at(double t) const;
  double sup_abs() const;
  std::span<const Breakpoint> points() const { return points_; }

 private:
  std::vector<Breakpoint> points_;
};

struct SimOptions {
  double t_end = 600.0;
  double h = 0.01;
  std::uint64_t seed = 1;
  bool auto_init = false;
  double max_jumps_per_second = 1e3;
  // Grid samples are stored every `record_stride` steps; jump samples always.
  std::size_t record_stride = 1;
};

struct TraceSample {
  double t;
  std::size_t j;
  double u;
  EstimatorState est;
  bool in_c;
  bool in_d;
};

struct JumpRecord {
  double t;
  std::size_t j;  // jump counter before the jump
  std::size_t sigma_before;
  std::size_t sigma_after;
  double soc_hat_before;
  double soc_hat_after;
  bool forced;    // taken from a state outside the jump set
};

struct TraceMeta {
  std::uint64_t seed = 0;
  double h = 0.0;
  double t_end = 0.0;
  EstimatorParams params;
};

struct Diagnostics {
  std::size_t forced_jumps = 0;
  std::size_t window_overshoots = 0;
  std::size_t d_outside_c = 0;
  std::size_t max_chain = 0;
  std::vector<std::string> log;
};

/// Recorded hybrid arc. Plant states are stored row-major (one row of N per
/// sample) so long runs of large packs stay compact.
class HybridTrace {
 public:
  explicit HybridTrace(std::size_t n_cells = 0) : n_(n_cells) {}

  void append(const TraceSample& s, const PlantState& x);
  void append(const TraceSample& s, std::span<const double> u_rc, std::span<const double> soc);

  std::size_t n_cells() const { return n_; }
  std::size_t size() const { return samples_.size(); }
  const TraceSample& sample(std::size_t k) const { return samples_[k]; }
  std::span<const TraceSample> samples() const { return samples_; }
  std::span<const double> u_rc(std::size_t k) const { return {u_rc_.data() + k * n_, n_}; }
  std::span<const double> soc(std::size_t k) const { return {soc_.data() + k * n_, n_}; }
  PlantState plant(std::size_t k) const;
  HybridState state(std::size_t k) const;

  std::vector<JumpRecord> jumps;
  TraceMeta meta;
  Diagnostics diagnostics;

 private:
  std::size_t n_;
  std::vector<TraceSample> samples_;
  std::vector<double> u_rc_;
  std::vector<double> soc_;
};

/// One classical RK4 step of the closed-loop flow with constant current.
HybridState flow_step(const PackConfig& cfg, const EstimatorParams& params, const HybridState& q,
                      double u, double h);

/// RK4 step of the plant alone.
PlantState plant_step(const PackConfig& cfg, const PlantState& x, double u, double h);

struct SetMembership {
  bool in_c;
  bool in_d;
};

SetMembership classify(const PackConfig& cfg, const EstimatorParams& params, const HybridState& q,
                       double u);

/// Whether the active jump policy requires leaving the flow at q.
bool jump_triggered(const PackConfig& cfg, const EstimatorParams& params, const HybridState& q,
                    double u);

struct RefinedEvent {
  double dt;          // offset from the start of the step
  HybridState state;  // state at the returned offset
  bool overshoot;     // the refined state is outside C and D
};

/// Localises the first time within a step at which the jump policy triggers,
/// by bisection on the step fraction down to 1e-6 h. For the boundary policy
/// the returned state is the last one still inside C.
RefinedEvent event_refine(const PackConfig& cfg, const EstimatorParams& params,
                          const HybridState& q_before, const HybridState& q_after, double u,
                          double h);

/// Executes a hybrid solution from q0 over [0, t_end]. Steps are aligned to
/// the profile's breakpoints, which must sit on the h grid.
HybridTrace run(const PackConfig& cfg, const EstimatorParams& params, HybridState q0,
                const CurrentProfile& profile, const SimOptions& opts);

/// Feasible start: soc_hat from the extreme z_i over all cells and sigma at
/// its argument. Leaves u_bar_rc untouched.
EstimatorState auto_initialize(const PackConfig& cfg, const EstimatorParams& params,
                               const HybridState& q, double u);

struct SweepJob {
  const PackConfig* cfg;
  EstimatorParams params;
  HybridState q0;
  const CurrentProfile* profile;
  SimOptions opts;
};

/// Runs independent simulations concurrently; results keep the job order.
/// `consume` is invoked once per finished trace (serialised) if given, after
/// which the trace is dropped to bound memory.
std::vector<HybridTrace> run_sweep(const std::vector<SweepJob>& jobs, unsigned threads,
                                   const std::function<void(std::size_t, HybridTrace&&)>& consume = {});

}  // namespace minsoc
