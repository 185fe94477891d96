#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "minsoc/hybrid_sim.hpp"

namespace minsoc {

/// Nominal cell of the reference 200-cell experiment.
struct NominalCell {
  double tau_d = 12.0;
  double r_d = 0.5e-3;
  double r_int = 0.5e-3;
  double q_ah = 6.0;
};

struct PackSpec {
  std::size_t n_cells = 200;
  NominalCell nominal;
  double dispersion = 0.10;  // relative standard deviation, in [0, 1)
  double soc0_center = 0.5;
  double soc0_spread = 0.02;  // SOC(0) ~ U[center - spread, center + spread]
  std::uint64_t seed = 1;
  // Draws with a non-positive parameter are redrawn at most this many times.
  int resample_cap = 1000;
};

struct GeneratedPack {
  PackConfig cfg;
  PlantState x0;  // u_rc = 0, soc drawn per cell
};

/// Each of tau_d, R_d, R_int, Q is drawn as nominal * (1 + dispersion * N(0,1));
/// C_d follows from tau_d / R_d. Deterministic for a given seed.
GeneratedPack generate_pack(const PackSpec& spec);

struct PulseTrainSpec {
  double t_end = 600.0;
  std::vector<double> amplitudes{-40.0, -20.0, -10.0, 0.0, 5.0, 10.0, 20.0, 30.0, 45.0};
  std::vector<double> durations{2.0, 5.0, 10.0, 20.0, 30.0};  // whole seconds keep the h grid aligned
  std::uint64_t seed = 1;
  // Net discharged charge stays within [-max/4, max]; 0 disables the limit.
  double max_throughput_ah = 1.5;
};

/// Synthetic drive-cycle-like current: consecutive pulses with amplitude and
/// duration drawn uniformly from the given sets.
CurrentProfile pulse_train(const PulseTrainSpec& spec);

}  // namespace minsoc
