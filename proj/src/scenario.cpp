#include "minsoc/scenario.hpp"

#include <random>
#include <string>

namespace minsoc {

GeneratedPack generate_pack(const PackSpec& spec) {
  if (spec.n_cells == 0) throw ConfigError("pack needs at least one cell");
  if (!(spec.dispersion >= 0.0 && spec.dispersion < 1.0)) throw ConfigError("dispersion must lie in [0, 1)");
  if (!(spec.soc0_spread >= 0.0)) throw ConfigError("soc0 spread must be non-negative");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](double nominal) {
    if (spec.dispersion == 0.0) return nominal;
    for (int attempt = 0; attempt <= spec.resample_cap; ++attempt) {
      const double v = nominal * (1.0 + spec.dispersion * gauss(rng));
      if (v > 0.0) return v;
    }
    throw ConfigError("could not draw a positive parameter around " + std::to_string(nominal));
  };

  GeneratedPack out;
  out.cfg.cells.reserve(spec.n_cells);
  for (std::size_t i = 0; i < spec.n_cells; ++i) {
    const double tau = draw(spec.nominal.tau_d);
    const double r_d = draw(spec.nominal.r_d);
    const double r_int = draw(spec.nominal.r_int);
    const double q = draw(spec.nominal.q_ah);
    out.cfg.cells.push_back(CellParams::make(tau, r_d, std::nullopt, r_int, q));
  }
  std::uniform_real_distribution<double> soc0(spec.soc0_center - spec.soc0_spread,
                                              spec.soc0_center + spec.soc0_spread);
  out.x0.u_rc.assign(spec.n_cells, 0.0);
  out.x0.soc.resize(spec.n_cells);
  for (auto& s : out.x0.soc) s = spec.soc0_spread == 0.0 ? spec.soc0_center : soc0(rng);
  return out;
}

CurrentProfile pulse_train(const PulseTrainSpec& spec) {
  if (spec.amplitudes.empty() || spec.durations.empty()) throw ConfigError("pulse train needs amplitudes and durations");
  for (double d : spec.durations)
    if (!(d > 0.0)) throw ConfigError("pulse durations must be positive");
  std::mt19937_64 rng(spec.seed);
  std::vector<CurrentProfile::Breakpoint> pts;
  const double window = spec.max_throughput_ah * 3600.0;
  double t = 0.0;
  double charge = 0.0;  // net discharged ampere-seconds so far
  while (t < spec.t_end) {
    double amps = spec.amplitudes[uniform_index(rng, spec.amplitudes.size())];
    const double dur = spec.durations[uniform_index(rng, spec.durations.size())];
    // Mirror pulses that would push the net charge out of [-window/4, window].
    const double next = charge + amps * dur;
    if (window > 0.0 && (next > window || next < -0.25 * window)) amps = -amps;
    charge += amps * dur;
    pts.push_back({t, amps});
    t += dur;
  }
  return CurrentProfile(std::move(pts));
}

}  // namespace minsoc
