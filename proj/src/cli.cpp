#include "minsoc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "minsoc/io.hpp"
#include "minsoc/svg_plot.hpp"

namespace minsoc::cli {

namespace fs = std::filesystem;

PreparedScenario prepare(const ScenarioSpec& spec) {
  PreparedScenario p;
  if (spec.pack_file) {
    auto pack = io::read_pack_json(*spec.pack_file);
    p.cfg = std::move(pack.cfg);
    p.x0 = std::move(pack.x0);
  } else {
    auto pack = generate_pack(spec.generated);
    p.cfg = std::move(pack.cfg);
    p.x0 = std::move(pack.x0);
  }

  if (spec.profile == "phev") {
    PulseTrainSpec pulse = spec.pulse;
    pulse.t_end = spec.sim.t_end;
    p.profile = pulse_train(pulse);
  } else if (spec.profile.rfind("constant:", 0) == 0) {
    const std::string value = spec.profile.substr(9);
    std::size_t used = 0;
    double amps = 0.0;
    try {
      amps = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) throw ConfigError("bad constant profile '" + spec.profile + "'");
    p.profile = CurrentProfile::constant(amps);
  } else {
    p.profile = io::read_profile_csv(spec.profile);
  }

  p.params = spec.params;
  p.params.tau_d = select_tau_d(p.cfg, spec.tau);
  p.params.validate();

  const std::size_t n = p.cfg.size();
  const std::size_t sigma1 = spec.sigma0.value_or(std::min<std::size_t>(150, n));
  if (sigma1 < 1 || sigma1 > n) throw ConfigError("sigma0 must lie in 1..N");
  p.q0 = {p.x0, {spec.u_bar_rc0, spec.soc_hat0, sigma1 - 1}};
  p.sim = spec.sim;
  return p;
}

bool Verification::pass() const {
  const bool dwell_ok = (dwell.jumps < 2 || dwell.tau_min > 0.0) && dwell.rate_bound_ok;
  return dwell_ok && std::all_of(reports.begin(), reports.end(), [](const BoundReport& r) { return r.pass; });
}

Verification verify(const PackConfig& cfg, const HybridTrace& trace) {
  return {verify_trace(cfg, trace), dwell_time_stats(trace)};
}

int cmd_simulate(const ScenarioSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    const auto p = prepare(spec);
    const HybridTrace trace = run(p.cfg, p.params, p.q0, p.profile, p.sim);
    io::write_run(spec.out_dir, p.cfg, p.x0, p.profile, trace);
    const auto& last = trace.sample(trace.size() - 1);
    out << "cells=" << p.cfg.size() << " tau_d=" << p.params.tau_d << " samples=" << trace.size()
        << " jumps=" << trace.jumps.size() << " final sigma=" << last.est.sigma + 1
        << " soc_hat=" << 100.0 * last.est.soc_hat << "%\n"
        << "wrote " << spec.out_dir.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return kExitUsage;
  }
}

int cmd_verify(const fs::path& dir, std::ostream& out, std::ostream& err) {
  Verification v;
  try {
    const auto loaded = io::read_run(dir);
    v = verify(loaded.pack.cfg, loaded.trace);
    io::write_report_csv(dir / io::kReportCsv, v.reports);
    io::write_text(dir / io::kReportJson, io::format_report_json(v.reports, v.dwell));
  } catch (const std::exception& e) {
    err << "verify: " << e.what() << '\n';
    return kExitUsage;
  }
  for (const auto& r : v.reports) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << " max_violation=" << r.max_violation
        << " worst_t=" << r.argmax_t << '\n';
    if (!r.pass) out << "  " << r.diagnosis << '\n';
  }
  const bool dwell_ok = (v.dwell.jumps < 2 || v.dwell.tau_min > 0.0) && v.dwell.rate_bound_ok;
  out << (dwell_ok ? "PASS " : "FAIL ") << "dwell_time jumps=" << v.dwell.jumps << " tau_min=" << v.dwell.tau_min
      << " max_jumps_in_1s=" << v.dwell.max_jumps_in_1s << '\n';
  return v.pass() ? kExitOk : kExitBoundFail;
}

int cmd_plot(const fs::path& dir, std::ostream& out, std::ostream& err) {
  try {
    const auto loaded = io::read_run(dir);
    const auto& tr = loaded.trace;
    const Mode mode = tr.meta.params.mode;
    const std::string which = mode == Mode::min ? "min" : "max";

    svg::Series est{"SOC_hat", {}, {}, "#d62728"};
    svg::Series truth{"SOC_" + which + " (true)", {}, {}, "#1f77b4"};
    svg::Series error{"|SOC_" + which + " - SOC_hat|", {}, {}, "#2ca02c"};
    svg::Series sigma{"sigma", {}, {}, "#d62728", true};
    svg::Series arg{"index of SOC_" + which, {}, {}, "#1f77b4", true};
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const auto& s = tr.sample(k);
      const auto soc = tr.soc(k);
      const auto it = mode == Mode::min ? std::min_element(soc.begin(), soc.end())
                                        : std::max_element(soc.begin(), soc.end());
      est.x.push_back(s.t);
      est.y.push_back(100.0 * s.est.soc_hat);
      truth.x.push_back(s.t);
      truth.y.push_back(100.0 * *it);
      error.x.push_back(s.t);
      error.y.push_back(100.0 * std::abs(*it - s.est.soc_hat));
      sigma.x.push_back(s.t);
      sigma.y.push_back(static_cast<double>(s.est.sigma + 1));
      arg.x.push_back(s.t);
      arg.y.push_back(static_cast<double>(it - soc.begin() + 1));
    }
    svg::write(dir / "soc_estimate.svg",
               {"SOC_" + which + " and its hybrid estimate", "time [s]", "SOC [%]", {truth, est}});
    svg::write(dir / "soc_error.svg", {"Estimation error", "time [s]", "|error| [% SOC]", {error}});
    svg::write(dir / "sigma_index.svg",
               {"Selected cell and true SOC_" + which + " index", "time [s]", "cell index [-]", {arg, sigma}});
    out << "wrote soc_estimate.svg soc_error.svg sigma_index.svg to " << dir.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "plot: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace minsoc::cli
