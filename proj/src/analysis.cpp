#include "minsoc/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace minsoc {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double extreme(std::span<const double> v, Mode mode) {
  return mode == Mode::min ? *std::min_element(v.begin(), v.end())
                           : *std::max_element(v.begin(), v.end());
}

constexpr double kJumpTol = 1e-12;

}  // namespace

double BoundConstants::steady_thm1(std::size_t n, double u_rc_sup) const {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  return (1.0 / a1 + c3) * epsilon + (sqrt_n * tau_d / a1 + c4) * d * u_rc_sup;
}

BoundConstants compute_constants(const PackConfig& cfg, const EstimatorParams& params) {
  cfg.validate();
  params.validate();
  BoundConstants k{};
  k.tau_d = params.tau_d;
  k.epsilon = params.epsilon;
  k.d = 0.0;
  for (const auto& c : cfg.cells) k.d = std::max(k.d, std::abs(1.0 / params.tau_d - 1.0 / c.tau_d));
  k.a1 = cfg.ocv.a1();
  k.a2 = cfg.ocv.a2();
  k.lambda = 4.0 / (k.a1 * k.a1);
  k.a = std::min(params.ell * k.a1, 1.0 / params.tau_d);
  k.c1 = std::sqrt(std::max(1.0, k.lambda));
  k.c2 = k.a / 2.0;
  k.c3 = 4.0 / k.a1;
  k.c4 = (2.0 / k.a1) * std::sqrt(params.tau_d / k.a);
  k.b = std::min(1.0 / (2.0 * params.tau_d), k.c2);
  return k;
}

double bound_tolerance(double rhs) { return 1e-9 + 1e-6 * std::abs(rhs); }

void BoundReport::add(double t, std::size_t j, double lhs, double rhs, double tol) {
  const double margin = rhs + tol - lhs;
  rows.push_back({t, j, lhs, rhs, margin});
  if (margin < worst_margin) {
    worst_margin = margin;
    argmax_t = t;
  }
  if (margin < 0.0) pass = false;
  max_violation = std::max(max_violation, -margin);
}

std::vector<double> running_u_rc_sup(const HybridTrace& trace) {
  std::vector<double> sup(trace.size());
  double s = 0.0;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    s = std::max(s, norm2(trace.u_rc(k)));
    sup[k] = s;
  }
  return sup;
}

double u_rc_error_norm(const PackConfig& cfg, const HybridTrace& trace, std::size_t k) {
  const auto u = trace.u_rc(k);
  const double ub = trace.sample(k).est.u_bar_rc;
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - ub / cfg.cells[i].c_d;
    s += e * e;
  }
  return std::sqrt(s);
}

double full_error_norm(const PackConfig& cfg, const HybridTrace& trace, std::size_t k) {
  const auto& est = trace.sample(k).est;
  const double es = trace.soc(k)[est.sigma] - est.soc_hat;
  const double eu = u_rc_error_norm(cfg, trace, k);
  return std::sqrt(es * es + eu * eu);
}

BoundReport check_prop1(const PackConfig& cfg, const HybridTrace& trace) {
  const auto k = compute_constants(cfg, trace.meta.params);
  BoundReport rep;
  rep.name = "prop1_u_rc_iss";
  if (trace.size() == 0) return rep;
  const double sqrt_n = std::sqrt(static_cast<double>(cfg.size()));
  const double e0 = u_rc_error_norm(cfg, trace, 0);
  const auto sup = running_u_rc_sup(trace);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& s = trace.sample(i);
    const double lhs = u_rc_error_norm(cfg, trace, i);
    const double rhs = sqrt_n * e0 * std::exp(-s.t / (2.0 * k.tau_d)) + sqrt_n * k.tau_d * k.d * sup[i];
    rep.add(s.t, s.j, lhs, rhs, bound_tolerance(rhs));
  }
  if (!rep.pass) rep.diagnosis = assumption_diagnosis(cfg, trace);
  return rep;
}

BoundReport check_prop2(const PackConfig& cfg, const HybridTrace& trace) {
  const auto k = compute_constants(cfg, trace.meta.params);
  BoundReport rep;
  rep.name = "prop2_soc_sigma_iss";
  if (trace.size() == 0) return rep;
  const double e0 = full_error_norm(cfg, trace, 0);
  const auto sup = running_u_rc_sup(trace);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& s = trace.sample(i);
    const double lhs = std::abs(trace.soc(i)[s.est.sigma] - s.est.soc_hat);
    const double rhs = k.c1 * e0 * std::exp(-k.c2 * s.t) + k.c3 * k.epsilon + k.c4 * k.d * sup[i];
    rep.add(s.t, s.j, lhs, rhs, bound_tolerance(rhs));
  }
  if (!rep.pass) rep.diagnosis = assumption_diagnosis(cfg, trace);
  return rep;
}

BoundReport check_thm1(const PackConfig& cfg, const HybridTrace& trace) {
  const auto k = compute_constants(cfg, trace.meta.params);
  const Mode mode = trace.meta.params.mode;
  BoundReport rep;
  rep.name = "thm1_soc_extreme";
  if (trace.size() == 0) return rep;
  const double sqrt_n = std::sqrt(static_cast<double>(cfg.size()));
  const double e0 = full_error_norm(cfg, trace, 0);
  const auto sup = running_u_rc_sup(trace);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& s = trace.sample(i);
    const double lhs = std::abs(s.est.soc_hat - extreme(trace.soc(i), mode));
    const double rhs = (sqrt_n / k.a1 + k.c1) * e0 * std::exp(-k.b * s.t) +
                       (1.0 / k.a1 + k.c3) * k.epsilon +
                       (sqrt_n * k.tau_d / k.a1 + k.c4) * k.d * sup[i];
    rep.add(s.t, s.j, lhs, rhs, bound_tolerance(rhs));
  }
  if (!rep.pass) rep.diagnosis = assumption_diagnosis(cfg, trace);
  return rep;
}

double lyapunov_v1(const PackConfig& cfg, const HybridState& q) {
  double v = 0.0;
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    const double e = q.plant.u_rc[i] - q.est.u_bar_rc / cfg.cells[i].c_d;
    v = std::max(v, e * e);
  }
  return v;
}

double lyapunov_v2(const PackConfig& cfg, const HybridState& q, const BoundConstants& k) {
  const double e = q.plant.soc[q.est.sigma] - q.est.soc_hat;
  return std::max(e * e, k.lambda * lyapunov_v1(cfg, q));
}

namespace {

struct LyapunovSample {
  double v1;
  double v2;
  double soc_branch;      // (SOC_sigma - soc_hat)^2
  std::size_t v1_arg;     // cell attaining V1
  bool v2_soc_active;     // V2 attained by the SOC branch
  double u_rc_sq;         // |U_RC|^2
  std::vector<double> w;  // per-cell (U_RC,i - U_RC_hat,i)^2
};

LyapunovSample lyapunov_sample(const PackConfig& cfg, const HybridTrace& trace, std::size_t k,
                               const BoundConstants& c) {
  LyapunovSample s{};
  const auto u = trace.u_rc(k);
  const auto& est = trace.sample(k).est;
  s.w.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - est.u_bar_rc / cfg.cells[i].c_d;
    s.w[i] = e * e;
    if (s.w[i] > s.v1) {
      s.v1 = s.w[i];
      s.v1_arg = i;
    }
    s.u_rc_sq += u[i] * u[i];
  }
  const double es = trace.soc(k)[est.sigma] - est.soc_hat;
  s.soc_branch = es * es;
  s.v2_soc_active = s.soc_branch >= c.lambda * s.v1;
  s.v2 = std::max(s.soc_branch, c.lambda * s.v1);
  return s;
}

}  // namespace

std::vector<BoundReport> check_lyapunov_inequalities(const PackConfig& cfg, const HybridTrace& trace,
                                                     const BoundConstants& c) {
  BoundReport v1_flow;
  v1_flow.name = "lyapunov_v1_flow";
  BoundReport v2_flow;
  v2_flow.name = "lyapunov_v2_flow";
  BoundReport v1_jump;
  v1_jump.name = "lyapunov_v1_jump";
  BoundReport v2_jump;
  v2_jump.name = "lyapunov_v2_jump";
  if (trace.size() < 2) return {v1_flow, v2_flow, v1_jump, v2_jump};

  std::vector<LyapunovSample> ls;
  ls.reserve(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) ls.push_back(lyapunov_sample(cfg, trace, k, c));

  const double drive = c.tau_d * c.d * c.d;
  auto rhs1 = [&](double v, const LyapunovSample& s) { return -v / c.tau_d + drive * s.u_rc_sq; };
  auto rhs2 = [&](double v, const LyapunovSample& s) { return -c.a * v + c.lambda * drive * s.u_rc_sq; };

  auto is_flow = [&](std::size_t k) {
    return trace.sample(k).j == trace.sample(k + 1).j && trace.sample(k + 1).t > trace.sample(k).t;
  };

  // Step-halving estimate of the finite-difference error constant on smooth stretches.
  double c_fd1 = 0.0;
  double c_fd2 = 0.0;
  for (std::size_t k = 1; k + 1 < trace.size(); ++k) {
    if (!is_flow(k - 1) || !is_flow(k)) continue;
    if (ls[k - 1].v1_arg != ls[k].v1_arg || ls[k].v1_arg != ls[k + 1].v1_arg) continue;
    if (ls[k - 1].v2_soc_active != ls[k].v2_soc_active || ls[k].v2_soc_active != ls[k + 1].v2_soc_active)
      continue;
    const double dt0 = trace.sample(k).t - trace.sample(k - 1).t;
    const double dt1 = trace.sample(k + 1).t - trace.sample(k).t;
    const double dt2 = dt0 + dt1;
    const double fine1 = (ls[k + 1].v1 - ls[k].v1) / dt1;
    const double coarse1 = (ls[k + 1].v1 - ls[k - 1].v1) / dt2;
    const double fine2 = (ls[k + 1].v2 - ls[k].v2) / dt1;
    const double coarse2 = (ls[k + 1].v2 - ls[k - 1].v2) / dt2;
    c_fd1 = std::max(c_fd1, std::abs(coarse1 - fine1) / dt1);
    c_fd2 = std::max(c_fd2, std::abs(coarse2 - fine2) / dt1);
  }

  for (std::size_t k = 0; k + 1 < trace.size(); ++k) {
    const auto& s0 = trace.sample(k);
    const auto& s1 = trace.sample(k + 1);
    if (is_flow(k)) {
      const double dt = s1.t - s0.t;
      const auto& a = ls[k];
      const auto& b = ls[k + 1];
      const double tol1 = 1e-6 + c_fd1 * dt;
      const double tol2 = 1e-6 + c_fd2 * dt;
      v1_flow.add(s0.t, s0.j, (b.v1 - a.v1) / dt, std::max(rhs1(a.v1, a), rhs1(b.v1, b)), tol1);
      v2_flow.add(s0.t, s0.j, (b.v2 - a.v2) / dt, std::max(rhs2(a.v2, a), rhs2(b.v2, b)), tol2);

      // At an active-branch switch the inequality must hold for both branches.
      if (a.v1_arg != b.v1_arg) {
        for (std::size_t i : {a.v1_arg, b.v1_arg})
          v1_flow.add(s0.t, s0.j, (b.w[i] - a.w[i]) / dt, std::max(rhs1(a.w[i], a), rhs1(b.w[i], b)), tol1);
      }
      if (a.v2_soc_active != b.v2_soc_active) {
        v2_flow.add(s0.t, s0.j, (b.soc_branch - a.soc_branch) / dt,
                    std::max(rhs2(a.soc_branch, a), rhs2(b.soc_branch, b)), tol2);
        v2_flow.add(s0.t, s0.j, c.lambda * (b.v1 - a.v1) / dt,
                    std::max(rhs2(c.lambda * a.v1, a), rhs2(c.lambda * b.v1, b)), tol2);
      }
    } else if (s1.j == s0.j + 1) {
      const auto& a = ls[k];
      const auto& b = ls[k + 1];
      v1_jump.add(s0.t, s0.j, std::abs(b.v1 - a.v1), 0.0, kJumpTol);
      const double cap = std::max(a.v2, 0.5 * a.v2 + 8.0 * c.epsilon * c.epsilon / (c.a1 * c.a1));
      v2_jump.add(s0.t, s0.j, b.v2, cap, kJumpTol);
    }
  }
  std::vector<BoundReport> out{v1_flow, v2_flow, v1_jump, v2_jump};
  for (auto& r : out)
    if (!r.pass) r.diagnosis = assumption_diagnosis(cfg, trace);
  return out;
}

DwellStats dwell_time_stats(const HybridTrace& trace) {
  DwellStats st;
  std::vector<double> times;
  for (std::size_t k = 0; k + 1 < trace.size(); ++k)
    if (trace.sample(k + 1).j == trace.sample(k).j + 1) times.push_back(trace.sample(k).t);
  st.jumps = times.size();
  for (std::size_t p = 1; p < times.size(); ++p) st.tau_min = std::min(st.tau_min, times[p] - times[p - 1]);

  std::size_t lo = 0;
  for (std::size_t q = 0; q < times.size(); ++q) {
    while (times[lo] <= times[q] - 1.0) ++lo;
    st.max_jumps_in_1s = std::max(st.max_jumps_in_1s, q - lo + 1);
  }

  if (times.size() >= 2) {
    if (!(st.tau_min > 0.0)) {
      st.rate_bound_ok = false;
    } else {
      for (std::size_t p = 0; p < times.size() && st.rate_bound_ok; ++p)
        for (std::size_t q = p + 1; q < times.size(); ++q)
          if (static_cast<double>(q - p) > (times[q] - times[p]) / st.tau_min + 1.0 + 1e-9) {
            st.rate_bound_ok = false;
            break;
          }
    }
  }
  return st;
}

std::string assumption_diagnosis(const PackConfig& cfg, const HybridTrace& trace) {
  std::ostringstream os;
  const auto& ocv = cfg.ocv;
  const auto knots = ocv.knots();
  const double lo = knots.front().soc - 0.5;
  const double hi = knots.back().soc + 0.5;
  std::size_t slope_violations = 0;
  for (int i = 0; i <= 20000; ++i) {
    const double s = lo + (hi - lo) * i / 20000.0;
    const double d = ocv.slope(s);
    if (d < ocv.a1() - 1e-9 || d > ocv.a2() + 1e-9) ++slope_violations;
  }
  if (slope_violations > 0) os << "OCV slope outside [a1, a2] at " << slope_violations << " points; ";

  std::size_t outside = 0;
  for (const auto& s : trace.samples())
    if (!s.in_c && !s.in_d) ++outside;
  if (outside > 0) os << outside << " samples outside C and D (solution left the hybrid model's domain); ";
  if (trace.diagnostics.forced_jumps > 0)
    os << trace.diagnostics.forced_jumps << " forced re-projection jumps; ";
  if (trace.diagnostics.window_overshoots > 0)
    os << trace.diagnostics.window_overshoots << " jump-window overshoots; ";
  if (trace.diagnostics.d_outside_c > 0) os << trace.diagnostics.d_outside_c << " states in D but not C; ";
  std::string text = os.str();
  if (text.empty()) return "all model assumptions hold on this trace; suspect an implementation or data error";
  return text;
}

std::vector<BoundReport> verify_trace(const PackConfig& cfg, const HybridTrace& trace) {
  std::vector<BoundReport> out;
  out.push_back(check_prop1(cfg, trace));
  out.push_back(check_prop2(cfg, trace));
  out.push_back(check_thm1(cfg, trace));
  const auto k = compute_constants(cfg, trace.meta.params);
  for (auto& r : check_lyapunov_inequalities(cfg, trace, k)) out.push_back(std::move(r));
  return out;
}

std::vector<double> OracleResult::soc_hat_extreme(Mode mode) const {
  std::vector<double> out(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    double v = soc_hat.front()[k];
    for (const auto& cell : soc_hat) v = mode == Mode::min ? std::min(v, cell[k]) : std::max(v, cell[k]);
    out[k] = v;
  }
  return out;
}

OracleResult observer_bank_oracle(const PackConfig& cfg, const CurrentProfile& profile,
                                  const PlantState& x0, double t_end, double h, double ell,
                                  const OracleInit& init) {
  cfg.validate();
  const std::size_t n = cfg.size();
  const auto steps = static_cast<std::size_t>(std::llround(t_end / h));
  OracleResult out;
  out.t.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) out.t[k] = static_cast<double>(k) * h;
  out.soc_hat.assign(n, std::vector<double>(steps + 1));
  out.soc.assign(n, std::vector<double>(steps + 1));

  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = cfg.cells[i];
    // Single-cell observer with sigma fixed at i and tau_d = tau_d,i.
    auto rhs = [&](const std::array<double, 4>& y, double u) {
      const double y_meas = -y[0] - c.r_int * u + cfg.ocv.eval(y[1]);
      const double y_hat = -y[2] / c.c_d - c.r_int * u + cfg.ocv.eval(y[3]);
      return std::array<double, 4>{-y[0] / c.tau_d + u / c.c_d, -u / (3600.0 * c.q_ah),
                                   -y[2] / c.tau_d + u,
                                   -u / (3600.0 * c.q_ah) + ell * (y_meas - y_hat)};
    };
    std::array<double, 4> y{x0.u_rc[i], x0.soc[i],
                            init.u_bar_rc0.empty() ? c.c_d * x0.u_rc[i] : init.u_bar_rc0[i],
                            init.soc_hat0.empty() ? x0.soc[i] : init.soc_hat0[i]};
    out.soc[i][0] = y[1];
    out.soc_hat[i][0] = y[3];
    for (std::size_t k = 0; k < steps; ++k) {
      const double u = profile.at(static_cast<double>(k) * h + 0.5 * h);
      const auto k1 = rhs(y, u);
      std::array<double, 4> tmp{};
      for (int m = 0; m < 4; ++m) tmp[m] = y[m] + 0.5 * h * k1[m];
      const auto k2 = rhs(tmp, u);
      for (int m = 0; m < 4; ++m) tmp[m] = y[m] + 0.5 * h * k2[m];
      const auto k3 = rhs(tmp, u);
      for (int m = 0; m < 4; ++m) tmp[m] = y[m] + h * k3[m];
      const auto k4 = rhs(tmp, u);
      for (int m = 0; m < 4; ++m) y[m] += h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
      out.soc[i][k + 1] = y[1];
      out.soc_hat[i][k + 1] = y[3];
    }
  }
  return out;
}

}  // namespace minsoc
