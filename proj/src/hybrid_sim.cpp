#include "minsoc/hybrid_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace minsoc {

CurrentProfile::CurrentProfile(std::vector<Breakpoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("current profile is empty");
  if (points_.front().t != 0.0) throw ConfigError("current profile must start at t = 0");
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (!std::isfinite(points_[k].amps) || !std::isfinite(points_[k].t))
      throw ConfigError("current profile contains a non-finite entry");
    if (k > 0 && !(points_[k].t > points_[k - 1].t))
      throw ConfigError("current profile times must be strictly increasing");
  }
}

double CurrentProfile::at(double t) const {
  auto it = std::upper_bound(points_.begin(), points_.end(), t,
                             [](double v, const Breakpoint& b) { return v < b.t; });
  if (it == points_.begin()) return points_.front().amps;
  return std::prev(it)->amps;
}

double CurrentProfile::sup_abs() const {
  double s = 0.0;
  for (const auto& b : points_) s = std::max(s, std::abs(b.amps));
  return s;
}

void HybridTrace::append(const TraceSample& s, const PlantState& x) { append(s, x.u_rc, x.soc); }

void HybridTrace::append(const TraceSample& s, std::span<const double> u_rc,
                         std::span<const double> soc) {
  if (u_rc.size() != n_ || soc.size() != n_) throw std::invalid_argument("trace row size mismatch");
  samples_.push_back(s);
  u_rc_.insert(u_rc_.end(), u_rc.begin(), u_rc.end());
  soc_.insert(soc_.end(), soc.begin(), soc.end());
}

PlantState HybridTrace::plant(std::size_t k) const {
  const auto a = u_rc(k);
  const auto b = soc(k);
  return {{a.begin(), a.end()}, {b.begin(), b.end()}};
}

HybridState HybridTrace::state(std::size_t k) const { return {plant(k), samples_[k].est}; }

namespace {

// Plant right-hand side on the flat layout [u_rc(0..n), soc(0..n)].
void plant_rhs(const PackConfig& cfg, const double* y, double u, double* dy) {
  const std::size_t n = cfg.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = cfg.cells[i];
    dy[i] = -y[i] / c.tau_d + u / c.c_d;
    dy[n + i] = -u / (3600.0 * c.q_ah);
  }
}

// Closed-loop right-hand side on [u_rc, soc, u_bar_rc, soc_hat].
void closed_loop_rhs(const PackConfig& cfg, const EstimatorParams& params, std::size_t sigma,
                     const double* y, double u, double* dy) {
  const std::size_t n = cfg.size();
  plant_rhs(cfg, y, u, dy);
  const auto& cs = cfg.cells[sigma];
  const double y_sigma = -y[sigma] - cs.r_int * u + cfg.ocv.eval(y[n + sigma]);
  const EstimatorState est{y[2 * n], y[2 * n + 1], sigma};
  const auto rate = estimator_flow(cfg, params, est, y_sigma, u);
  dy[2 * n] = rate.u_bar_rc;
  dy[2 * n + 1] = rate.soc_hat;
}

template <class Rhs>
void rk4(std::vector<double>& y, double h, Rhs&& rhs) {
  const std::size_t m = y.size();
  std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
  rhs(y.data(), k1.data());
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  rhs(tmp.data(), k2.data());
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  rhs(tmp.data(), k3.data());
  for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * k3[i];
  rhs(tmp.data(), k4.data());
  for (std::size_t i = 0; i < m; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

PlantState plant_step(const PackConfig& cfg, const PlantState& x, double u, double h) {
  const std::size_t n = cfg.size();
  std::vector<double> y(2 * n);
  std::copy(x.u_rc.begin(), x.u_rc.end(), y.begin());
  std::copy(x.soc.begin(), x.soc.end(), y.begin() + n);
  rk4(y, h, [&](const double* s, double* ds) { plant_rhs(cfg, s, u, ds); });
  return {{y.begin(), y.begin() + n}, {y.begin() + n, y.end()}};
}

HybridState flow_step(const PackConfig& cfg, const EstimatorParams& params, const HybridState& q,
                      double u, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("flow step requires h > 0");
  const std::size_t n = cfg.size();
  std::vector<double> y(2 * n + 2);
  std::copy(q.plant.u_rc.begin(), q.plant.u_rc.end(), y.begin());
  std::copy(q.plant.soc.begin(), q.plant.soc.end(), y.begin() + n);
  y[2 * n] = q.est.u_bar_rc;
  y[2 * n + 1] = q.est.soc_hat;
  rk4(y, h, [&](const double* s, double* ds) { closed_loop_rhs(cfg, params, q.est.sigma, s, u, ds); });
  if (!all_finite(y)) throw SimulationError("integrator produced a non-finite state");
  HybridState out;
  out.plant.u_rc.assign(y.begin(), y.begin() + n);
  out.plant.soc.assign(y.begin() + n, y.begin() + 2 * n);
  out.est = {y[2 * n], y[2 * n + 1], q.est.sigma};
  return out;
}

SetMembership classify(const PackConfig& cfg, const EstimatorParams& params, const HybridState& q,
                       double u) {
  const auto z = compute_z(cfg, q, u);
  return {in_flow_set(cfg, params, q.est, z), in_jump_set(cfg, params, q.est, z)};
}

bool jump_triggered(const PackConfig& cfg, const EstimatorParams& params, const HybridState& q,
                    double u) {
  if (cfg.size() < 2) return false;
  const auto m = classify(cfg, params, q, u);
  if (params.policy == JumpPolicy::priority) return m.in_d || !m.in_c;
  return !m.in_c;
}

RefinedEvent event_refine(const PackConfig& cfg, const EstimatorParams& params,
                          const HybridState& q_before, const HybridState& q_after, double u,
                          double h) {
  auto overshoot = [&](const HybridState& q) {
    const auto m = classify(cfg, params, q, u);
    return !m.in_d;
  };
  if (jump_triggered(cfg, params, q_before, u)) return {0.0, q_before, overshoot(q_before)};
  if (!jump_triggered(cfg, params, q_after, u))
    throw SimulationError("event_refine: no jump trigger within the step");

  double lo = 0.0;
  double hi = h;
  HybridState q_lo = q_before;
  HybridState q_hi = q_after;
  const double tol = 1e-6 * h;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    HybridState q_mid = flow_step(cfg, params, q_before, u, mid);
    if (jump_triggered(cfg, params, q_mid, u)) {
      hi = mid;
      q_hi = std::move(q_mid);
    } else {
      lo = mid;
      q_lo = std::move(q_mid);
    }
  }
  if (params.policy == JumpPolicy::boundary) {
    const bool miss = overshoot(q_lo);
    if (!miss) return {lo, std::move(q_lo), false};
    return {hi, std::move(q_hi), overshoot(q_hi)};
  }
  const bool miss = overshoot(q_hi);
  return {hi, std::move(q_hi), miss};
}

EstimatorState auto_initialize(const PackConfig& cfg, const EstimatorParams& params,
                               const HybridState& q, double u) {
  const auto z = compute_z(cfg, q, u);
  const auto it = params.mode == Mode::min ? std::min_element(z.begin(), z.end())
                                           : std::max_element(z.begin(), z.end());
  EstimatorState est = q.est;
  est.sigma = static_cast<std::size_t>(it - z.begin());
  est.soc_hat = cfg.ocv.inverse(*it);
  return est;
}

namespace {

class Runner {
 public:
  Runner(const PackConfig& cfg, const EstimatorParams& params, const CurrentProfile& profile,
         const SimOptions& opts)
      : cfg_(cfg), params_(params), profile_(profile), opts_(opts), trace_(cfg.size()),
        rng_(opts.seed) {
    trace_.meta = {opts.seed, opts.h, opts.t_end, params};
  }

  HybridTrace execute(HybridState q) {
    const std::size_t n = cfg_.size();
    if (q.plant.u_rc.size() != n || q.plant.soc.size() != n)
      throw ConfigError("initial plant state does not match the pack size");
    if (q.est.sigma >= n) throw ConfigError("initial sigma out of range");
    if (!all_finite(q.plant.u_rc) || !all_finite(q.plant.soc) || !std::isfinite(q.est.u_bar_rc) ||
        !std::isfinite(q.est.soc_hat))
      throw ConfigError("initial state must be finite");

    const double steps_real = opts_.t_end / opts_.h;
    const auto steps = static_cast<std::size_t>(std::llround(steps_real));
    if (!(opts_.h > 0.0) || !(opts_.t_end > 0.0) || std::abs(steps_real - static_cast<double>(steps)) > 1e-6)
      throw ConfigError("t_end must be a positive multiple of h");
    for (const auto& b : profile_.points()) {
      const double r = b.t / opts_.h;
      if (b.t < opts_.t_end && std::abs(r - std::round(r)) > 1e-6)
        throw ConfigError("profile breakpoint t = " + std::to_string(b.t) + " is not on the h grid");
    }
    const std::size_t stride = std::max<std::size_t>(1, opts_.record_stride);

    double u0 = profile_.at(0.5 * opts_.h);
    auto m0 = classify(cfg_, params_, q, u0);
    if (!m0.in_c && !m0.in_d) {
      if (!opts_.auto_init)
        throw SimulationError("initial condition lies outside C and D (enable auto-init)");
      q.est = auto_initialize(cfg_, params_, q, u0);
      log("auto-init: sigma=" + std::to_string(q.est.sigma + 1) +
          " soc_hat=" + std::to_string(q.est.soc_hat));
    }
    record(0.0, q, u0, true);
    process_jumps(q, 0.0, u0, false);

    for (std::size_t k = 0; k < steps; ++k) {
      const double t0 = static_cast<double>(k) * opts_.h;
      const double t1 = static_cast<double>(k + 1) * opts_.h;
      const double u = profile_.at(t0 + 0.5 * opts_.h);
      PlantState grid_next = plant_step(cfg_, q.plant, u, opts_.h);

      double t = t0;
      while (true) {
        const double dt = t == t0 ? opts_.h : t1 - t;
        HybridState trial = flow_step(cfg_, params_, q, u, dt);
        if (!jump_triggered(cfg_, params_, trial, u)) {
          q = std::move(trial);
          break;
        }
        RefinedEvent ev = event_refine(cfg_, params_, q, trial, u, dt);
        if (ev.overshoot) {
          ++trace_.diagnostics.window_overshoots;
          log("window overshoot at t=" + std::to_string(t + ev.dt));
        }
        t += ev.dt;
        q = std::move(ev.state);
        process_jumps(q, t, u, true);
        if (t1 - t <= 1e-9 * opts_.h) break;
      }
      q.plant = std::move(grid_next);
      const double u_next = profile_.at(t1 + 0.5 * opts_.h);
      if ((k + 1) % stride == 0 || k + 1 == steps) record(t1, q, u_next, false);
    }
    return std::move(trace_);
  }

 private:
  void log(std::string msg) { trace_.diagnostics.log.push_back(std::move(msg)); }

  SetMembership record(double t, const HybridState& q, double u, bool force) {
    const auto m = classify(cfg_, params_, q, u);
    if (m.in_d && !m.in_c) {
      ++trace_.diagnostics.d_outside_c;
      log("state in D but not in C at t=" + std::to_string(t));
    }
    if (!force && trace_.size() > 0) {
      const auto& last = trace_.sample(trace_.size() - 1);
      if (last.t == t && last.j == j_) return m;
    }
    trace_.append({t, j_, u, q.est, m.in_c, m.in_d}, q.plant);
    return m;
  }

  void process_jumps(HybridState& q, double t, double u, bool event_jump) {
    const std::size_t n = cfg_.size();
    if (n < 2) return;
    std::size_t chain = 0;
    while (true) {
      const auto z = compute_z(cfg_, q, u);
      const bool in_c = in_flow_set(cfg_, params_, q.est, z);
      const bool in_d = in_jump_set(cfg_, params_, q.est, z);
      const bool trigger = params_.policy == JumpPolicy::priority ? (in_d || !in_c) : !in_c;
      if (!(trigger || (chain == 0 && event_jump))) break;
      if (chain + 1 > n - 1) {
        std::ostringstream os;
        os << "chained-jump cap N-1 = " << n - 1 << " exceeded at t=" << t;
        throw ZenoError(os.str());
      }
      record(t, q, u, false);
      const EstimatorState next = apply_jump(cfg_, params_, q.est, z, rng_);
      const bool forced = !in_d;
      if (forced) {
        ++trace_.diagnostics.forced_jumps;
        log("forced jump (state outside D) at t=" + std::to_string(t));
      }
      trace_.jumps.push_back(
          {t, j_, q.est.sigma, next.sigma, q.est.soc_hat, next.soc_hat, forced});
      q.est = next;
      ++j_;
      record(t, q, u, false);
      ++chain;

      recent_.push_back(t);
      while (!recent_.empty() && recent_.front() <= t - 1.0) recent_.pop_front();
      if (static_cast<double>(recent_.size()) > opts_.max_jumps_per_second) {
        std::ostringstream os;
        os << "more than " << opts_.max_jumps_per_second << " jumps within 1 s at t=" << t;
        throw ZenoError(os.str());
      }
    }
    trace_.diagnostics.max_chain = std::max(trace_.diagnostics.max_chain, chain);
  }

  const PackConfig& cfg_;
  const EstimatorParams& params_;
  const CurrentProfile& profile_;
  const SimOptions& opts_;
  HybridTrace trace_;
  std::mt19937_64 rng_;
  std::size_t j_ = 0;
  std::deque<double> recent_;
};

}  // namespace

HybridTrace run(const PackConfig& cfg, const EstimatorParams& params, HybridState q0,
                const CurrentProfile& profile, const SimOptions& opts) {
  cfg.validate();
  params.validate();
  if (profile.points().empty()) throw ConfigError("current profile is empty");
  Runner runner(cfg, params, profile, opts);
  return runner.execute(std::move(q0));
}

std::vector<HybridTrace> run_sweep(const std::vector<SweepJob>& jobs, unsigned threads,
                                   const std::function<void(std::size_t, HybridTrace&&)>& consume) {
  std::vector<HybridTrace> results(consume ? 0 : jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const auto& job = jobs[i];
        HybridTrace tr = run(*job.cfg, job.params, job.q0, *job.profile, job.opts);
        if (consume) {
          std::lock_guard lock(sink);
          consume(i, std::move(tr));
        } else {
          results[i] = std::move(tr);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace minsoc
