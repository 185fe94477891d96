#include <cmath>
#include <random>

#include "doctest.h"
#include "minsoc/analysis.hpp"
#include "minsoc/scenario.hpp"

using namespace minsoc;

namespace {

PackConfig pack_tau(const std::vector<double>& taus) {
  PackConfig cfg;
  for (double t : taus) cfg.cells.push_back(CellParams::make(t, 0.0005, std::nullopt, 0.0005, 6.0));
  return cfg;
}

SimOptions opts(double t_end, double h) {
  SimOptions o;
  o.t_end = t_end;
  o.h = h;
  return o;
}

// Copy of a trace with soc_hat shifted by `delta` from sample k0 on.
HybridTrace tamper(const HybridTrace& tr, std::size_t k0, double delta) {
  HybridTrace out(tr.n_cells());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    TraceSample s = tr.sample(k);
    if (k >= k0) s.est.soc_hat += delta;
    out.append(s, tr.u_rc(k), tr.soc(k));
  }
  out.jumps = tr.jumps;
  out.meta = tr.meta;
  return out;
}

HybridTrace jumps_at(const std::vector<double>& times) {
  HybridTrace tr(1);
  std::size_t j = 0;
  const std::vector<double> z{0.0};
  tr.append({0.0, 0, 0.0, {}, true, false}, z, z);
  for (double t : times) {
    tr.append({t, j, 0.0, {}, true, true}, z, z);
    ++j;
    tr.append({t, j, 0.0, {}, true, false}, z, z);
  }
  return tr;
}

}  // namespace

TEST_CASE("constants: mismatch d") {
  EstimatorParams p;
  CHECK(compute_constants(pack_tau({12, 12}), p).d == 0.0);
  CHECK(compute_constants(pack_tau({10, 12, 14}), p).d == doctest::Approx(1.0 / 60.0).epsilon(1e-14));
}

TEST_CASE("constants with the default curve and the reference tuning") {
  EstimatorParams p;  // ell = 2, tau_d = 12
  const auto k = compute_constants(pack_tau({12}), p);
  const double a1 = 0.23;
  CHECK(k.a1 == doctest::Approx(a1).epsilon(1e-9));
  CHECK(k.a == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
  CHECK(k.lambda == doctest::Approx(4.0 / 0.0529).epsilon(1e-8));
  CHECK(k.c1 == doctest::Approx(8.6957).epsilon(1e-4));
  CHECK(k.c2 == doctest::Approx(1.0 / 24.0).epsilon(1e-12));
  CHECK(k.c3 == doctest::Approx(17.3913).epsilon(1e-4));
  CHECK(k.c4 == doctest::Approx(104.348).epsilon(1e-4));
  CHECK(k.b == doctest::Approx(1.0 / 24.0).epsilon(1e-12));
  CHECK(k.b <= k.c2);
  CHECK(k.c2 <= k.a);
  CHECK(k.steady_thm1(200, 0.0) == doctest::Approx(0.021739).epsilon(1e-4));
  // recomputation is idempotent
  const auto k2 = compute_constants(pack_tau({12}), p);
  CHECK(k2.c4 == k.c4);
}

TEST_CASE("lyapunov functions") {
  const auto cfg = pack_tau({12, 12, 12});
  const auto k = compute_constants(cfg, EstimatorParams{});
  const double c = cfg.cells[0].c_d;
  HybridState zero{{{0.01, 0.01, 0.01}, {0.5, 0.6, 0.7}}, {0.01 * c, 0.5, 0}};
  CHECK(lyapunov_v1(cfg, zero) == doctest::Approx(0.0).epsilon(1e-30));
  CHECK(lyapunov_v2(cfg, zero, k) == doctest::Approx(0.0).epsilon(1e-30));

  HybridState one{{{0.1, 0.0, 0.0}, {0.5, 0.6, 0.7}}, {0.0, 0.5, 0}};
  CHECK(lyapunov_v1(cfg, one) == doctest::Approx(0.01).epsilon(1e-14));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  for (int r = 0; r < 200; ++r) {
    HybridState q{{{d(rng), d(rng), d(rng)}, {0.5 + d(rng), 0.5 + d(rng), 0.5 + d(rng)}},
                  {d(rng) * c, 0.5 + d(rng), static_cast<std::size_t>(r % 3)}};
    double e2 = 0.0, emax = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double di = q.plant.u_rc[i] - q.est.u_bar_rc / c;
      e2 += di * di;
      emax = std::max(emax, di * di);
    }
    const double v1 = lyapunov_v1(cfg, q);
    CHECK(v1 == doctest::Approx(emax).epsilon(1e-12));
    CHECK(e2 / 3.0 <= v1 * (1 + 1e-12));
    CHECK(v1 <= e2 * (1 + 1e-12));
    const double es = q.plant.soc[q.est.sigma] - q.est.soc_hat;
    const double v2 = lyapunov_v2(cfg, q, k);
    CHECK(es * es <= v2 * (1 + 1e-12));
    CHECK(v2 <= std::max(1.0, k.lambda) * (e2 + es * es) * (1 + 1e-12));
  }
}

TEST_CASE("V1 argmax is invariant under uniform error scaling") {
  const auto cfg = pack_tau({12, 12, 12, 12});
  const double c = cfg.cells[0].c_d;
  const std::vector<double> err{0.01, -0.03, 0.02, 0.005};
  auto v1_with = [&](double scale) {
    HybridState q{{{}, {0.5, 0.5, 0.5, 0.5}}, {0.0, 0.5, 0}};
    for (double e : err) q.plant.u_rc.push_back(scale * e);
    return lyapunov_v1(cfg, q);
  };
  CHECK(v1_with(1.0) == doctest::Approx(0.0009));
  CHECK(v1_with(3.0) == doctest::Approx(9.0 * 0.0009));
}

TEST_CASE("prop1 and thm1 on a homogeneous pack with exact RC init") {
  PackSpec spec;
  spec.n_cells = 8;
  spec.dispersion = 0.0;
  const auto pack = generate_pack(spec);
  EstimatorParams p;
  PulseTrainSpec ps;
  ps.t_end = 120.0;
  const auto prof = pulse_train(ps);
  const auto tr = run(pack.cfg, p, {pack.x0, {0.0, 0.0, 3}}, prof, opts(120.0, 0.01));
  const auto r1 = check_prop1(pack.cfg, tr);
  CHECK(r1.pass);
  for (const auto& row : r1.rows) REQUIRE(row.lhs <= 1e-9);
  CHECK(check_prop2(pack.cfg, tr).pass);
  CHECK(check_thm1(pack.cfg, tr).pass);
}

TEST_CASE("prop1 envelope with mismatched RC init") {
  PackSpec spec;
  spec.n_cells = 8;
  spec.dispersion = 0.0;
  const auto pack = generate_pack(spec);
  EstimatorParams p;
  const auto prof = CurrentProfile({{0.0, 30.0}, {20.0, -10.0}});
  const auto tr = run(pack.cfg, p, {pack.x0, {500.0, 0.0, 3}}, prof, opts(60.0, 0.01));
  const auto r = check_prop1(pack.cfg, tr);
  CHECK(r.pass);
  const double e0 = r.rows.front().lhs;
  CHECK(e0 > 0.0);
  for (const auto& row : r.rows) REQUIRE(row.lhs <= std::sqrt(8.0) * e0 * std::exp(-row.t / 24.0) + 1e-9);
}

TEST_CASE("bounds and Lyapunov inequalities hold on a dispersed pack") {
  PackSpec spec;
  spec.n_cells = 40;
  spec.seed = 5;
  const auto pack = generate_pack(spec);
  EstimatorParams p;
  PulseTrainSpec ps;
  ps.t_end = 150.0;
  ps.seed = 5;
  const auto prof = pulse_train(ps);
  const auto tr = run(pack.cfg, p, {pack.x0, {0.0, 0.0, 30}}, prof, opts(150.0, 0.01));
  const auto reports = verify_trace(pack.cfg, tr);
  REQUIRE(reports.size() == 7);
  for (const auto& r : reports) {
    INFO(r.name << " " << r.max_violation << " at " << r.argmax_t << " " << r.diagnosis);
    CHECK(r.pass);
  }
  const auto sup = running_u_rc_sup(tr);
  for (std::size_t k = 1; k < sup.size(); ++k) REQUIRE(sup[k] >= sup[k - 1]);
}

TEST_CASE("V1 decays along flows at d = 0") {
  PackSpec spec;
  spec.n_cells = 5;
  spec.dispersion = 0.0;
  const auto pack = generate_pack(spec);
  EstimatorParams p;
  const auto tr = run(pack.cfg, p, {pack.x0, {-800.0, 0.0, 2}}, CurrentProfile::constant(15.0), opts(30.0, 0.01));
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double a = lyapunov_v1(pack.cfg, tr.state(k - 1));
    const double b = lyapunov_v1(pack.cfg, tr.state(k));
    if (tr.sample(k).j == tr.sample(k - 1).j) REQUIRE(b < a);
    else REQUIRE(std::abs(b - a) <= 1e-12);
  }
}

TEST_CASE("zero-error trajectory satisfies the inequalities trivially") {
  const auto cfg = pack_tau({12});
  const double c = cfg.cells[0].c_d;
  EstimatorParams p;
  const auto tr = run(cfg, p, {{{0.0}, {0.5}}, {0.0 * c, 0.5, 0}}, CurrentProfile::constant(0.0), opts(2.0, 0.01));
  const auto k = compute_constants(cfg, p);
  for (const auto& r : check_lyapunov_inequalities(cfg, tr, k)) CHECK(r.pass);
  CHECK(lyapunov_v2(cfg, tr.state(tr.size() - 1), k) == 0.0);
}

TEST_CASE("a corrupted estimate is caught") {
  PackSpec spec;
  spec.n_cells = 10;
  spec.dispersion = 0.0;
  const auto pack = generate_pack(spec);
  EstimatorParams p;
  const auto tr = run(pack.cfg, p, {pack.x0, {0.0, 0.0, 3}}, CurrentProfile::constant(10.0), opts(300.0, 0.05));
  REQUIRE(check_thm1(pack.cfg, tr).pass);
  const auto bad = tamper(tr, tr.size() - 100, 0.2);
  const auto r = check_thm1(pack.cfg, bad);
  CHECK_FALSE(r.pass);
  CHECK(r.max_violation > 0.1);
  CHECK(r.argmax_t > 290.0);
  CHECK_FALSE(r.diagnosis.empty());
  CHECK_FALSE(check_prop2(pack.cfg, bad).pass);
}

TEST_CASE("dwell time statistics") {
  const auto none = dwell_time_stats(jumps_at({}));
  CHECK(std::isinf(none.tau_min));
  CHECK(none.rate_bound_ok);
  CHECK(none.jumps == 0);

  const auto st = dwell_time_stats(jumps_at({1.0, 2.0, 4.0}));
  CHECK(st.tau_min == 1.0);
  CHECK(st.rate_bound_ok);
  CHECK(st.jumps == 3);
  CHECK(st.max_jumps_in_1s == 1);

  const auto chained = dwell_time_stats(jumps_at({1.0, 1.0, 1.5}));
  CHECK(chained.tau_min == 0.0);
  CHECK_FALSE(chained.rate_bound_ok);
  CHECK(chained.max_jumps_in_1s == 3);
}

TEST_CASE("observer bank oracle") {
  PackSpec spec;
  spec.n_cells = 6;
  const auto pack = generate_pack(spec);
  const auto prof = CurrentProfile({{0.0, 25.0}, {10.0, -15.0}});
  const auto exact = observer_bank_oracle(pack.cfg, prof, pack.x0, 20.0, 0.01, 2.0);
  REQUIRE(exact.t.size() == 2001);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < exact.t.size(); ++k)
      REQUIRE(std::abs(exact.soc_hat[i][k] - exact.soc[i][k]) <= 1e-12);

  // N = 1 reduction: identical to the hybrid estimator with tau_d = tau_1
  PackConfig one;
  one.cells = {pack.cfg.cells[2]};
  PlantState x1{{0.0}, {pack.x0.soc[2]}};
  EstimatorParams p;
  p.tau_d = one.cells[0].tau_d;
  const auto tr = run(one, p, {x1, {0.0, 0.1, 0}}, prof, opts(20.0, 0.01));
  const auto orc = observer_bank_oracle(one, prof, x1, 20.0, 0.01, 2.0, {{0.1}, {0.0}});
  REQUIRE(orc.t.size() == tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) REQUIRE(std::abs(orc.soc_hat[0][k] - tr.sample(k).est.soc_hat) <= 1e-12);
}
