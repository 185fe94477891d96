#include <cmath>
#include <random>

#include "doctest.h"
#include "minsoc/pack_model.hpp"

using namespace minsoc;

namespace {

PackConfig nominal_pack(std::size_t n) {
  PackConfig cfg;
  for (std::size_t i = 0; i < n; ++i) cfg.cells.push_back(CellParams::make(12.0, 0.0005, std::nullopt, 0.0005, 6.0));
  return cfg;
}

}  // namespace

TEST_CASE("cell params derive the missing constant") {
  const auto a = CellParams::make(12.0, 0.0005, std::nullopt, 0.0005, 6.0);
  CHECK(a.c_d == doctest::Approx(24000.0));
  const auto b = CellParams::make(std::nullopt, 0.0005, 24000.0, 0.0005, 6.0);
  CHECK(b.tau_d == doctest::Approx(12.0));
  CHECK_NOTHROW(CellParams::make(12.0, 0.0005, 24000.0, 0.0005, 6.0));
  CHECK_THROWS_AS(CellParams::make(12.0, 0.0005, 24001.0, 0.0005, 6.0), ConfigError);
  CHECK_THROWS_AS(CellParams::make(std::nullopt, 0.0005, std::nullopt, 0.0005, 6.0), ConfigError);
  CHECK_THROWS_AS(CellParams::make(12.0, -0.0005, std::nullopt, 0.0005, 6.0), ConfigError);
  CHECK_THROWS_AS(CellParams::make(12.0, 0.0005, std::nullopt, 0.0, 6.0), ConfigError);
  CHECK_THROWS_AS(CellParams::make(12.0, 0.0005, std::nullopt, 0.0005, 0.0), ConfigError);
}

TEST_CASE("pack validation") {
  PackConfig empty;
  CHECK_THROWS_AS(empty.validate(), ConfigError);
  auto cfg = nominal_pack(3);
  CHECK_NOTHROW(cfg.validate());
  cfg.cells[1].c_d *= 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("plant flow") {
  const auto cfg = nominal_pack(2);
  PlantState rest{{0.0, 0.0}, {0.5, 0.6}};
  const auto d0 = plant_flow(cfg, rest, 0.0);
  CHECK(d0.u_rc == std::vector<double>{0.0, 0.0});
  CHECK(d0.soc == std::vector<double>{0.0, 0.0});

  const auto d1 = plant_flow(cfg, rest, 6.0);
  CHECK(d1.soc[0] == doctest::Approx(-1.0 / 3600.0).epsilon(1e-15));

  PlantState x{{0.01, 0.0}, {0.5, 0.5}};
  const auto d2 = plant_flow(cfg, x, 10.0);
  CHECK(d2.u_rc[0] == doctest::Approx(-0.01 / 12.0 + 10.0 * 0.0005 / 12.0).epsilon(1e-14));
}

TEST_CASE("cell voltage") {
  auto cfg = nominal_pack(3);
  const auto& ocv = cfg.ocv;
  PlantState x{{0.0, 0.0, 0.0}, {0.3, 0.5, 0.7}};
  CHECK(cell_voltage(cfg, x, 0.0, 1) == ocv.eval(0.5));

  // V_OCV(SOC) = 3.70 by construction of the state
  x.soc[0] = ocv.inverse(3.70);
  x.u_rc[0] = 0.02;
  CHECK(cell_voltage(cfg, x, 10.0, 0) == doctest::Approx(3.675).epsilon(1e-10));
  CHECK_THROWS_AS(cell_voltage(cfg, x, 0.0, 3), std::out_of_range);

  // series law: pack voltage is the sum of the cells, and the OCV relation holds per cell
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(-0.05, 0.05), ss(0.1, 0.9);
  for (int r = 0; r < 20; ++r) {
    PlantState y{{us(rng), us(rng), us(rng)}, {ss(rng), ss(rng), ss(rng)}};
    const double u = 40.0 * us(rng) * 20.0;
    const auto v = cell_voltages(cfg, y, u);
    double sum = 0.0, manual = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      sum += v[i];
      manual += -y.u_rc[i] - 0.0005 * u + ocv.eval(y.soc[i]);
      CHECK(ocv.eval(y.soc[i]) == doctest::Approx(v[i] + y.u_rc[i] + 0.0005 * u).epsilon(1e-14));
    }
    CHECK(sum == doctest::Approx(manual).epsilon(1e-14));
  }
}

TEST_CASE("true extreme soc") {
  PlantState x{{0, 0, 0}, {0.5, 0.4, 0.6}};
  auto mn = true_extreme_soc(x, Mode::min);
  CHECK(mn.value == 0.4);
  CHECK(mn.indices == std::vector<std::size_t>{1});
  auto mx = true_extreme_soc(x, Mode::max);
  CHECK(mx.value == 0.6);
  CHECK(mx.indices == std::vector<std::size_t>{2});

  PlantState tie{{0, 0, 0, 0}, {0.5, 0.5, 0.5, 0.5}};
  CHECK(true_extreme_soc(tie, Mode::min).indices == std::vector<std::size_t>{0, 1, 2, 3});

  // max on the negated ordering mirrors min
  PlantState neg{{0, 0, 0}, {-0.5, -0.4, -0.6}};
  const auto m2 = true_extreme_soc(neg, Mode::max);
  CHECK(m2.value == -mn.value);
  CHECK(m2.indices == mn.indices);
}
