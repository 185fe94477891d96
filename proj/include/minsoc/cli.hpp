#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "minsoc/analysis.hpp"
#include "minsoc/scenario.hpp"

namespace minsoc::cli {

/// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitBoundFail = 2;

struct ScenarioSpec {
  std::optional<std::filesystem::path> pack_file;  // otherwise generated
  PackSpec generated;
  EstimatorParams params;
  TauChoice tau{TauChoice::Kind::explicit_value, 12.0};
  // "phev" (synthetic pulse train), "constant:<amps>", or a profile CSV path.
  std::string profile = "phev";
  PulseTrainSpec pulse;
  SimOptions sim;
  std::optional<std::size_t> sigma0;  // 1-based; default min(150, N)
  double soc_hat0 = 0.0;
  double u_bar_rc0 = 0.0;
  std::filesystem::path out_dir = "run";
};

struct PreparedScenario {
  PackConfig cfg;
  PlantState x0;
  CurrentProfile profile;
  EstimatorParams params;
  HybridState q0;
  SimOptions sim;
};

PreparedScenario prepare(const ScenarioSpec& spec);

int cmd_simulate(const ScenarioSpec& spec, std::ostream& out, std::ostream& err);
int cmd_verify(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);
int cmd_plot(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

/// Verification of an in-memory trace; returns the reports and dwell stats.
struct Verification {
  std::vector<BoundReport> reports;
  DwellStats dwell;
  bool pass() const;
};
Verification verify(const PackConfig& cfg, const HybridTrace& trace);

}  // namespace minsoc::cli
