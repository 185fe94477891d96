#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "minsoc/analysis.hpp"
#include "minsoc/scenario.hpp"

namespace minsoc::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PackFile {
  PackConfig cfg;
  PlantState x0;
};

/// {cells: [{tau_d_s, r_d_ohm, r_int_ohm, q_ah, soc0, u_rc0_v}], ocv: {knots: [[soc, volts]...]}}.
/// A cell may give c_d_f instead of (or as well as) tau_d_s. A missing ocv
/// block selects the default curve.
PackFile read_pack_json(const std::filesystem::path& path);
PackFile parse_pack_json(const std::string& text);
std::string format_pack_json(const PackConfig& cfg, const PlantState& x0);
void write_pack_json(const std::filesystem::path& path, const PackConfig& cfg, const PlantState& x0);

/// Header `t_s,i_pack_a`.
CurrentProfile read_profile_csv(const std::filesystem::path& path);
void write_profile_csv(const std::filesystem::path& path, const CurrentProfile& profile);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Run directory layout.
inline constexpr const char* kPackFile = "pack.json";
inline constexpr const char* kProfileFile = "profile.csv";
inline constexpr const char* kTraceFile = "trace.csv";
inline constexpr const char* kJumpsFile = "jumps.csv";
inline constexpr const char* kStatesFile = "states.csv";
inline constexpr const char* kMetaFile = "meta.json";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kReportJson = "report.json";

/// trace.csv: t_s,j,sigma,soc_hat,soc_min_true,soc_sigma_true,err_abs,u_bar_rc,in_D
/// (sigma is 1-based; soc_min_true holds the targeted extreme in max mode).
void write_trace_csv(const std::filesystem::path& path, const HybridTrace& trace);
/// jumps.csv: t_s,j,sigma_before,sigma_after,soc_hat_before,soc_hat_after
void write_jumps_csv(const std::filesystem::path& path, const HybridTrace& trace);
/// states.csv: t_s,j,i_pack_a,in_C,u_rc_1..u_rc_N,soc_1..soc_N (plant side of each sample).
void write_states_csv(const std::filesystem::path& path, const HybridTrace& trace);
void write_meta_json(const std::filesystem::path& path, const HybridTrace& trace);

/// Writes pack, profile, trace, jumps, states and meta files into `dir`.
void write_run(const std::filesystem::path& dir, const PackConfig& cfg, const PlantState& x0,
               const CurrentProfile& profile, const HybridTrace& trace);

struct LoadedRun {
  PackFile pack;
  HybridTrace trace;
};

/// Rebuilds a trace from a run directory.
LoadedRun read_run(const std::filesystem::path& dir);

/// Report CSV `t_s,j,lhs,rhs,margin,check_name`.
void write_report_csv(const std::filesystem::path& path, const std::vector<BoundReport>& reports);
/// {check_name: {pass, max_violation, argmax_t}} plus a dwell_time entry.
std::string format_report_json(const std::vector<BoundReport>& reports, const DwellStats& dwell);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace minsoc::io
