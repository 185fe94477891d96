#include "minsoc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace minsoc::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("malformed number '" + std::string(s) + "' in " + where);
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      auto last = line.substr(start);
      if (!last.empty() && last.back() == '\r') last.remove_suffix(1);
      out.push_back(last);
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name, const std::string& file) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError(file + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Csv read_csv(const fs::path& path) {
  const std::string text = slurp(path);
  Csv csv;
  std::size_t pos = 0;
  bool first = true;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (first) {
      for (auto c : cells) csv.header.emplace_back(c);
      first = false;
      continue;
    }
    if (cells.size() != csv.header.size())
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(csv.header.size()) + " fields");
    std::vector<double> row;
    row.reserve(cells.size());
    const std::string where = path.string() + ":" + std::to_string(line_no);
    for (auto c : cells) row.push_back(parse_double(c, where));
    csv.rows.push_back(std::move(row));
  }
  if (first) throw IoError(path.string() + " is empty");
  return csv;
}

std::size_t as_index(double v, const std::string& what) {
  if (!(v >= 0.0) || v != std::floor(v)) throw IoError(what + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

const char* mode_name(Mode m) { return m == Mode::min ? "min" : "max"; }
const char* policy_name(JumpPolicy p) { return p == JumpPolicy::priority ? "priority" : "boundary"; }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

PackFile parse_pack_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("pack JSON: ") + e.what());
  }
  PackFile out;
  try {
    if (!doc.contains("cells") || !doc["cells"].is_array()) throw IoError("pack JSON: missing 'cells' array");
    for (const auto& c : doc["cells"]) {
      std::optional<double> tau;
      std::optional<double> cd;
      if (c.contains("tau_d_s")) tau = c["tau_d_s"].get<double>();
      if (c.contains("c_d_f")) cd = c["c_d_f"].get<double>();
      out.cfg.cells.push_back(CellParams::make(tau, c.at("r_d_ohm").get<double>(), cd,
                                               c.at("r_int_ohm").get<double>(), c.at("q_ah").get<double>()));
      out.x0.soc.push_back(c.at("soc0").get<double>());
      out.x0.u_rc.push_back(c.value("u_rc0_v", 0.0));
    }
    if (doc.contains("ocv")) {
      std::vector<std::pair<double, double>> knots;
      for (const auto& k : doc["ocv"].at("knots")) knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
      out.cfg.ocv = OcvCurve(knots);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("pack JSON: ") + e.what());
  }
  out.cfg.validate();
  return out;
}

PackFile read_pack_json(const fs::path& path) { return parse_pack_json(slurp(path)); }

std::string format_pack_json(const PackConfig& cfg, const PlantState& x0) {
  json doc;
  doc["cells"] = json::array();
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    const auto& c = cfg.cells[i];
    doc["cells"].push_back({{"tau_d_s", c.tau_d},
                            {"r_d_ohm", c.r_d},
                            {"c_d_f", c.c_d},
                            {"r_int_ohm", c.r_int},
                            {"q_ah", c.q_ah},
                            {"soc0", x0.soc.at(i)},
                            {"u_rc0_v", x0.u_rc.at(i)}});
  }
  json knots = json::array();
  for (const auto& k : cfg.ocv.knots()) knots.push_back({k.soc, k.volts});
  doc["ocv"] = {{"knots", knots}};
  return doc.dump(2) + "\n";
}

void write_pack_json(const fs::path& path, const PackConfig& cfg, const PlantState& x0) {
  write_text(path, format_pack_json(cfg, x0));
}

CurrentProfile read_profile_csv(const fs::path& path) {
  const Csv csv = read_csv(path);
  const std::size_t ct = csv.column("t_s", path.string());
  const std::size_t ci = csv.column("i_pack_a", path.string());
  std::vector<CurrentProfile::Breakpoint> pts;
  for (const auto& r : csv.rows) pts.push_back({r[ct], r[ci]});
  try {
    return CurrentProfile(std::move(pts));
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_profile_csv(const fs::path& path, const CurrentProfile& profile) {
  auto out = open_out(path);
  out << "t_s,i_pack_a\n";
  for (const auto& b : profile.points()) out << format_double(b.t) << ',' << format_double(b.amps) << '\n';
}

void write_trace_csv(const fs::path& path, const HybridTrace& trace) {
  auto out = open_out(path);
  const Mode mode = trace.meta.params.mode;
  out << "t_s,j,sigma,soc_hat,soc_min_true,soc_sigma_true,err_abs,u_bar_rc,in_D\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& s = trace.sample(k);
    const auto soc = trace.soc(k);
    const double ext = mode == Mode::min ? *std::min_element(soc.begin(), soc.end())
                                         : *std::max_element(soc.begin(), soc.end());
    out << format_double(s.t) << ',' << s.j << ',' << s.est.sigma + 1 << ',' << format_double(s.est.soc_hat) << ','
        << format_double(ext) << ',' << format_double(soc[s.est.sigma]) << ','
        << format_double(std::abs(s.est.soc_hat - ext)) << ',' << format_double(s.est.u_bar_rc) << ','
        << (s.in_d ? 1 : 0) << '\n';
  }
}

void write_jumps_csv(const fs::path& path, const HybridTrace& trace) {
  auto out = open_out(path);
  out << "t_s,j,sigma_before,sigma_after,soc_hat_before,soc_hat_after\n";
  for (const auto& r : trace.jumps)
    out << format_double(r.t) << ',' << r.j << ',' << r.sigma_before + 1 << ',' << r.sigma_after + 1 << ','
        << format_double(r.soc_hat_before) << ',' << format_double(r.soc_hat_after) << '\n';
}

void write_states_csv(const fs::path& path, const HybridTrace& trace) {
  auto out = open_out(path);
  const std::size_t n = trace.n_cells();
  out << "t_s,j,i_pack_a,in_C";
  for (std::size_t i = 1; i <= n; ++i) out << ",u_rc_" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",soc_" << i;
  out << '\n';
  std::string line;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& s = trace.sample(k);
    line.clear();
    line += format_double(s.t);
    line += ',';
    line += std::to_string(s.j);
    line += ',';
    line += format_double(s.u);
    line += s.in_c ? ",1" : ",0";
    for (double v : trace.u_rc(k)) {
      line += ',';
      line += format_double(v);
    }
    for (double v : trace.soc(k)) {
      line += ',';
      line += format_double(v);
    }
    line += '\n';
    out << line;
  }
}

void write_meta_json(const fs::path& path, const HybridTrace& trace) {
  const auto& p = trace.meta.params;
  const auto& d = trace.diagnostics;
  json doc = {{"seed", trace.meta.seed},
              {"h", trace.meta.h},
              {"t_end", trace.meta.t_end},
              {"n_cells", trace.n_cells()},
              {"params",
               {{"ell", p.ell},
                {"tau_d", p.tau_d},
                {"epsilon", p.epsilon},
                {"mu", p.mu},
                {"mode", mode_name(p.mode)},
                {"jump_policy", policy_name(p.policy)}}},
              {"diagnostics",
               {{"forced_jumps", d.forced_jumps},
                {"window_overshoots", d.window_overshoots},
                {"d_outside_c", d.d_outside_c},
                {"max_chain", d.max_chain},
                {"log", d.log}}}};
  write_text(path, doc.dump(2) + "\n");
}

void write_run(const fs::path& dir, const PackConfig& cfg, const PlantState& x0, const CurrentProfile& profile,
               const HybridTrace& trace) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_pack_json(dir / kPackFile, cfg, x0);
  write_profile_csv(dir / kProfileFile, profile);
  write_trace_csv(dir / kTraceFile, trace);
  write_jumps_csv(dir / kJumpsFile, trace);
  write_states_csv(dir / kStatesFile, trace);
  write_meta_json(dir / kMetaFile, trace);
}

LoadedRun read_run(const fs::path& dir) {
  LoadedRun run;
  run.pack = read_pack_json(dir / kPackFile);
  const std::size_t n = run.pack.cfg.size();

  json meta;
  try {
    meta = json::parse(slurp(dir / kMetaFile));
  } catch (const json::exception& e) {
    throw IoError(std::string("meta JSON: ") + e.what());
  }
  run.trace = HybridTrace(n);
  try {
    run.trace.meta.seed = meta.at("seed").get<std::uint64_t>();
    run.trace.meta.h = meta.at("h").get<double>();
    run.trace.meta.t_end = meta.at("t_end").get<double>();
    const auto& p = meta.at("params");
    auto& params = run.trace.meta.params;
    params.ell = p.at("ell").get<double>();
    params.tau_d = p.at("tau_d").get<double>();
    params.epsilon = p.at("epsilon").get<double>();
    params.mu = p.at("mu").get<double>();
    params.mode = p.at("mode").get<std::string>() == "max" ? Mode::max : Mode::min;
    params.policy = p.at("jump_policy").get<std::string>() == "boundary" ? JumpPolicy::boundary : JumpPolicy::priority;
    if (meta.contains("diagnostics")) {
      const auto& d = meta["diagnostics"];
      auto& diag = run.trace.diagnostics;
      diag.forced_jumps = d.value("forced_jumps", std::size_t{0});
      diag.window_overshoots = d.value("window_overshoots", std::size_t{0});
      diag.d_outside_c = d.value("d_outside_c", std::size_t{0});
      diag.max_chain = d.value("max_chain", std::size_t{0});
      diag.log = d.value("log", std::vector<std::string>{});
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("meta JSON: ") + e.what());
  }
  run.trace.meta.params.validate();

  const std::string trace_name = (dir / kTraceFile).string();
  const std::string states_name = (dir / kStatesFile).string();
  const Csv tr = read_csv(dir / kTraceFile);
  const Csv st = read_csv(dir / kStatesFile);
  if (tr.rows.size() != st.rows.size()) throw IoError("trace.csv and states.csv have different row counts");
  const std::size_t c_t = tr.column("t_s", trace_name);
  const std::size_t c_j = tr.column("j", trace_name);
  const std::size_t c_sigma = tr.column("sigma", trace_name);
  const std::size_t c_soc_hat = tr.column("soc_hat", trace_name);
  const std::size_t c_u_bar = tr.column("u_bar_rc", trace_name);
  const std::size_t c_in_d = tr.column("in_D", trace_name);
  const std::size_t s_t = st.column("t_s", states_name);
  const std::size_t s_j = st.column("j", states_name);
  const std::size_t s_u = st.column("i_pack_a", states_name);
  const std::size_t s_in_c = st.column("in_C", states_name);
  const std::size_t s_urc = st.column("u_rc_1", states_name);
  const std::size_t s_soc = st.column("soc_1", states_name);
  if (st.header.size() != 4 + 2 * n) throw IoError("states.csv does not match the pack size");

  for (std::size_t k = 0; k < tr.rows.size(); ++k) {
    const auto& a = tr.rows[k];
    const auto& b = st.rows[k];
    if (a[c_t] != b[s_t] || a[c_j] != b[s_j]) throw IoError("trace.csv and states.csv disagree at row " + std::to_string(k + 2));
    const std::size_t sigma = as_index(a[c_sigma], "sigma");
    if (sigma < 1 || sigma > n) throw IoError("sigma out of range at row " + std::to_string(k + 2));
    TraceSample s{a[c_t], as_index(a[c_j], "j"), b[s_u], {a[c_u_bar], a[c_soc_hat], sigma - 1},
                  b[s_in_c] != 0.0, a[c_in_d] != 0.0};
    run.trace.append(s, std::span<const double>(b.data() + s_urc, n), std::span<const double>(b.data() + s_soc, n));
  }

  const Csv jm = read_csv(dir / kJumpsFile);
  const std::string jumps_name = (dir / kJumpsFile).string();
  const std::size_t j_t = jm.column("t_s", jumps_name);
  const std::size_t j_j = jm.column("j", jumps_name);
  const std::size_t j_sb = jm.column("sigma_before", jumps_name);
  const std::size_t j_sa = jm.column("sigma_after", jumps_name);
  const std::size_t j_hb = jm.column("soc_hat_before", jumps_name);
  const std::size_t j_ha = jm.column("soc_hat_after", jumps_name);
  for (const auto& r : jm.rows) {
    JumpRecord rec{r[j_t], as_index(r[j_j], "j"), as_index(r[j_sb], "sigma") - 1, as_index(r[j_sa], "sigma") - 1,
                   r[j_hb], r[j_ha], false};
    for (std::size_t k = 0; k + 1 < run.trace.size(); ++k) {
      const auto& s = run.trace.sample(k);
      if (s.j == rec.j && run.trace.sample(k + 1).j == rec.j + 1) {
        rec.forced = !s.in_d;
        break;
      }
    }
    run.trace.jumps.push_back(rec);
  }
  return run;
}

void write_report_csv(const fs::path& path, const std::vector<BoundReport>& reports) {
  auto out = open_out(path);
  out << "t_s,j,lhs,rhs,margin,check_name\n";
  for (const auto& r : reports)
    for (const auto& row : r.rows)
      out << format_double(row.t) << ',' << row.j << ',' << format_double(row.lhs) << ','
          << format_double(row.rhs) << ',' << format_double(row.margin) << ',' << r.name << '\n';
}

std::string format_report_json(const std::vector<BoundReport>& reports, const DwellStats& dwell) {
  json doc = json::object();
  for (const auto& r : reports) {
    json entry = {{"pass", r.pass}, {"max_violation", r.max_violation}, {"argmax_t", r.argmax_t}};
    if (!r.diagnosis.empty()) entry["diagnosis"] = r.diagnosis;
    doc[r.name] = entry;
  }
  const bool dwell_ok = (dwell.jumps < 2 || dwell.tau_min > 0.0) && dwell.rate_bound_ok;
  doc["dwell_time"] = {{"pass", dwell_ok},
                       {"jumps", dwell.jumps},
                       {"tau_min", std::isfinite(dwell.tau_min) ? json(dwell.tau_min) : json(nullptr)},
                       {"rate_bound_ok", dwell.rate_bound_ok},
                       {"max_jumps_in_1s", dwell.max_jumps_in_1s}};
  return doc.dump(2) + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace minsoc::io
