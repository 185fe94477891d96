// Command-line front end: simulate, verify and plot hybrid min/max-SOC runs.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "minsoc/cli.hpp"

namespace {

minsoc::Mode parse_mode(const std::string& s) {
  if (s == "min") return minsoc::Mode::min;
  if (s == "max") return minsoc::Mode::max;
  throw CLI::ValidationError("--mode", "expected min or max");
}

minsoc::JumpPolicy parse_policy(const std::string& s) {
  if (s == "priority") return minsoc::JumpPolicy::priority;
  if (s == "boundary") return minsoc::JumpPolicy::boundary;
  throw CLI::ValidationError("--jump-policy", "expected priority or boundary");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid min/max-SOC estimator for series battery packs"};
  app.require_subcommand(1);

  minsoc::cli::ScenarioSpec spec;
  spec.sim.record_stride = 10;
  std::string pack_path, mode = "min", policy = "priority", tau = "12";
  std::size_t sigma0 = 0;

  auto* sim = app.add_subcommand("simulate", "run the estimator on a pack and write a run directory");
  sim->set_help_flag("--help", "print this help message and exit");
  sim->add_option("--cells", spec.generated.n_cells, "number of cells of a generated pack")->check(CLI::Range(1, 100000));
  sim->add_option("--seed", spec.generated.seed, "seed for pack, profile and tie breaks");
  sim->add_option("--dispersion", spec.generated.dispersion, "relative spread of generated parameters")
      ->check(CLI::Range(0.0, 0.99));
  sim->add_option("--soc0-spread", spec.generated.soc0_spread, "half-width of the initial SOC spread")
      ->check(CLI::Range(0.0, 0.5));
  sim->add_option("--pack", pack_path, "pack JSON instead of a generated pack")->check(CLI::ExistingFile);
  sim->add_option("--profile", spec.profile, "phev | constant:<amps> | CSV file (t_s,i_pack_a)");
  sim->add_option("--ell", spec.params.ell, "observer gain");
  sim->add_option("--tau-d", tau, "estimator time constant: seconds, mean or minimax");
  sim->add_option("--epsilon", spec.params.epsilon, "jump threshold in volts");
  sim->add_option("--mu", spec.params.mu, "jump window factor in (0,1)");
  sim->add_option("--mode", mode, "min or max");
  sim->add_option("--jump-policy", policy, "priority or boundary");
  sim->add_option("--h", spec.sim.h, "RK4 step in seconds");
  sim->add_option("--t-end", spec.sim.t_end, "horizon in seconds");
  sim->add_option("--sigma0", sigma0, "initial selected cell (1-based)");
  sim->add_option("--soc-hat0", spec.soc_hat0, "initial SOC estimate in [0,1]");
  sim->add_option("--u-bar0", spec.u_bar_rc0, "initial scaled RC state");
  sim->add_flag("--auto-init", spec.sim.auto_init, "start from a feasible estimator state");
  sim->add_option("--record-every", spec.sim.record_stride, "store every k-th grid step")->check(CLI::PositiveNumber);
  sim->add_option("--out", spec.out_dir, "run directory")->required();

  std::string dir;
  auto* ver = app.add_subcommand("verify", "check the ISS bounds and Lyapunov inequalities on a run");
  ver->add_option("dir", dir, "run directory")->required()->check(CLI::ExistingDirectory);
  auto* plot = app.add_subcommand("plot", "render SVG plots of a run");
  plot->add_option("dir", dir, "run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
    if (sim->parsed()) {
      spec.params.mode = parse_mode(mode);
      spec.params.policy = parse_policy(policy);
      spec.tau = minsoc::TauChoice::parse(tau);
      spec.sim.seed = spec.generated.seed;
      spec.pulse.seed = spec.generated.seed;
      if (!pack_path.empty()) spec.pack_file = pack_path;
      if (sigma0 != 0) spec.sigma0 = sigma0;
    }
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : minsoc::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return minsoc::cli::kExitUsage;
  }

  if (sim->parsed()) return minsoc::cli::cmd_simulate(spec, std::cout, std::cerr);
  if (ver->parsed()) return minsoc::cli::cmd_verify(dir, std::cout, std::cerr);
  return minsoc::cli::cmd_plot(dir, std::cout, std::cerr);
}
