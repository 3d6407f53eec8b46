// Command-line front end: run configurations, built-in examples and
// convergence studies.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "manp/runner.hpp"

namespace {

using namespace manp;

void print_summary(const RunConfig& cfg, const RunSummary& s) {
  std::cout << std::setprecision(10);
  std::cout << "problem " << cfg.problem.name << ", " << cfg.nx << "x" << cfg.ny << ", dt " << cfg.dt
            << ", scheme " << to_string(cfg.scheme) << "\n";
  std::cout << "steps " << s.steps << " in " << s.wall_seconds << " s, solver iterations " << s.solver_iterations
            << ", max residual " << s.solver_max_residual << "\n";
  const DiagnosticsRecord& r = s.history.back();
  std::cout << "t " << r.t << ", energy " << r.energy << ", gauss " << r.gauss_residual << " (pre-faraday "
            << r.gauss_residual_pre_faraday << "), faraday " << r.faraday_residual << "\n";
  for (std::size_t l = 0; l < r.mass.size(); ++l) {
    std::cout << "species " << l + 1 << ": mass " << r.mass[l] << ", min " << r.min_c[l] << "\n";
  }
  std::cout << "running minimum concentration " << s.running_min_concentration << "\n";
  std::cout << "config hash " << s.config_hash << "\n";
}

int validate_command(const std::string& path) {
  const RunConfig cfg = load_config(path);
  const DiscreteProblem p = materialize(cfg.problem, cfg.grid());
  const CellFieldd rho = charge_density(p.c0(), p.valences(), p.rho_f());
  const double gauss = gauss_residual(p.d0(), p.c0(), p.valences(), p.rho_f(), p.kappa());
  const double scale = gauss_scale(p.d0(), rho, p.kappa());
  std::cout << std::setprecision(10);
  std::cout << "config ok: " << cfg.problem.name << ", " << cfg.nx << "x" << cfg.ny << ", " << cfg.steps()
            << " steps\n";
  std::cout << "total charge " << mass(rho) << "\n";
  std::cout << "initial gauss residual " << gauss << " (scale " << scale << ")\n";
  std::cout << "initial faraday residual " << faraday_residual(p.d0(), p.eps_face()) << "\n";
  std::cout << "min initial concentration " << [&] {
    double m = p.c0().front().min();
    for (const auto& c : p.c0()) m = std::min(m, c.min());
    return m;
  }() << "\n";
  if (cfg.corrections.gauss && gauss > 1e-10 * scale) {
    std::cout << "warning: initial displacement does not satisfy the discrete Gauss law\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving Maxwell-Ampere Nernst-Planck simulator"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "run a JSON configuration");
  run_cmd->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
  std::string run_out;
  run_cmd->add_option("--out", run_out, "override the output directory");

  auto* validate_cmd = app.add_subcommand("validate", "materialize a configuration and check its invariants");
  validate_cmd->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);

  int id = 0;
  std::optional<Index> nx, ny;
  std::optional<double> dt, t_final, tol;
  std::optional<std::string> scheme, sweep, mu_reference;
  std::optional<bool> gauss, faraday;
  std::optional<int> every;
  std::optional<std::vector<double>> snapshots;
  std::string out_dir;
  auto* ex_cmd = app.add_subcommand("example", "run a built-in example");
  ex_cmd->add_option("--id", id, "example id")->required()->check(CLI::IsMember({1, 2, 3}));
  ex_cmd->add_option("--nx", nx, "cells in x");
  ex_cmd->add_option("--ny", ny, "cells in y");
  ex_cmd->add_option("--dt", dt, "time step");
  ex_cmd->add_option("--t-final", t_final, "final time");
  ex_cmd->add_option("--scheme", scheme, "euler or bdf2")->check(CLI::IsMember({"euler", "bdf2"}));
  ex_cmd->add_option("--gauss", gauss, "Gauss correction on/off");
  ex_cmd->add_option("--faraday", faraday, "Faraday correction on/off");
  ex_cmd->add_option("--sweep", sweep, "Gauss sweep order");
  ex_cmd->add_option("--mu-reference", mu_reference, "initial, previous_step or solvent");
  ex_cmd->add_option("--snapshots", snapshots, "snapshot times")->delimiter(',');
  ex_cmd->add_option("--every", every, "diagnostics cadence in steps");
  ex_cmd->add_option("--tol", tol, "linear solver tolerance");
  ex_cmd->add_option("--out", out_dir, "output directory");

  int conv_id = 1;
  std::string conv_scheme = "euler";
  std::vector<double> levels;
  std::string dt_rule;
  double conv_dt = 0.0;
  std::string conv_out;
  auto* conv_cmd = app.add_subcommand("converge", "convergence study against the exact solution");
  conv_cmd->add_option("--id", conv_id, "example id")->check(CLI::IsMember({1}));
  conv_cmd->add_option("--scheme", conv_scheme, "euler or bdf2")->check(CLI::IsMember({"euler", "bdf2"}));
  conv_cmd->add_option("--levels", levels, "mesh widths, coarse to fine")->required()->delimiter(',');
  conv_cmd->add_option("--dt-rule", dt_rule, "h2, h/500 or fixed (default: h2 for euler, h/500 for bdf2)");
  conv_cmd->add_option("--dt", conv_dt, "time step for --dt-rule fixed");
  conv_cmd->add_option("--out", conv_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      RunConfig cfg = load_config(config_path);
      if (!run_out.empty()) {
        cfg.output.directory = run_out;
        refresh_source(cfg);
      }
      print_summary(cfg, run(cfg));
    } else if (*validate_cmd) {
      return validate_command(config_path);
    } else if (*ex_cmd) {
      RunConfig cfg = example_config(id);
      if (nx) cfg.nx = *nx;
      if (ny) cfg.ny = *ny;
      if (nx && !ny) cfg.ny = *nx;
      if (dt) cfg.dt = *dt;
      if (t_final) cfg.t_final = *t_final;
      if (scheme) cfg.scheme = parse_scheme(*scheme);
      if (gauss) cfg.corrections.gauss = *gauss;
      if (faraday) cfg.corrections.faraday = *faraday;
      if (sweep) cfg.corrections.sweep_order = parse_sweep_order(*sweep);
      if (mu_reference) cfg.problem.mu_reference = parse_mu_reference(*mu_reference);
      if (snapshots) cfg.output.snapshot_times = *snapshots;
      if (every) cfg.output.diagnostics_every = *every;
      if (tol) cfg.solver.tol = *tol;
      cfg.output.directory = out_dir;
      cfg.validate();
      refresh_source(cfg);
      print_summary(cfg, run(cfg));
    } else if (*conv_cmd) {
      RunConfig cfg = example_config(conv_id);
      cfg.scheme = parse_scheme(conv_scheme);
      cfg.output.directory = conv_out;
      cfg.output.snapshot_times.clear();
      const DtRule rule = dt_rule.empty() ? (cfg.scheme == Scheme::euler ? DtRule::h_squared : DtRule::h_over_500)
                                          : parse_dt_rule(dt_rule);
      const ConvergenceResult res = convergence_study(cfg, levels, rule, conv_dt);
      res.report.write_csv(std::cout);
      std::cout << std::setprecision(10);
      for (std::size_t k = 0; k < levels.size(); ++k) {
        std::cout << "h " << levels[k] << " running minimum concentration " << res.running_min[k] << "\n";
      }
      if (!conv_out.empty()) {
        std::filesystem::create_directories(conv_out);
        std::ofstream f(std::filesystem::path(conv_out) / "convergence.csv");
        res.report.write_csv(f);
      }
    }
  } catch (const manp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
