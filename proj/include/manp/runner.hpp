#pragma once

#include <optional>
#include <string>
#include <vector>

#include "manp/ampere.hpp"
#include "manp/diagnostics.hpp"
#include "manp/model.hpp"
#include "manp/transport.hpp"

namespace manp {

/// How the Faraday step turns the corrected displacement into a potential:
/// by row/column recursion (faraday_correct) or by a Poisson solve
/// (faraday_project).
enum class FaradayMethod { recursion, projection };

std::string to_string(FaradayMethod m);
FaradayMethod parse_faraday_method(const std::string& s);

struct CorrectionConfig {
  bool gauss = true;
  bool faraday = true;
  SweepOrder sweep_order = SweepOrder::LL_to_UR;
  FaradayMethod faraday_method = FaradayMethod::projection;
};

struct OutputConfig {
  /// Empty: keep everything in memory and write nothing.
  std::string directory;
  std::vector<double> snapshot_times;
  int diagnostics_every = 1;
};

/// Continue from snapshot files written by an earlier run.
struct ResumeConfig {
  std::string directory;
  double time = 0.0;
};

struct RunConfig {
  /// 1, 2 or 3 for a built-in problem, 0 for an inline one.
  int builtin_id = 0;
  ProblemSpec problem;
  Index nx = 0;
  Index ny = 0;
  double dt = 0.0;
  double t_final = 0.0;
  Scheme scheme = Scheme::euler;
  CorrectionConfig corrections;
  SolverOptions solver;
  OutputConfig output;
  std::optional<ResumeConfig> resume;
  /// JSON text of an inline problem definition (empty for built-ins).
  std::string inline_problem;
  /// Canonical JSON text of the whole configuration; hashed into the run
  /// summary.
  std::string source;

  GridSpec grid() const;
  /// Number of steps; t_final must be a whole multiple of dt.
  long steps() const;
  /// Throws ValidationError on an inconsistent configuration.
  void validate() const;
};

/// Parses a JSON configuration document. Unknown keys are errors.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Default configuration of a built-in example (the desk-scale versions of
/// the reference experiments), serialized back into `source`.
RunConfig example_config(int id);

/// Rebuilds `source` after fields were changed programmatically.
void refresh_source(RunConfig& config);

/// Git-style blob hash (SHA-1 over "blob <size>\0<content>") as hex.
std::string content_hash(const std::string& content);

struct SimState {
  explicit SimState(const GridSpec& grid);

  double t = 0.0;
  long step = 0;
  std::vector<CellFieldd> c;
  FaceFieldd d;
  CellFieldd phi;
  /// Previous time level; present once a step has been taken.
  std::vector<CellFieldd> c_prev;
  std::optional<FaceFieldd> d_prev;
  DiagnosticsRecord record;

  bool has_history() const { return d_prev.has_value(); }
};

struct StepInfo {
  long solver_iterations = 0;
  double solver_residual = 0.0;
  double max_xi = 0.0;
  double faraday_change = 0.0;
  /// Bound evaluated with the increments and concentrations of this step.
  double dt_star = 0.0;
};

/// Initial state of a problem: c0, d0, its potential and the t = 0 record.
SimState initial_state(const DiscreteProblem& problem, const RunConfig& config);

/// One time step: increments, NP solves, Ampere update, optional Gauss and
/// Faraday corrections, diagnostics. A bdf2 configuration without history
/// takes a backward-Euler step.
SimState step(const SimState& state, const DiscreteProblem& problem, const RunConfig& config,
              StepInfo* info = nullptr);

struct RunSummary {
  long steps = 0;
  double wall_seconds = 0.0;
  long solver_iterations = 0;
  double solver_max_residual = 0.0;
  std::vector<DiagnosticsRecord> history;
  /// Minimum over all recorded times and species.
  double running_min_concentration = 0.0;
  /// True when every step satisfied dt < dt_star and the energy did not grow
  /// by more than 1e-12 relative in those steps.
  bool energy_monotone_where_applicable = true;
  long energy_checked_steps = 0;
  std::string config_hash;
  std::optional<SimState> final_state;
};

/// Materializes the problem, advances to t_final and writes diagnostics.csv,
/// snapshots and summary.txt when an output directory is configured. On a
/// step failure the last good state is written before the error propagates.
RunSummary run(const RunConfig& config);

/// Loads the state saved at `time` in `directory` (concentrations,
/// displacement and, for bdf2 runs, the previous level).
SimState load_snapshot(const std::string& directory, double time, const DiscreteProblem& problem,
                       const RunConfig& config);

/// File name of a snapshot: `<field>_<species>_t<time>.csv`.
std::string snapshot_name(const std::string& field, const std::string& species, double time);

enum class DtRule { h_squared, h_over_500, fixed };

DtRule parse_dt_rule(const std::string& s);

/// Runs `base` at every mesh width (square cells over the problem domain)
/// and reports the final-time errors of c^1, c^2, ..., D^1, D^2 together with
/// each level's running minimum concentration.
struct ConvergenceResult {
  ErrorReport report;
  std::vector<double> running_min;
};
ConvergenceResult convergence_study(const RunConfig& base, const std::vector<double>& h, DtRule rule,
                                    double fixed_dt = 0.0);

}  // namespace manp
