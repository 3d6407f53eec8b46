#include "manp/runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "manp/field_io.hpp"

namespace manp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// configuration

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ValidationError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
T read(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + " is missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + " has the wrong type");
  }
}

template <typename T>
T read_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? read<T>(j, key, where) : fallback;
}

SpatialFn parse_fixed_charge(const json& terms) {
  if (!terms.is_array()) throw ValidationError("problem.fixed_charge must be an array of terms");
  std::vector<SpatialFn> parts;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const json& t = terms[k];
    const std::string where = "problem.fixed_charge[" + std::to_string(k) + "]";
    if (!t.is_object()) throw ValidationError(where + " must be an object");
    const auto type = read<std::string>(t, "type", where);
    if (type == "gaussian") {
      check_keys(t, {"type", "amplitude", "center", "width"}, where);
      const double a = read<double>(t, "amplitude", where);
      const auto c = read<std::vector<double>>(t, "center", where);
      const double w = read<double>(t, "width", where);
      if (c.size() != 2) throw ValidationError(where + ".center must have two entries");
      parts.push_back([=](double x, double y) {
        return a * std::exp(-w * ((x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1])));
      });
    } else if (type == "annulus") {
      check_keys(t, {"type", "amplitude", "r2_min", "r2_max", "half"}, where);
      const double a = read<double>(t, "amplitude", where);
      const double lo = read<double>(t, "r2_min", where);
      const double hi = read<double>(t, "r2_max", where);
      const auto half = read_or<std::string>(t, "half", "full", where);
      if (half != "full" && half != "upper" && half != "lower") {
        throw ValidationError(where + ".half must be full, upper or lower");
      }
      parts.push_back([=](double x, double y) {
        const double r2 = x * x + y * y;
        if (r2 < lo - 1e-12 || r2 > hi + 1e-12) return 0.0;
        if (half == "full") return a;
        double theta = std::atan2(y, x);
        if (theta <= 0.0) theta += 2.0 * std::numbers::pi;
        const bool upper = theta <= std::numbers::pi;
        return upper == (half == "upper") ? a : 0.0;
      });
    } else {
      throw ValidationError(where + ".type must be gaussian or annulus, got '" + type + "'");
    }
  }
  return [parts](double x, double y) {
    double sum = 0.0;
    for (const auto& f : parts) sum += f(x, y);
    return sum;
  };
}

ProblemSpec parse_inline_problem(const json& j) {
  const std::string where = "problem";
  check_keys(j, {"name", "kappa", "permittivity", "species", "fixed_charge", "initial_displacement",
                 "gauss_correction", "faraday_correction"},
             where);
  ProblemSpec p;
  p.name = read_or<std::string>(j, "name", "inline", where);
  p.kappa = read<double>(j, "kappa", where);
  const double eps = read<double>(j, "permittivity", where);
  p.permittivity = [eps](double, double) { return eps; };
  p.fixed_charge = j.contains("fixed_charge") ? parse_fixed_charge(j.at("fixed_charge"))
                                              : SpatialFn([](double, double) { return 0.0; });
  const auto init = read_or<std::string>(j, "initial_displacement", "poisson", where);
  if (init == "poisson") {
    p.initial_displacement = PoissonInit{};
  } else if (init == "zero") {
    auto zero = [](double, double, double) { return 0.0; };
    p.initial_displacement = VectorSpaceTimeFn{zero, zero};
  } else {
    throw ValidationError("problem.initial_displacement must be poisson or zero");
  }
  p.gauss_correction = read_or<bool>(j, "gauss_correction", true, where);
  p.faraday_correction = read_or<bool>(j, "faraday_correction", true, where);

  const json& species = j.contains("species") ? j.at("species") : json();
  if (!species.is_array() || species.empty()) throw ValidationError("problem.species must be a non-empty array");
  for (std::size_t k = 0; k < species.size(); ++k) {
    const std::string sw = "problem.species[" + std::to_string(k) + "]";
    const json& s = species[k];
    check_keys(s, {"name", "valence", "initial_concentration", "solvation"}, sw);
    SpeciesSpec sp;
    sp.name = read_or<std::string>(s, "name", "c" + std::to_string(k + 1), sw);
    sp.valence = read<double>(s, "valence", sw);
    const double c0 = read<double>(s, "initial_concentration", sw);
    sp.initial_concentration = [c0](double, double) { return c0; };
    if (s.contains("solvation")) {
      const json& sv = s.at("solvation");
      check_keys(sv, {"ion_volume", "solvent_volume"}, sw + ".solvation");
      sp.solvation = Solvation{read<double>(sv, "ion_volume", sw + ".solvation"),
                               read<double>(sv, "solvent_volume", sw + ".solvation")};
    }
    p.species.push_back(std::move(sp));
  }
  return p;
}

json to_json(const RunConfig& c) {
  json j;
  j["problem"] = c.builtin_id > 0 ? json(c.builtin_id) : json::parse(c.inline_problem);
  j["grid"] = {{"nx", c.nx},
               {"ny", c.ny},
               {"domain",
                {{"x0", c.problem.domain.x0},
                 {"y0", c.problem.domain.y0},
                 {"lx", c.problem.domain.lx},
                 {"ly", c.problem.domain.ly}}}};
  j["time"] = {{"dt", c.dt}, {"t_final", c.t_final}};
  j["scheme"] = to_string(c.scheme);
  j["corrections"] = {{"gauss", c.corrections.gauss},
                      {"faraday", c.corrections.faraday},
                      {"sweep_order", to_string(c.corrections.sweep_order)},
                      {"faraday_method", to_string(c.corrections.faraday_method)}};
  j["solver"] = {{"tol", c.solver.tol}, {"maxit", c.solver.maxit}};
  j["output"] = {{"directory", c.output.directory},
                 {"snapshot_times", c.output.snapshot_times},
                 {"diagnostics_every", c.output.diagnostics_every}};
  j["mu_reference"] = to_string(c.problem.mu_reference);
  if (c.resume) j["resume"] = {{"directory", c.resume->directory}, {"time", c.resume->time}};
  return j;
}

// ---------------------------------------------------------------------------
// time stepping

std::vector<FaceFieldd> increments(const DiscreteProblem& p, double t, const std::vector<CellFieldd>& c,
                                   const FaceFieldd& d) {
  return compute_dg(d, p.chemical_potentials(t, c), p.valences(), p.eps_face());
}

double min_concentration(const std::vector<CellFieldd>& c) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& cl : c) m = std::min(m, cl.min());
  return m;
}

DiagnosticsRecord make_record(const DiscreteProblem& p, double t, const std::vector<CellFieldd>& c,
                              const FaceFieldd& d, double gauss_pre, double dt_star_value) {
  DiagnosticsRecord r;
  r.t = t;
  for (const auto& cl : c) {
    r.mass.push_back(mass(cl));
    r.min_c.push_back(cl.min());
  }
  r.energy = std::numeric_limits<double>::quiet_NaN();
  if (min_concentration(c) > 0.0) {
    try {
      r.energy = free_energy(d, c, p.chemical_potentials(t, c), p.kappa(), p.eps_face());
    } catch (const ConsistencyError&) {
      // A solvation reference left its domain; the energy is undefined.
    }
  }
  r.gauss_residual = gauss_residual(d, c, p.valences(), p.rho_f(), p.kappa());
  r.gauss_residual_pre_faraday = gauss_pre;
  r.faraday_residual = faraday_residual(d, p.eps_face());
  r.dt_star = dt_star_value;
  return r;
}

double safe_dt_star(const std::vector<FaceFieldd>& dg, const DiscreteProblem& p, const std::vector<CellFieldd>& c) {
  double c_max = 0.0;
  for (const auto& cl : c) c_max = std::max(c_max, cl.max());
  if (!(c_max > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return dt_star(dg, p.eps_face(), c, p.kappa(), p.valences());
}

bool energy_theory_applies(const DiscreteProblem& p, const RunConfig& cfg) {
  if (cfg.scheme != Scheme::euler || p.has_theta() || p.has_ma_source()) return false;
  for (const auto& s : p.spec().species)
    if (s.np_source) return false;
  return p.chemical_potential_static();
}

// ---------------------------------------------------------------------------
// files

std::string format_time(double t) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, t);
  return std::string(buf, res.ptr);
}

void write_snapshot(const fs::path& dir, const SimState& s, double label, bool with_history) {
  for (std::size_t l = 0; l < s.c.size(); ++l) {
    save_cell_csv((dir / snapshot_name("c", std::to_string(l + 1), label)).string(), s.c[l]);
  }
  save_face_csv((dir / snapshot_name("D", "all", label)).string(), s.d);
  save_cell_csv((dir / snapshot_name("phi", "all", label)).string(), s.phi);
  if (with_history && s.has_history()) {
    for (std::size_t l = 0; l < s.c_prev.size(); ++l) {
      save_cell_csv((dir / snapshot_name("cprev", std::to_string(l + 1), label)).string(), s.c_prev[l]);
    }
    save_face_csv((dir / snapshot_name("Dprev", "all", label)).string(), *s.d_prev);
  }
}

void write_summary(const fs::path& dir, const RunConfig& cfg, const RunSummary& sum, const std::string& status) {
  std::ofstream out(dir / "summary.txt");
  if (!out) throw Error("cannot write " + (dir / "summary.txt").string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "status " << status << '\n';
  out << "config_hash " << sum.config_hash << '\n';
  out << "problem " << cfg.problem.name << '\n';
  out << "scheme " << to_string(cfg.scheme) << '\n';
  out << "grid " << cfg.nx << 'x' << cfg.ny << '\n';
  out << "dt " << cfg.dt << '\n';
  out << "t_final " << cfg.t_final << '\n';
  out << "corrections gauss=" << (cfg.corrections.gauss ? "on" : "off")
      << " faraday=" << (cfg.corrections.faraday ? "on" : "off")
      << " sweep=" << to_string(cfg.corrections.sweep_order)
      << " faraday_method=" << to_string(cfg.corrections.faraday_method) << '\n';
  out << "mu_reference " << to_string(cfg.problem.mu_reference) << '\n';
  out << "steps " << sum.steps << '\n';
  out << "wall_seconds " << sum.wall_seconds << '\n';
  out << "solver_iterations " << sum.solver_iterations << '\n';
  out << "solver_max_relative_residual " << sum.solver_max_residual << '\n';
  out << "running_min_concentration " << sum.running_min_concentration << '\n';
  out << "energy_checked_steps " << sum.energy_checked_steps << '\n';
  out << "energy_monotone_where_applicable " << (sum.energy_monotone_where_applicable ? "yes" : "no") << '\n';
  if (!sum.history.empty()) {
    const DiagnosticsRecord& r = sum.history.back();
    out << "final " << diagnostics_header(r.mass.size()) << '\n' << "final ";
    write_diagnostics_row(out, r);
  }
  out << "config " << cfg.source << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(FaradayMethod m) { return m == FaradayMethod::recursion ? "recursion" : "projection"; }

FaradayMethod parse_faraday_method(const std::string& s) {
  if (s == "recursion") return FaradayMethod::recursion;
  if (s == "projection") return FaradayMethod::projection;
  throw ValidationError("faraday_method must be recursion or projection, got '" + s + "'");
}

GridSpec RunConfig::grid() const {
  return GridSpec(nx, ny, problem.domain.x0, problem.domain.y0, problem.domain.lx, problem.domain.ly);
}

long RunConfig::steps() const {
  const double ratio = t_final / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw ValidationError("t_final must be a whole multiple of dt");
  }
  return static_cast<long>(n);
}

void RunConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(t_final >= dt)) throw ValidationError("t_final must be at least dt");
  (void)steps();
  (void)grid();
  if (!(solver.tol > 0.0)) throw ValidationError("solver.tol must be positive");
  if (solver.maxit < 0) throw ValidationError("solver.maxit must be nonnegative");
  if (output.diagnostics_every < 1) throw ValidationError("output.diagnostics_every must be at least 1");
  for (double t : output.snapshot_times) {
    if (!(t >= 0.0) || t > t_final * (1.0 + 1e-12)) {
      throw ValidationError("snapshot time " + format_time(t) + " is outside [0, t_final]");
    }
  }
  if (resume && !(resume->time >= 0.0 && resume->time < t_final)) {
    throw ValidationError("resume.time must lie in [0, t_final)");
  }
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"problem", "grid", "time", "scheme", "corrections", "solver", "output", "mu_reference", "resume"},
             "config");

  RunConfig c;
  if (!j.contains("problem")) throw ValidationError("config is missing required key 'problem'");
  const json& pj = j.at("problem");
  if (pj.is_number_integer()) {
    c.builtin_id = pj.get<int>();
    c.problem = builtin_example(c.builtin_id);
  } else if (pj.is_object()) {
    c.problem = parse_inline_problem(pj);
    c.inline_problem = pj.dump();
  } else {
    throw ValidationError("config.problem must be an example id or a problem object");
  }
  c.corrections.gauss = c.problem.gauss_correction;
  c.corrections.faraday = c.problem.faraday_correction;

  const json gj = read<json>(j, "grid", "config");
  check_keys(gj, {"nx", "ny", "domain"}, "grid");
  c.nx = read<Index>(gj, "nx", "grid");
  c.ny = read<Index>(gj, "ny", "grid");
  if (gj.contains("domain")) {
    const json& dj = gj.at("domain");
    check_keys(dj, {"x0", "y0", "lx", "ly"}, "grid.domain");
    c.problem.domain = Domain{read<double>(dj, "x0", "grid.domain"), read<double>(dj, "y0", "grid.domain"),
                              read<double>(dj, "lx", "grid.domain"), read<double>(dj, "ly", "grid.domain")};
  }

  const json tj = read<json>(j, "time", "config");
  check_keys(tj, {"dt", "t_final"}, "time");
  c.dt = read<double>(tj, "dt", "time");
  c.t_final = read<double>(tj, "t_final", "time");

  c.scheme = parse_scheme(read_or<std::string>(j, "scheme", "euler", "config"));

  if (j.contains("corrections")) {
    const json& cj = j.at("corrections");
    check_keys(cj, {"gauss", "faraday", "sweep_order", "faraday_method"}, "corrections");
    c.corrections.gauss = read_or<bool>(cj, "gauss", c.corrections.gauss, "corrections");
    c.corrections.faraday = read_or<bool>(cj, "faraday", c.corrections.faraday, "corrections");
    c.corrections.sweep_order =
        parse_sweep_order(read_or<std::string>(cj, "sweep_order", "LL_to_UR", "corrections"));
    c.corrections.faraday_method = parse_faraday_method(
        read_or<std::string>(cj, "faraday_method", to_string(c.corrections.faraday_method), "corrections"));
  }
  if (j.contains("solver")) {
    const json& sj = j.at("solver");
    check_keys(sj, {"tol", "maxit"}, "solver");
    c.solver.tol = read_or<double>(sj, "tol", c.solver.tol, "solver");
    c.solver.maxit = read_or<Index>(sj, "maxit", c.solver.maxit, "solver");
  }
  if (j.contains("output")) {
    const json& oj = j.at("output");
    check_keys(oj, {"directory", "snapshot_times", "diagnostics_every"}, "output");
    c.output.directory = read_or<std::string>(oj, "directory", "", "output");
    c.output.snapshot_times = read_or<std::vector<double>>(oj, "snapshot_times", {}, "output");
    c.output.diagnostics_every = read_or<int>(oj, "diagnostics_every", 1, "output");
  }
  if (j.contains("mu_reference")) {
    c.problem.mu_reference = parse_mu_reference(read<std::string>(j, "mu_reference", "config"));
  }
  if (j.contains("resume")) {
    const json& rj = j.at("resume");
    check_keys(rj, {"directory", "time"}, "resume");
    c.resume = ResumeConfig{read<std::string>(rj, "directory", "resume"), read<double>(rj, "time", "resume")};
  }
  c.validate();
  refresh_source(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

RunConfig example_config(int id) {
  RunConfig c;
  c.builtin_id = id;
  c.problem = builtin_example(id);
  c.corrections.gauss = c.problem.gauss_correction;
  c.corrections.faraday = c.problem.faraday_correction;
  switch (id) {
    case 1:
      c.nx = c.ny = 10;
      c.dt = 0.04;
      c.t_final = 1.0;
      break;
    case 2:
      c.nx = c.ny = 100;
      c.dt = 1e-3;
      c.t_final = 5.0;
      c.output.snapshot_times = {0.0, 0.1, 1.0, 5.0};
      break;
    default:
      c.nx = c.ny = 100;
      c.dt = 1e-3;
      c.t_final = 2.0;
      c.output.snapshot_times = {0.0, 0.01, 0.1, 0.5, 2.0};
      break;
  }
  refresh_source(c);
  return c;
}

void refresh_source(RunConfig& c) { c.source = to_json(c).dump(); }

std::string content_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
  return os.str();
}

SimState::SimState(const GridSpec& grid) : d(grid), phi(grid) {}

SimState initial_state(const DiscreteProblem& p, const RunConfig&) {
  SimState s(p.grid());
  s.c = p.c0();
  s.d = p.d0();
  s.phi = faraday_correct(s.d, p.eps_face()).phi;
  const auto dg = increments(p, 0.0, s.c, s.d);
  const double pre = gauss_residual(s.d, s.c, p.valences(), p.rho_f(), p.kappa());
  s.record = make_record(p, 0.0, s.c, s.d, pre, safe_dt_star(dg, p, s.c));
  return s;
}

SimState step(const SimState& s, const DiscreteProblem& p, const RunConfig& cfg, StepInfo* info) {
  const double dt = cfg.dt;
  const double t_next = static_cast<double>(s.step + 1) * dt;
  const bool second_order = cfg.scheme == Scheme::bdf2 && s.has_history();
  const std::size_t m = p.species_count();

  std::vector<FaceFieldd> dg = increments(p, s.t, s.c, s.d);
  if (second_order) {
    const auto dg_prev = increments(p, s.t - dt, s.c_prev, *s.d_prev);
    for (std::size_t l = 0; l < m; ++l) dg[l] = 2.0 * dg[l] - dg_prev[l];
  }

  SimState next(p.grid());
  next.t = t_next;
  next.step = s.step + 1;
  next.c_prev = s.c;
  next.d_prev = s.d;

  StepInfo local;
  std::vector<FaceFieldd> fluxes;
  for (std::size_t l = 0; l < m; ++l) {
    const auto source = p.np_source(l, t_next);
    NpStep r = second_order ? bdf2_np_step(s.c[l], s.c_prev[l], dg[l], p.kappa(), dt, source, cfg.solver)
                            : euler_np_step(s.c[l], dg[l], p.kappa(), dt, source, cfg.solver);
    local.solver_iterations += static_cast<long>(r.stats.iterations);
    local.solver_residual = std::max(local.solver_residual, r.stats.final_relative_residual);
    next.c.push_back(std::move(r.c));
    fluxes.push_back(std::move(r.flux));
  }

  if (second_order) {
    FaceFieldd theta = 2.0 * p.theta(s.t) - p.theta(s.t - dt);
    next.d = ma_bdf2_update(s.d, *s.d_prev, fluxes, p.valences(), p.kappa(), dt, theta, p.ma_source(t_next));
  } else {
    next.d = ma_euler_update(s.d, fluxes, p.valences(), p.kappa(), dt, p.theta(s.t), p.ma_source(s.t));
  }

  if (cfg.corrections.gauss) {
    GaussCorrection g = gauss_correct(next.d, next.c, p.valences(), p.rho_f(), p.kappa(), cfg.corrections.sweep_order);
    local.max_xi = g.report.max_xi;
    next.d = std::move(g.d);
  }
  const double gauss_pre = gauss_residual(next.d, next.c, p.valences(), p.rho_f(), p.kappa());

  PotentialReconstruction rec = cfg.corrections.faraday_method == FaradayMethod::projection
                                    ? faraday_project(next.d, p.eps_face(), p.poisson_factor())
                                    : faraday_correct(next.d, p.eps_face());
  next.phi = std::move(rec.phi);
  if (cfg.corrections.faraday) {
    local.faraday_change = rec.max_change;
    next.d = std::move(rec.d_tilde);
  }

  std::vector<CellFieldd> both = s.c;
  both.insert(both.end(), next.c.begin(), next.c.end());
  local.dt_star = safe_dt_star(dg, p, both);
  next.record = make_record(p, t_next, next.c, next.d, gauss_pre, local.dt_star);
  if (info) *info = local;
  return next;
}

std::string snapshot_name(const std::string& field, const std::string& species, double time) {
  return field + "_" + species + "_t" + format_time(time) + ".csv";
}

SimState load_snapshot(const std::string& directory, double time, const DiscreteProblem& p, const RunConfig& cfg) {
  const fs::path dir(directory);
  const GridSpec& g = p.grid();
  SimState s(g);
  s.t = time;
  s.step = std::lround(time / cfg.dt);
  for (std::size_t l = 0; l < p.species_count(); ++l) {
    s.c.push_back(load_cell_csv((dir / snapshot_name("c", std::to_string(l + 1), time)).string(), g));
  }
  s.d = load_face_csv((dir / snapshot_name("D", "all", time)).string(), g);
  s.phi = load_cell_csv((dir / snapshot_name("phi", "all", time)).string(), g);
  const fs::path prev = dir / snapshot_name("Dprev", "all", time);
  if (cfg.scheme == Scheme::bdf2 && fs::exists(prev)) {
    for (std::size_t l = 0; l < p.species_count(); ++l) {
      s.c_prev.push_back(load_cell_csv((dir / snapshot_name("cprev", std::to_string(l + 1), time)).string(), g));
    }
    s.d_prev = load_face_csv(prev.string(), g);
  }
  const auto dg = increments(p, time, s.c, s.d);
  const double pre = gauss_residual(s.d, s.c, p.valences(), p.rho_f(), p.kappa());
  s.record = make_record(p, time, s.c, s.d, pre, safe_dt_star(dg, p, s.c));
  return s;
}

RunSummary run(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const long total_steps = cfg.steps();
  const DiscreteProblem problem = materialize(cfg.problem, cfg.grid());
  const bool energy_check = energy_theory_applies(problem, cfg);

  RunSummary sum;
  sum.config_hash = content_hash(cfg.source);
  SimState state = cfg.resume ? load_snapshot(cfg.resume->directory, cfg.resume->time, problem, cfg)
                              : initial_state(problem, cfg);
  sum.history.push_back(state.record);
  sum.running_min_concentration = min_concentration(state.c);

  const bool writing = !cfg.output.directory.empty();
  const fs::path dir(cfg.output.directory);
  std::ofstream diag;
  if (writing) {
    fs::create_directories(dir);
    diag.open(dir / "diagnostics.csv");
    if (!diag) throw Error("cannot write " + (dir / "diagnostics.csv").string());
    diag << diagnostics_header(problem.species_count()) << '\n';
    write_diagnostics_row(diag, state.record);
  }
  auto snapshot_due = [&](long n) -> std::optional<double> {
    for (double ts : cfg.output.snapshot_times)
      if (std::lround(ts / cfg.dt) == n) return ts;
    return std::nullopt;
  };
  if (writing)
    if (auto ts = snapshot_due(state.step)) write_snapshot(dir, state, *ts, cfg.scheme == Scheme::bdf2);

  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  while (state.step < total_steps) {
    StepInfo info;
    SimState next(problem.grid());
    try {
      next = step(state, problem, cfg, &info);
    } catch (const std::exception& e) {
      if (writing) {
        write_snapshot(dir, state, state.t, true);
        sum.wall_seconds = elapsed();
        write_summary(dir, cfg, sum, std::string("failed at step ") + std::to_string(state.step + 1) + ": " + e.what());
      }
      throw;
    }

    ++sum.steps;
    sum.solver_iterations += info.solver_iterations;
    sum.solver_max_residual = std::max(sum.solver_max_residual, info.solver_residual);
    sum.running_min_concentration = std::min(sum.running_min_concentration, min_concentration(next.c));
    if (energy_check && cfg.dt < info.dt_star && std::isfinite(next.record.energy) &&
        std::isfinite(state.record.energy)) {
      ++sum.energy_checked_steps;
      if (next.record.energy > state.record.energy + 1e-12 * std::abs(state.record.energy)) {
        sum.energy_monotone_where_applicable = false;
      }
    }
    sum.history.push_back(next.record);
    state = std::move(next);

    if (writing) {
      if (state.step % cfg.output.diagnostics_every == 0 || state.step == total_steps) {
        write_diagnostics_row(diag, state.record);
      }
      if (auto ts = snapshot_due(state.step)) write_snapshot(dir, state, *ts, cfg.scheme == Scheme::bdf2);
    }
  }

  sum.wall_seconds = elapsed();
  if (writing) {
    diag.flush();
    write_summary(dir, cfg, sum, "ok");
  }
  sum.final_state = std::move(state);
  return sum;
}

DtRule parse_dt_rule(const std::string& s) {
  if (s == "h2") return DtRule::h_squared;
  if (s == "h/500") return DtRule::h_over_500;
  if (s == "fixed") return DtRule::fixed;
  throw ValidationError("dt rule must be h2, h/500 or fixed, got '" + s + "'");
}

ConvergenceResult convergence_study(const RunConfig& base, const std::vector<double>& hs, DtRule rule,
                                    double fixed_dt) {
  if (hs.empty()) throw ValidationError("convergence_study needs at least one mesh width");
  for (const auto& s : base.problem.species)
    if (!s.exact) throw ValidationError("convergence_study needs exact concentrations for every species");
  if (!base.problem.exact_displacement) throw ValidationError("convergence_study needs an exact displacement");

  ConvergenceResult out;
  for (std::size_t l = 0; l < base.problem.species.size(); ++l) out.report.fields.push_back("c" + std::to_string(l + 1));
  out.report.fields.push_back("D1");
  out.report.fields.push_back("D2");
  out.report.errors.resize(out.report.fields.size());

  for (double h : hs) {
    RunConfig cfg = base;
    const Domain& dom = cfg.problem.domain;
    cfg.nx = std::lround(dom.lx / h);
    cfg.ny = std::lround(dom.ly / h);
    if (std::abs(dom.lx / static_cast<double>(cfg.nx) - h) > 1e-12 * h ||
        std::abs(dom.ly / static_cast<double>(cfg.ny) - h) > 1e-12 * h) {
      throw ValidationError("mesh width " + format_time(h) + " does not divide the domain");
    }
    cfg.dt = rule == DtRule::h_squared ? h * h : rule == DtRule::h_over_500 ? h / 500.0 : fixed_dt;
    cfg.resume.reset();
    if (!base.output.directory.empty()) {
      cfg.output.directory = (fs::path(base.output.directory) / ("h" + format_time(h))).string();
    }
    refresh_source(cfg);

    const RunSummary r = run(cfg);
    const SimState& s = *r.final_state;
    for (std::size_t l = 0; l < s.c.size(); ++l) {
      out.report.errors[l].push_back(error_vs_exact(s.c[l], *cfg.problem.species[l].exact, s.t));
    }
    const auto& ex = *cfg.problem.exact_displacement;
    out.report.errors[s.c.size()].push_back(error_vs_exact_x(s.d, ex.x, s.t));
    out.report.errors[s.c.size() + 1].push_back(error_vs_exact_y(s.d, ex.y, s.t));
    out.report.h.push_back(h);
    out.running_min.push_back(r.running_min_concentration);
  }
  return out;
}

}  // namespace manp
