#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "manp/runner.hpp"

using namespace manp;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("manp_test_" + name);
  fs::remove_all(p);
  return p;
}

const char* kSmallExample1 = R"({
  "problem": 1,
  "grid": {"nx": 8, "ny": 8},
  "time": {"dt": 0.01, "t_final": 0.1},
  "scheme": "euler"
})";

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("content hash matches git blob ids") {
  CHECK(content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(kSmallExample1);
  CHECK(c.builtin_id == 1);
  CHECK(c.nx == 8);
  CHECK(c.steps() == 10);
  CHECK(c.scheme == Scheme::euler);
  CHECK_FALSE(c.corrections.gauss);
  CHECK(c.corrections.faraday_method == FaradayMethod::projection);
  // The canonical form parses back to itself.
  CHECK(parse_config(c.source).source == c.source);

  const RunConfig e3 = parse_config(R"({"problem": 3, "grid": {"nx": 10, "ny": 10},
    "time": {"dt": 0.01, "t_final": 0.02}, "mu_reference": "initial",
    "corrections": {"sweep_order": "UR_to_LL", "faraday_method": "recursion"}})");
  CHECK(e3.problem.mu_reference == MuReference::initial);
  CHECK(e3.corrections.gauss);
  CHECK(e3.corrections.sweep_order == SweepOrder::UR_to_LL);
  CHECK(e3.corrections.faraday_method == FaradayMethod::recursion);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("{"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"grid": {"nx": 8, "ny": 8}, "time": {"dt": 0.1, "t_final": 1}})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"problem": 1, "grid": {"nx": 8, "ny": 8}, "time": {"dt": 0.1, "t_final": 1},
                                   "colour": "red"})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"problem": 1, "grid": {"nx": 8, "ny": 8, "nz": 1},
                                   "time": {"dt": 0.1, "t_final": 1}})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"problem": 1, "grid": {"nx": 8}, "time": {"dt": 0.1, "t_final": 1}})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"problem": 1, "grid": {"nx": 8, "ny": 8}, "time": {"dt": 0.3, "t_final": 1}})")
                      .steps(),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"problem": 1, "grid": {"nx": 8, "ny": 8}, "time": {"dt": 0.1, "t_final": 1},
                                   "scheme": "rk4"})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"problem": 1, "grid": {"nx": 8, "ny": 8}, "time": {"dt": -0.1, "t_final": 1}})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"problem": 1, "grid": {"nx": 8, "ny": 8}, "time": {"dt": 0.1, "t_final": 1},
                                   "output": {"snapshot_times": [2.0]}})"),
                  ValidationError);
}

TEST_CASE("example defaults") {
  const RunConfig e2 = example_config(2);
  CHECK(e2.nx == 100);
  CHECK(e2.dt == 1e-3);
  CHECK(e2.t_final == 5.0);
  CHECK(e2.corrections.gauss);
  CHECK(e2.corrections.faraday);
  CHECK(example_config(3).t_final == 2.0);
  CHECK(example_config(3).problem.mu_reference == MuReference::previous_step);
}

TEST_CASE("a small run writes its outputs") {
  const fs::path dir = scratch_dir("run");
  RunConfig c = parse_config(kSmallExample1);
  c.output.directory = dir.string();
  c.output.snapshot_times = {0.0, 0.1};
  refresh_source(c);
  const RunSummary s = run(c);
  CHECK(s.steps == 10);
  CHECK(s.history.size() == 11);
  REQUIRE(s.final_state);
  CHECK(s.final_state->t == doctest::Approx(0.1));

  const std::string diag = read_file(dir / "diagnostics.csv");
  CHECK(diag.rfind(diagnostics_header(2) + "\n", 0) == 0);
  CHECK(std::count(diag.begin(), diag.end(), '\n') == 12);

  const std::string summary = read_file(dir / "summary.txt");
  CHECK(summary.find("status ok") != std::string::npos);
  CHECK(summary.find("config_hash " + content_hash(c.source)) != std::string::npos);
  CHECK(fs::exists(dir / snapshot_name("c", "1", 0.1)));
  CHECK(fs::exists(dir / snapshot_name("D", "all", 0.0)));
  fs::remove_all(dir);
}

TEST_CASE("resuming from a snapshot reproduces the continuation") {
  for (Scheme scheme : {Scheme::euler, Scheme::bdf2}) {
    const fs::path dir = scratch_dir("resume_" + to_string(scheme));
    RunConfig full = parse_config(kSmallExample1);
    full.scheme = scheme;
    full.output.directory = dir.string();
    full.output.snapshot_times = {0.05};
    refresh_source(full);
    const RunSummary a = run(full);

    RunConfig tail = full;
    tail.output.directory.clear();
    tail.output.snapshot_times.clear();
    tail.resume = ResumeConfig{dir.string(), 0.05};
    refresh_source(tail);
    const RunSummary b = run(tail);
    CHECK(b.steps == 5);
    for (std::size_t l = 0; l < 2; ++l) {
      const double diff = (a.final_state->c[l].values() - b.final_state->c[l].values()).abs().maxCoeff();
      CHECK(diff < 1e-14);
    }
    CHECK((a.final_state->d.xs() - b.final_state->d.xs()).abs().maxCoeff() < 1e-14);
    fs::remove_all(dir);
  }
}

TEST_CASE("a second-order run starts with one first-order step") {
  RunConfig c = parse_config(kSmallExample1);
  c.scheme = Scheme::bdf2;
  const DiscreteProblem p = materialize(c.problem, c.grid());
  const SimState s0 = initial_state(p, c);
  CHECK_FALSE(s0.has_history());
  const SimState s1 = step(s0, p, c);

  RunConfig e = c;
  e.scheme = Scheme::euler;
  const SimState e1 = step(s0, p, e);
  CHECK((s1.c[0].values() - e1.c[0].values()).abs().maxCoeff() == 0.0);
  CHECK(s1.has_history());
  const SimState s2 = step(s1, p, c);
  CHECK(s2.step == 2);
  CHECK((s2.c[0].values() - step(s1, p, e).c[0].values()).abs().maxCoeff() > 0.0);
}

TEST_CASE("corrected steps keep the constraints") {
  RunConfig c = parse_config(R"({"problem": 2, "grid": {"nx": 24, "ny": 24},
    "time": {"dt": 0.001, "t_final": 0.005}})");
  const RunSummary s = run(c);
  for (const auto& r : s.history) {
    CHECK(r.gauss_residual < 1e-11);
    CHECK(r.min_c[0] > 0.0);
    CHECK(r.mass[0] == doctest::Approx(s.history.front().mass[0]).epsilon(1e-13));
  }
}

TEST_CASE("convergence study reports every field") {
  RunConfig c = parse_config(kSmallExample1);
  const ConvergenceResult r = convergence_study(c, {0.5, 0.25}, DtRule::fixed, 0.01);
  CHECK(r.report.fields == std::vector<std::string>{"c1", "c2", "D1", "D2"});
  CHECK(r.report.h.size() == 2);
  CHECK(r.running_min.size() == 2);
  for (const auto& e : r.report.errors) CHECK(e[1] < e[0]);
  CHECK_THROWS_AS(convergence_study(c, {0.3}, DtRule::fixed, 0.01), ValidationError);
  CHECK(parse_dt_rule("h2") == DtRule::h_squared);
}

TEST_CASE("example 2 continues identically from the t = 1 snapshot") {
  const fs::path dir = scratch_dir("resume_e2");
  RunConfig full = parse_config(R"({"problem": 2, "grid": {"nx": 32, "ny": 32},
    "time": {"dt": 0.001, "t_final": 1.02}, "output": {"snapshot_times": [1.0]}})");
  full.output.directory = dir.string();
  refresh_source(full);
  const RunSummary a = run(full);

  RunConfig tail = full;
  tail.output = OutputConfig{};
  tail.resume = ResumeConfig{dir.string(), 1.0};
  refresh_source(tail);
  const RunSummary b = run(tail);
  CHECK(b.steps == 20);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK((a.final_state->c[l].values() - b.final_state->c[l].values()).abs().maxCoeff() == 0.0);
  }
  CHECK((a.final_state->d.ys() - b.final_state->d.ys()).abs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("identical configurations give identical diagnostics") {
  std::string outputs[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path dir = scratch_dir("determinism_" + std::to_string(k));
    RunConfig c = parse_config(R"({"problem": 3, "grid": {"nx": 20, "ny": 20},
      "time": {"dt": 0.001, "t_final": 0.01}})");
    c.output.directory = dir.string();
    refresh_source(c);
    run(c);
    outputs[k] = read_file(dir / "diagnostics.csv");
    fs::remove_all(dir);
  }
  CHECK(!outputs[0].empty());
  CHECK(outputs[0] == outputs[1]);
}

}
