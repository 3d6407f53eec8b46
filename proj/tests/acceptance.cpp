// Acceptance checks for the solver. Prints one PASS/FAIL line per criterion
// and exits non-zero when any criterion fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "manp/runner.hpp"

using namespace manp;

namespace {

// Tolerances.
constexpr double kEulerOrderMin = 1.85, kEulerOrderMax = 2.25;
constexpr double kBdf2OrderMin = 1.9, kBdf2OrderMax = 2.2;
constexpr double kErrorFactor = 2.0;
constexpr double kMassDrift = 1e-11;
constexpr double kGauss = 1e-12;
constexpr double kFaradayExample2 = 1e-9;
constexpr double kFaradayExample3 = 1e-12;
constexpr double kPropertyResidual = 1e-12;

// Reference error tables for Example 1, columns c1, c2, D1, D2.
const std::vector<double> kEulerH{0.2, 0.1, 0.05, 0.025};
const std::vector<std::vector<double>> kEulerErrors{
    {8.4589e-03, 2.1966e-03, 5.5922e-04, 1.4137e-04},
    {3.9063e-02, 9.5884e-03, 2.3958e-03, 6.0062e-04},
    {6.2148e-02, 1.5509e-02, 3.8302e-03, 9.4323e-04},
    {3.3541e-02, 7.8498e-03, 1.7889e-03, 4.1618e-04}};
const std::vector<double> kBdf2H{0.2, 0.1, 0.05};
const std::vector<std::vector<double>> kBdf2Errors{{5.7507e-03, 1.2121e-03, 2.1700e-04},
                                                   {3.7240e-02, 8.9980e-03, 2.2210e-03},
                                                   {1.4058e-02, 3.3458e-03, 7.9972e-04},
                                                   {1.4175e-02, 3.3761e-03, 8.0769e-04}};
const double kMinConcentration = 2.0 - std::numbers::pi * std::numbers::pi / 5.0;

int failures = 0;

void verdict(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string sig4(double v) { return fmt("%.4g", v); }

struct ConvergenceCheck {
  bool ok = true;
  std::string detail;
};

ConvergenceCheck check_convergence(const ConvergenceResult& r, const std::vector<std::vector<double>>& paper,
                                   const std::function<bool(std::size_t, double)>& order_ok) {
  ConvergenceCheck out;
  double worst_ratio = 1.0;
  std::string worst;
  for (std::size_t f = 0; f < r.report.fields.size(); ++f) {
    out.detail += r.report.fields[f] + " orders";
    for (const auto& o : r.report.orders(f)) {
      const bool good = o && order_ok(f, *o);
      out.ok = out.ok && good;
      out.detail += " " + (o ? fmt("%.3f", *o) : std::string("n/a"));
    }
    out.detail += "; ";
    for (std::size_t k = 0; k < r.report.h.size(); ++k) {
      const double ratio = r.report.errors[f][k] / paper[f][k];
      const double off = std::max(ratio, 1.0 / ratio);
      if (off > kErrorFactor) out.ok = false;
      if (off > worst_ratio) {
        worst_ratio = off;
        worst = r.report.fields[f] + " at h=" + fmt("%g", r.report.h[k]) + ": " + fmt("%.4e", r.report.errors[f][k]) +
                " vs " + fmt("%.4e", paper[f][k]);
      }
    }
  }
  out.detail += "largest error mismatch " + fmt("%.2f", worst_ratio) + "x (" + worst + ")";
  return out;
}

std::string min_report(const std::vector<double>& mins, bool& ok) {
  std::string s;
  for (double m : mins) {
    ok = ok && sig4(m) == sig4(kMinConcentration);
    s += (s.empty() ? "" : " ") + fmt("%.10g", m);
  }
  return s;
}

struct StructureCheck {
  double mass_drift = 0.0;
  double min_c = INFINITY;
  double gauss = 0.0;
  double gauss_time = 0.0;
  double faraday = 0.0;
};

StructureCheck scan(const RunSummary& s) {
  StructureCheck out;
  const DiagnosticsRecord& first = s.history.front();
  for (const DiagnosticsRecord& r : s.history) {
    for (std::size_t l = 0; l < r.mass.size(); ++l) {
      out.mass_drift = std::max(out.mass_drift, std::abs(r.mass[l] - first.mass[l]) / std::abs(first.mass[l]));
      out.min_c = std::min(out.min_c, r.min_c[l]);
    }
    if (r.gauss_residual > out.gauss) {
      out.gauss = r.gauss_residual;
      out.gauss_time = r.t;
    }
    out.faraday = std::max(out.faraday, r.faraday_residual);
  }
  return out;
}

void report_structure(const std::string& name, const RunSummary& s, double faraday_bound, const std::string& extra,
                      bool extra_ok) {
  const StructureCheck c = scan(s);
  const bool ok = c.mass_drift <= kMassDrift && c.min_c > 0.0 && c.gauss <= kGauss && c.faraday <= faraday_bound &&
                  s.energy_monotone_where_applicable && extra_ok;
  std::string detail = std::to_string(s.steps) + " steps; max mass drift " + fmt("%.2e", c.mass_drift) +
                       "; min c " + fmt("%.3e", c.min_c) + "; max Gauss " + fmt("%.2e", c.gauss) + " at t=" + fmt("%g", c.gauss_time) + " (<= " +
                       fmt("%g", kGauss) + "); max Faraday " + fmt("%.2e", c.faraday) + " (<= " +
                       fmt("%g", faraday_bound) + "); energy ";
  if (s.energy_checked_steps == 0) {
    detail += "check vacuous, no step had dt < dt*";
  } else {
    detail += std::string(s.energy_monotone_where_applicable ? "non-increasing" : "increased") + " over " +
              std::to_string(s.energy_checked_steps) + " steps with dt < dt*";
  }
  verdict(name, ok, detail + extra);
}

// Mean concentration of a species over the lower and upper halves of a band
// around the charged ring.
std::pair<double, double> half_ring_means(const CellFieldd& c) {
  const GridSpec& g = c.grid();
  double lower = 0.0, upper = 0.0;
  long nl = 0, nu = 0;
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      const double x = g.x(i), y = g.y(j), r = std::hypot(x, y);
      if (r < 0.35 || r > 0.65 || y == 0.0) continue;
      if (y < 0.0) {
        lower += c(i, j);
        ++nl;
      } else {
        upper += c(i, j);
        ++nu;
      }
    }
  }
  return {lower / static_cast<double>(nl), upper / static_cast<double>(nu)};
}

// Property suites.

FaceFieldd random_faces(const GridSpec& g, std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return FaceFieldd::sample(g, [&](double, double) { return u(rng); }, [&](double, double) { return u(rng); });
}

CellFieldd random_positive(const GridSpec& g, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  return CellFieldd::sample(g, [&](double, double) { return u(rng); });
}

void property_m_matrix() {
  std::mt19937 rng(101);
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> scale(0.01, 20.0), step(1e-4, 1.0);
  int bad_sign = 0, bad_inverse = 0;
  double min_inverse = INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    const GridSpec g(size(rng), size(rng), 0.0, 0.0, 1.0, 1.0);
    const Eigen::MatrixXd l(assemble_np_matrix(random_faces(g, rng, scale(rng)), 1.0, step(rng), Scheme::euler));
    for (Eigen::Index r = 0; r < l.rows(); ++r)
      for (Eigen::Index c = 0; c < l.cols(); ++c)
        if (r == c ? !(l(r, c) > 0.0) : l(r, c) > 0.0) ++bad_sign;
    const double m = l.fullPivLu().inverse().minCoeff();
    min_inverse = std::min(min_inverse, m);
    if (m < 0.0) ++bad_inverse;
  }
  verdict("properties (a) M-matrix inverse positivity", bad_sign == 0 && bad_inverse == 0,
          "100 trials on grids up to 8x8; sign-pattern violations " + std::to_string(bad_sign) +
              ", negative inverses " + std::to_string(bad_inverse) + ", smallest inverse entry " +
              fmt("%.3e", min_inverse));
}

void property_max_norm() {
  std::mt19937 rng(103);
  std::uniform_int_distribution<int> size(2, 12);
  std::uniform_real_distribution<double> scale(0.01, 5.0), step(1e-3, 1.0);
  int violations = 0;
  double worst = 0.0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const GridSpec g(size(rng), size(rng), 0.0, 0.0, 1.0, 1.0);
    const CellFieldd c = random_positive(g, rng);
    const NpStep s = euler_np_step(c, random_faces(g, rng, scale(rng)), 1.0, step(rng), std::nullopt);
    const double growth = s.c.max() / c.max() - 1.0;
    if (growth > 1e-14) ++violations;
    worst = std::max(worst, growth);
  }
  verdict("properties (b) max-norm non-expansion", violations == 0,
          std::to_string(violations) + " of " + std::to_string(trials) +
              " random positive steps raised the maximum (largest relative growth " + fmt("%.3e", worst) + ")");
}

void property_gauss() {
  std::mt19937 rng(107);
  const SweepOrder orders[] = {SweepOrder::LL_to_UR, SweepOrder::UL_to_LR, SweepOrder::LR_to_UL, SweepOrder::UR_to_LL};
  double worst = 0.0;
  int runs = 0;
  for (const auto& g : {GridSpec::square(32), GridSpec(7, 11, -1.0, -1.0, 2.0, 3.0), GridSpec(2, 2, 0, 0, 1, 1)}) {
    for (SweepOrder o : orders) {
      for (int trial = 0; trial < 10; ++trial) {
        std::vector<CellFieldd> c{random_positive(g, rng), random_positive(g, rng)};
        CellFieldd rho_f = c[1] - c[0];
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        CellFieldd w = CellFieldd::sample(g, [&](double, double) { return u(rng); });
        w.values() -= w.sum() / static_cast<double>(g.cells());
        rho_f = rho_f + w;
        const double kappa = trial % 2 ? 0.05 : 1.0;
        const GaussCorrection out = gauss_correct(random_faces(g, rng, 1.0), c, {1.0, -1.0}, rho_f, kappa, o);
        worst = std::max(worst, gauss_residual(out.d, c, {1.0, -1.0}, rho_f, kappa));
        ++runs;
      }
    }
  }
  verdict("properties (c) Gauss sweep exactness", worst <= kPropertyResidual,
          std::to_string(runs) + " corrections over all four sweep orders; max residual " + fmt("%.2e", worst));
}

void property_faraday() {
  std::mt19937 rng(109);
  double worst_curl = 0.0, worst_repeat = 0.0;
  for (const auto& g : {GridSpec::square(32), GridSpec(9, 5, 0.0, 0.0, 1.8, 1.0)}) {
    std::uniform_real_distribution<double> u(0.5, 3.0);
    const FaceFieldd eps = FaceFieldd::sample(g, [&](double, double) { return u(rng); }, [&](double, double) { return u(rng); });
    for (int trial = 0; trial < 20; ++trial) {
      const PotentialReconstruction r = faraday_correct(random_faces(g, rng, 1.0), eps);
      worst_curl = std::max(worst_curl, faraday_residual(r.d_tilde, eps));
      const PotentialReconstruction again = faraday_correct(r.d_tilde, eps);
      worst_repeat = std::max({worst_repeat, (again.d_tilde.xs() - r.d_tilde.xs()).abs().maxCoeff(),
                               (again.d_tilde.ys() - r.d_tilde.ys()).abs().maxCoeff()});
    }
  }
  verdict("properties (d) Faraday curl exactness and idempotence",
          worst_curl <= kPropertyResidual && worst_repeat <= kPropertyResidual,
          "40 random fields; max curl " + fmt("%.2e", worst_curl) + ", max change on reapplication " +
              fmt("%.2e", worst_repeat));
}

void property_adjoint() {
  std::mt19937 rng(113);
  std::uniform_int_distribution<int> size(2, 20);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const GridSpec g(size(rng), size(rng), 0.0, 0.0, 1.0 + u(rng) * 0.5, 2.0 + u(rng));
    const CellFieldd phi = CellFieldd::sample(g, [&](double, double) { return u(rng); });
    const FaceFieldd f = random_faces(g, rng, 1.0);
    const double a = inner(gradient(phi), f), b = -inner(phi, divergence(f));
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
  }
  verdict("properties (e) summation by parts", worst <= kPropertyResidual,
          "100 random grids; max relative mismatch of <grad phi, f> + <phi, div f> " + fmt("%.2e", worst));
}

long double bernoulli_reference(long double z) { return z / std::expm1(z); }

// The identity is checked to a few ulps of the operands: B(-z) and B(z) are
// O(1) for small |z|, so their difference cannot be more accurate than that.
void property_bernoulli() {
  bool ok = bernoulli(0.0) == 1.0;
  double worst_identity = 0.0, worst_value = 0.0;
  constexpr double ulp = std::numeric_limits<double>::epsilon();
  for (int k = -12; k <= 2; ++k) {
    for (double m : {1.0, 3.0}) {
      for (double sign : {1.0, -1.0}) {
        const double z = sign * m * std::pow(10.0, k);
        const double bp = bernoulli(z), bm = bernoulli(-z);
        ok = ok && bp > 0.0;
        worst_identity = std::max(worst_identity, std::abs(bm - bp - z) / (ulp * std::max(bp, bm)));
        const long double ref = bernoulli_reference(z);
        worst_value = std::max(worst_value, static_cast<double>(std::abs((bp - ref) / ref)));
      }
    }
  }
  ok = ok && worst_identity <= 4.0 && worst_value <= 1e-14;
  verdict("properties (f) Bernoulli identities", ok,
          "B(0) = " + fmt("%g", bernoulli(0.0)) + "; |z| in [1e-12, 300]: max |B(-z) - B(z) - z| " +
              fmt("%.2f", worst_identity) + " ulp of max(B(z), B(-z)), max relative error of B " +
              fmt("%.2e", worst_value));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();

  {
    RunConfig base = example_config(1);
    base.t_final = 1.0;
    base.scheme = Scheme::euler;
    refresh_source(base);
    const ConvergenceResult euler = convergence_study(base, kEulerH, DtRule::h_squared);
    const ConvergenceCheck c = check_convergence(
        euler, kEulerErrors, [](std::size_t, double o) { return o >= kEulerOrderMin && o <= kEulerOrderMax; });
    verdict("convergence, first-order scheme", c.ok, c.detail);

    base.scheme = Scheme::bdf2;
    refresh_source(base);
    const ConvergenceResult bdf2 = convergence_study(base, kBdf2H, DtRule::h_over_500);
    const ConvergenceCheck b = check_convergence(bdf2, kBdf2Errors, [](std::size_t f, double o) {
      return f == 0 ? o >= kBdf2OrderMin : o >= kBdf2OrderMin && o <= kBdf2OrderMax;
    });
    verdict("convergence, second-order scheme", b.ok, b.detail);

    bool ok = true;
    const std::string e = min_report(euler.running_min, ok);
    const std::string s = min_report(bdf2.running_min, ok);
    verdict("minimum concentration", ok,
            "expected " + sig4(kMinConcentration) + "; first-order " + e + "; second-order " + s);
  }

  {
    const RunSummary s = run(example_config(2));
    report_structure("structure preservation, example 2", s, kFaradayExample2, "", true);
  }

  {
    const RunConfig cfg = example_config(3);
    const RunSummary s = run(cfg);
    const auto [c1_lower, c1_upper] = half_ring_means(s.final_state->c[0]);
    const auto [c2_lower, c2_upper] = half_ring_means(s.final_state->c[1]);
    const bool placed = c1_lower > c1_upper && c2_upper > c2_lower;
    report_structure("structure preservation, example 3", s, kFaradayExample3,
                     "; mu reference " + to_string(cfg.problem.mu_reference) + "; ring means c1 lower/upper " +
                         fmt("%.4g", c1_lower) + "/" + fmt("%.4g", c1_upper) + ", c2 lower/upper " +
                         fmt("%.4g", c2_lower) + "/" + fmt("%.4g", c2_upper),
                     placed);
  }

  property_m_matrix();
  property_max_norm();
  property_gauss();
  property_faraday();
  property_adjoint();
  property_bernoulli();

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d criteria failed, %.0f s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
