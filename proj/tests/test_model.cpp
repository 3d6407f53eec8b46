#include <doctest.h>

#include <cmath>
#include <numbers>

#include "manp/diagnostics.hpp"
#include "manp/model.hpp"

using namespace manp;

namespace {

constexpr double kPi = std::numbers::pi;

ProblemSpec uniform_problem() {
  ProblemSpec p;
  p.kappa = 0.5;
  p.permittivity = [](double, double) { return 1.0; };
  p.fixed_charge = [](double, double) { return 0.0; };
  for (double q : {1.0, -1.0}) {
    SpeciesSpec s;
    s.name = q > 0 ? "a" : "b";
    s.valence = q;
    s.initial_concentration = [](double, double) { return 0.1; };
    p.species.push_back(s);
  }
  p.initial_displacement = PoissonInit{};
  return p;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("manufactured solution satisfies the continuous equations") {
  // Centred differences of the closed forms; the sources must close both the
  // transport and the displacement equations.
  const ProblemSpec p = builtin_example(1);
  const auto& c = *p.species[0].exact;
  const auto& dx = p.exact_displacement->x;
  const auto& dy = p.exact_displacement->y;
  const double eps = 0.5, kappa = p.kappa, h = 1e-4;
  for (double x : {-0.7, 0.1, 0.45}) {
    for (double y : {-0.3, 0.2, 0.9}) {
      for (double t : {0.0, 0.6}) {
        const double ct = (c(x, y, t + h) - c(x, y, t - h)) / (2 * h);
        const double lap = (c(x + h, y, t) + c(x - h, y, t) + c(x, y + h, t) + c(x, y - h, t) - 4 * c(x, y, t)) / (h * h);
        const double div_cd = (c(x + h, y, t) * dx(x + h, y, t) - c(x - h, y, t) * dx(x - h, y, t) +
                               c(x, y + h, t) * dy(x, y + h, t) - c(x, y - h, t) * dy(x, y - h, t)) /
                              (2 * h * eps);
        for (std::size_t l = 0; l < 2; ++l) {
          const double q = p.species[l].valence;
          // dc/dt = kappa (lap c - q div(c D / eps)) + g
          const double g = (*p.species[l].np_source)(x, y, t);
          CHECK(ct - kappa * (lap - q * div_cd) - g == doctest::Approx(0.0).epsilon(1e-5).scale(1.0));
        }
        // dD/dt = -sum_l q J / (2 kappa^2) + S with J^l = -kappa (grad c - q c D / eps).
        const double dxt = (dx(x, y, t + h) - dx(x, y, t - h)) / (2 * h);
        const double cx = (c(x + h, y, t) - c(x - h, y, t)) / (2 * h);
        double sum_qj = 0.0;
        for (double q : {1.0, -1.0}) sum_qj += q * -kappa * (cx - q * c(x, y, t) * dx(x, y, t) / eps);
        CHECK(dxt + sum_qj / (2 * kappa * kappa) - p.ma_source->x(x, y, t) == doctest::Approx(0.0).scale(1.0));
      }
    }
  }
}

TEST_CASE("manufactured displacement is curl free and matches the charge") {
  const ProblemSpec p = builtin_example(1);
  const double x = 0.3, y = -0.4, t = 0.2;
  const double expected = p.species[0].exact.value()(x, y, t);
  CHECK(expected == doctest::Approx(kPi * kPi / 5.0 * std::exp(-t) * std::cos(kPi * x) * std::cos(kPi * y) + 2.0));
  CHECK(p.exact_displacement->x(x, y, t) ==
        doctest::Approx(kPi / 2.0 * std::exp(-t) * std::sin(kPi * x) * std::cos(kPi * y)));
  CHECK_FALSE(p.gauss_correction);
  CHECK_FALSE(p.faraday_correction);
}

TEST_CASE("reference problem data") {
  const ProblemSpec p2 = builtin_example(2);
  CHECK(p2.kappa == 1e-4);
  CHECK(p2.fixed_charge(-0.5, -0.5) == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(p2.fixed_charge(0.5, -0.5) == doctest::Approx(-5.0).epsilon(1e-10));
  CHECK(std::abs(p2.fixed_charge(0.0, 0.0)) < 1e-20);

  const ProblemSpec p3 = builtin_example(3);
  CHECK(p3.kappa == 0.2);
  CHECK(p3.species[0].solvation->ion_volume == doctest::Approx(0.716 * 0.716 * 0.716));
  CHECK(p3.species[1].solvation->ion_volume == doctest::Approx(0.676 * 0.676 * 0.676));
  CHECK(p3.species[0].solvation->solvent_volume == doctest::Approx(0.275 * 0.275 * 0.275));
  CHECK(p3.fixed_charge(0.0, 0.5) == 10.0);
  CHECK(p3.fixed_charge(0.0, -0.5) == -10.0);
  CHECK(p3.fixed_charge(0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(builtin_example(4), ValidationError);
}

TEST_CASE("sampled annular charge is neutral") {
  for (Index n : {40, 50, 64, 100, 128}) {
    const DiscreteProblem d = materialize(builtin_example(3), GridSpec::square(n));
    CHECK(d.rho_f().max() == 10.0);
    CHECK(std::abs(d.rho_f().sum()) < 1e-9);
  }
}

TEST_CASE("uniform neutral data gives a vanishing initial displacement") {
  const DiscreteProblem d = materialize(uniform_problem(), GridSpec::square(8));
  CHECK(d.d0().max_abs() < 1e-14);
  CHECK(d.c0()[0].min() == 0.1);
}

TEST_CASE("Poisson initial displacement balances the initial charge") {
  const DiscreteProblem d = materialize(builtin_example(2), GridSpec::square(50));
  const double res = gauss_residual(d.d0(), d.c0(), d.valences(), d.rho_f(), d.kappa());
  CHECK(res < 1e-10);
  CHECK(faraday_residual(d.d0(), d.eps_face()) < 1e-6 * d.d0().max_abs());
}

TEST_CASE("Poisson solve") {
  const GridSpec g = GridSpec::square(16);
  const FaceFieldd eps(g, 2.0, 2.0);
  const CellFieldd phi_exact = CellFieldd::sample(g, [](double x, double y) { return std::sin(kPi * x) * std::cos(kPi * y); });
  FaceFieldd flux = gradient(phi_exact);
  flux.xs() *= 2.0;
  flux.ys() *= 2.0;
  CellFieldd rho = divergence(flux);
  rho.values() *= -1.0;
  const CellFieldd phi = poisson_solve(rho, eps);
  CHECK(norm_inf(CellFieldd(phi - phi_exact)) < 1e-9);
  CHECK_THROWS_AS(poisson_solve(CellFieldd(g, 1.0), eps), ValidationError);
}

TEST_CASE("validation names the offending data") {
  ProblemSpec bad_eps = uniform_problem();
  bad_eps.permittivity = [](double x, double) { return x > 0.5 ? -1.0 : 1.0; };
  CHECK_THROWS_AS(materialize(bad_eps, GridSpec::square(8)), ValidationError);

  ProblemSpec bad_c = uniform_problem();
  bad_c.species[1].initial_concentration = [](double, double) { return 0.0; };
  try {
    materialize(bad_c, GridSpec::square(8));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }

  ProblemSpec charged = uniform_problem();
  charged.fixed_charge = [](double, double) { return 1.0; };
  CHECK_THROWS_AS(materialize(charged, GridSpec::square(8)), ValidationError);

  ProblemSpec both = uniform_problem();
  both.species[0].chemical_potential = [](double, double, double) { return 0.0; };
  both.species[0].solvation = Solvation{1.0, 1.0};
  CHECK_THROWS_AS(materialize(both, GridSpec::square(8)), ValidationError);

  ProblemSpec no_kappa = uniform_problem();
  no_kappa.kappa = 0.0;
  CHECK_THROWS_AS(materialize(no_kappa, GridSpec::square(8)), ValidationError);
}

TEST_CASE("solvation potential readings") {
  ProblemSpec p = builtin_example(3);
  const GridSpec g = GridSpec::square(20);
  const double v0 = std::pow(0.275, 3), v1 = std::pow(0.716, 3), v2 = std::pow(0.676, 3);
  std::vector<CellFieldd> c{CellFieldd(g, 0.2), CellFieldd(g, 0.3)};

  p.mu_reference = MuReference::initial;
  auto mu = materialize(p, g).chemical_potentials(0.0, c);
  CHECK(mu[0](3, 4) == doctest::Approx(-(v1 / v0) * std::log(v0 * 0.1)));

  p.mu_reference = MuReference::previous_step;
  mu = materialize(p, g).chemical_potentials(0.0, c);
  CHECK(mu[1](3, 4) == doctest::Approx(-(v2 / v0) * std::log(v0 * 0.3)));

  p.mu_reference = MuReference::solvent;
  mu = materialize(p, g).chemical_potentials(0.0, c);
  const double solvent = (1.0 - v1 * 0.2 - v2 * 0.3) / v0;
  CHECK(mu[0](3, 4) == doctest::Approx(-(v1 / v0) * std::log(v0 * solvent)));

  CHECK(parse_mu_reference("previous_step") == MuReference::previous_step);
  CHECK_THROWS_AS(parse_mu_reference("latest"), ValidationError);
}

TEST_CASE("charge density sums species and fixed charge") {
  const GridSpec g = GridSpec::square(4);
  const CellFieldd rho = charge_density({CellFieldd(g, 0.5), CellFieldd(g, 0.2)}, {1.0, -2.0}, CellFieldd(g, 1.0));
  CHECK(rho(2, 3) == doctest::Approx(0.5 - 0.4 + 1.0));
}

}
