#include "manp/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace manp {
namespace {

using std::numbers::pi;

std::string at(double x, double y) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << x << ", " << y << ")";
  return os.str();
}

void require_positive_faces(const FaceFieldd& eps, const char* what) {
  const GridSpec& g = eps.grid();
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      if (!(eps.xs()(i, j) > 0.0) || !std::isfinite(eps.xs()(i, j))) {
        throw ValidationError(std::string(what) + " must be positive and finite; x-face at " +
                              at(g.x_face(i), g.y(j)) + " has " + std::to_string(eps.xs()(i, j)));
      }
      if (!(eps.ys()(i, j) > 0.0) || !std::isfinite(eps.ys()(i, j))) {
        throw ValidationError(std::string(what) + " must be positive and finite; y-face at " +
                              at(g.x(i), g.y_face(j)) + " has " + std::to_string(eps.ys()(i, j)));
      }
    }
  }
}

void require_positive_cells(const CellFieldd& c, const std::string& what) {
  const GridSpec& g = c.grid();
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      const double v = c.values()(i, j);
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(what + " must be positive and finite; node " + at(g.x(i), g.y(j)) + " has " +
                              std::to_string(v));
      }
    }
  }
}

void require_finite_cells(const CellFieldd& c, const std::string& what) {
  if (!c.values().allFinite()) throw ValidationError(what + " has non-finite samples");
}

FaceFieldd sample_vector(const GridSpec& g, const VectorSpaceTimeFn& f, double t) {
  return FaceFieldd::sample(
      g, [&](double x, double y) { return f.x(x, y, t); }, [&](double x, double y) { return f.y(x, y, t); });
}

FaceFieldd displacement_from_potential(const CellFieldd& phi, const FaceFieldd& eps) {
  FaceFieldd grad = gradient(phi);
  return FaceFieldd(phi.grid(), -eps.xs() * grad.xs(), -eps.ys() * grad.ys());
}

}  // namespace

std::string to_string(MuReference r) {
  switch (r) {
    case MuReference::initial: return "initial";
    case MuReference::previous_step: return "previous_step";
    case MuReference::solvent: return "solvent";
  }
  return "?";
}

MuReference parse_mu_reference(const std::string& s) {
  if (s == "initial") return MuReference::initial;
  if (s == "previous_step") return MuReference::previous_step;
  if (s == "solvent") return MuReference::solvent;
  throw ValidationError("mu_reference must be initial, previous_step or solvent, got '" + s + "'");
}

DiscreteProblem::DiscreteProblem(ProblemSpec spec, GridSpec grid, FaceFieldd eps_face, CellFieldd rho_f,
                                 std::vector<CellFieldd> c0, FaceFieldd d0)
    : spec_(std::move(spec)),
      grid_(grid),
      eps_face_(std::move(eps_face)),
      rho_f_(std::move(rho_f)),
      c0_(std::move(c0)),
      d0_(std::move(d0)) {
  for (const auto& s : spec_.species) valences_.push_back(s.valence);
}

const GroundedFactorization& DiscreteProblem::poisson_factor() const {
  if (!poisson_factor_) poisson_factor_ = std::make_shared<const GroundedFactorization>(poisson_matrix(eps_face_));
  return *poisson_factor_;
}

bool DiscreteProblem::has_chemical_potential() const {
  for (const auto& s : spec_.species)
    if (s.chemical_potential || s.solvation) return true;
  return false;
}

bool DiscreteProblem::chemical_potential_static() const {
  for (const auto& s : spec_.species) {
    if (s.chemical_potential) return false;
    if (s.solvation && spec_.mu_reference != MuReference::initial) return false;
  }
  return true;
}

FaceFieldd DiscreteProblem::theta(double t) const {
  return spec_.theta ? sample_vector(grid_, *spec_.theta, t) : FaceFieldd(grid_);
}

FaceFieldd DiscreteProblem::ma_source(double t) const {
  return spec_.ma_source ? sample_vector(grid_, *spec_.ma_source, t) : FaceFieldd(grid_);
}

std::optional<CellFieldd> DiscreteProblem::np_source(std::size_t l, double t) const {
  const auto& src = spec_.species.at(l).np_source;
  if (!src) return std::nullopt;
  return CellFieldd::sample(grid_, [&](double x, double y) { return (*src)(x, y, t); });
}

std::vector<CellFieldd> DiscreteProblem::chemical_potentials(double t, const std::vector<CellFieldd>& c) const {
  if (c.size() != species_count()) throw ValidationError("chemical_potentials: wrong number of species");

  std::optional<CellFieldd> solvent;
  auto solvent_field = [&]() -> const CellFieldd& {
    if (!solvent) {
      CellFieldd occupied(grid_);
      double v0 = 0.0;
      for (std::size_t l = 0; l < species_count(); ++l) {
        if (const auto& sv = spec_.species[l].solvation) {
          occupied.values() += sv->ion_volume * c[l].values();
          v0 = sv->solvent_volume;
        }
      }
      solvent = CellFieldd(grid_, (1.0 - occupied.values()) / v0);
    }
    return *solvent;
  };

  std::vector<CellFieldd> mu;
  mu.reserve(species_count());
  for (std::size_t l = 0; l < species_count(); ++l) {
    const SpeciesSpec& s = spec_.species[l];
    if (s.chemical_potential) {
      mu.push_back(CellFieldd::sample(grid_, [&](double x, double y) { return (*s.chemical_potential)(x, y, t); }));
    } else if (s.solvation) {
      const CellFieldd& ref = spec_.mu_reference == MuReference::initial         ? c0_[l]
                              : spec_.mu_reference == MuReference::previous_step ? c[l]
                                                                                 : solvent_field();
      if (!(ref.min() > 0.0)) {
        throw ConsistencyError("solvation potential of species " + s.name +
                               ": reference concentration is not positive");
      }
      const double ratio = s.solvation->ion_volume / s.solvation->solvent_volume;
      mu.emplace_back(grid_, -ratio * (s.solvation->solvent_volume * ref.values()).log());
    } else {
      mu.emplace_back(grid_);
    }
  }
  return mu;
}

CellFieldd charge_density(const std::vector<CellFieldd>& c, const std::vector<double>& valences,
                          const CellFieldd& rho_f) {
  if (c.size() != valences.size()) throw ValidationError("charge_density: species/valence count mismatch");
  CellFieldd rho = rho_f;
  for (std::size_t l = 0; l < c.size(); ++l) {
    detail::require_same_grid(c[l].grid(), rho_f.grid(), "charge_density");
    rho.values() += valences[l] * c[l].values();
  }
  return rho;
}

SparseMatrix poisson_matrix(const FaceFieldd& eps) {
  const GridSpec& g = eps.grid();
  const double rdx2 = 1.0 / (g.dx() * g.dx());
  const double rdy2 = 1.0 / (g.dy() * g.dy());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(5 * g.cells()));
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      const Index k = g.linear(i, j);
      const double e = eps.x(i, j) * rdx2;
      const double w = eps.x(i - 1, j) * rdx2;
      const double n = eps.y(i, j) * rdy2;
      const double s = eps.y(i, j - 1) * rdy2;
      t.emplace_back(k, k, e + w + n + s);
      t.emplace_back(k, g.linear(i + 1, j), -e);
      t.emplace_back(k, g.linear(i - 1, j), -w);
      t.emplace_back(k, g.linear(i, j + 1), -n);
      t.emplace_back(k, g.linear(i, j - 1), -s);
    }
  }
  SparseMatrix a(g.cells(), g.cells());
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

CellFieldd poisson_solve(const CellFieldd& rho, const FaceFieldd& eps_face) {
  detail::require_same_grid(rho.grid(), eps_face.grid(), "poisson_solve");
  require_positive_faces(eps_face, "permittivity");
  const GroundedFactorization f(poisson_matrix(eps_face));
  return CellFieldd::from_vector(rho.grid(), f.solve(rho.as_vector()));
}

DiscreteProblem materialize(const ProblemSpec& spec, const GridSpec& g) {
  if (!(spec.kappa > 0.0) || !std::isfinite(spec.kappa)) throw ValidationError("kappa must be positive");
  if (spec.species.empty()) throw ValidationError("problem needs at least one species");
  if (!spec.permittivity) throw ValidationError("permittivity is not set");

  const FaceFieldd eps = FaceFieldd::sample(g, spec.permittivity, spec.permittivity);
  require_positive_faces(eps, "permittivity");

  const CellFieldd rho_f = spec.fixed_charge ? CellFieldd::sample(g, spec.fixed_charge) : CellFieldd(g);
  require_finite_cells(rho_f, "fixed charge");

  std::vector<CellFieldd> c0;
  for (const SpeciesSpec& s : spec.species) {
    if (!std::isfinite(s.valence)) throw ValidationError("species " + s.name + ": valence must be finite");
    if (!s.initial_concentration) throw ValidationError("species " + s.name + ": no initial concentration");
    if (s.chemical_potential && s.solvation) {
      throw ValidationError("species " + s.name + ": give either a chemical potential or a solvation model");
    }
    if (s.solvation && (!(s.solvation->ion_volume > 0.0) || !(s.solvation->solvent_volume > 0.0))) {
      throw ValidationError("species " + s.name + ": solvation volumes must be positive");
    }
    c0.push_back(CellFieldd::sample(g, s.initial_concentration));
    require_positive_cells(c0.back(), "initial concentration of species " + s.name);
  }

  if (spec.theta) {
    const FaceFieldd th = sample_vector(g, *spec.theta, 0.0);
    const double div = norm_inf(divergence(th));
    if (div > 1e-10 * th.max_abs()) {
      std::ostringstream os;
      os << "theta is not discretely divergence free: max |div| = " << div << ", max |theta| = " << th.max_abs();
      throw ValidationError(os.str());
    }
  }

  FaceFieldd d0(g);
  if (const auto* explicit_d = std::get_if<VectorSpaceTimeFn>(&spec.initial_displacement)) {
    d0 = sample_vector(g, *explicit_d, 0.0);
  } else {
    std::vector<double> q;
    for (const auto& s : spec.species) q.push_back(s.valence);
    CellFieldd rhs = charge_density(c0, q, rho_f);
    rhs *= 1.0 / (2.0 * spec.kappa * spec.kappa);
    d0 = displacement_from_potential(poisson_solve(rhs, eps), eps);
  }
  if (!d0.xs().allFinite() || !d0.ys().allFinite()) throw ValidationError("initial displacement is not finite");

  return DiscreteProblem(spec, g, eps, rho_f, std::move(c0), std::move(d0));
}

ProblemSpec builtin_example(int id) {
  ProblemSpec p;
  p.domain = Domain{};
  switch (id) {
    case 1: {
      constexpr double eps = 0.5;
      p.name = "example1";
      p.kappa = 1.0;
      const double kappa = p.kappa;
      p.permittivity = [](double, double) { return eps; };
      p.fixed_charge = [](double, double) { return 0.0; };
      p.gauss_correction = false;
      p.faraday_correction = false;

      auto conc = [](double x, double y, double t) {
        return pi * pi / 5.0 * std::exp(-t) * std::cos(pi * x) * std::cos(pi * y) + 2.0;
      };
      auto dx_exact = [](double x, double y, double t) {
        return pi / 2.0 * std::exp(-t) * std::sin(pi * x) * std::cos(pi * y);
      };
      auto dy_exact = [](double x, double y, double t) {
        return pi / 2.0 * std::exp(-t) * std::cos(pi * x) * std::sin(pi * y);
      };
      auto cross = [](double x, double y, double t) {
        const double cx = std::cos(pi * x), cy = std::cos(pi * y);
        return std::exp(-2.0 * t) * (std::cos(2.0 * pi * x) * cy * cy + std::cos(2.0 * pi * y) * cx * cx);
      };
      auto mode = [](double x, double y, double t) { return std::exp(-t) * std::cos(pi * x) * std::cos(pi * y); };
      const double p2 = pi * pi, p4 = p2 * p2;

      SpeciesSpec cation;
      cation.name = "c1";
      cation.valence = 1.0;
      cation.initial_concentration = [conc](double x, double y) { return conc(x, y, 0.0); };
      cation.exact = conc;
      cation.np_source = [=](double x, double y, double t) {
        return kappa * (2.0 * p4 + 19.0 * p2) / 5.0 * mode(x, y, t) + kappa * p4 / 5.0 * cross(x, y, t);
      };
      SpeciesSpec anion = cation;
      anion.name = "c2";
      anion.valence = -1.0;
      anion.np_source = [=](double x, double y, double t) {
        return kappa * (2.0 * p4 - 21.0 * p2) / 5.0 * mode(x, y, t) - kappa * p4 / 5.0 * cross(x, y, t);
      };
      p.species = {cation, anion};

      // Ampere source making the closed-form pair exact: dD/dt plus the drift
      // term sum_l (q^l)^2 c D / (2 kappa eps); the diffusion terms cancel
      // because both species share one concentration.
      const double drift = (1.0 + 1.0) / (2.0 * kappa * eps);
      p.ma_source = VectorSpaceTimeFn{
          [=](double x, double y, double t) { return -dx_exact(x, y, t) + drift * conc(x, y, t) * dx_exact(x, y, t); },
          [=](double x, double y, double t) { return -dy_exact(x, y, t) + drift * conc(x, y, t) * dy_exact(x, y, t); }};
      p.exact_displacement = VectorSpaceTimeFn{dx_exact, dy_exact};
      p.initial_displacement = *p.exact_displacement;
      return p;
    }
    case 2: {
      p.name = "example2";
      p.kappa = 1e-4;
      p.permittivity = [](double, double) { return 2.0; };
      p.fixed_charge = [](double x, double y) {
        auto bump = [&](double cx, double cy) {
          return 5.0 * std::exp(-100.0 * ((x - cx) * (x - cx) + (y - cy) * (y - cy)));
        };
        return bump(-0.5, -0.5) - bump(-0.5, 0.5) - bump(0.5, -0.5) + bump(0.5, 0.5);
      };
      for (double q : {1.0, -1.0}) {
        SpeciesSpec s;
        s.name = q > 0 ? "c1" : "c2";
        s.valence = q;
        s.initial_concentration = [](double, double) { return 0.1; };
        p.species.push_back(s);
      }
      p.initial_displacement = PoissonInit{};
      return p;
    }
    case 3: {
      p.name = "example3";
      p.kappa = 0.2;
      p.permittivity = [](double, double) { return 1.0; };
      p.fixed_charge = [](double x, double y) {
        // Lattice points on the ring edges must land on the same side in both
        // halves, otherwise the sampled charge is not neutral.
        const double r2 = x * x + y * y;
        if (r2 < 0.24 - 1e-12 || r2 > 0.26 + 1e-12) return 0.0;
        double theta = std::atan2(y, x);
        if (theta <= 0.0) theta += 2.0 * pi;
        return theta <= pi ? 10.0 : -10.0;
      };
      const double solvent = std::pow(0.275, 3);
      const double volumes[] = {std::pow(0.716, 3), std::pow(0.676, 3)};
      for (int l = 0; l < 2; ++l) {
        SpeciesSpec s;
        s.name = l == 0 ? "c1" : "c2";
        s.valence = l == 0 ? 1.0 : -1.0;
        s.initial_concentration = [](double, double) { return 0.1; };
        s.solvation = Solvation{volumes[l], solvent};
        p.species.push_back(s);
      }
      p.initial_displacement = PoissonInit{};
      return p;
    }
    default:
      throw ValidationError("unknown example id " + std::to_string(id) + " (expected 1, 2 or 3)");
  }
}

}  // namespace manp
