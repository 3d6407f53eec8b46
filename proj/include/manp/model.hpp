#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "manp/grid.hpp"
#include "manp/linsolve.hpp"

namespace manp {

using SpatialFn = std::function<double(double x, double y)>;
using SpaceTimeFn = std::function<double(double x, double y, double t)>;

struct VectorSpaceTimeFn {
  SpaceTimeFn x;
  SpaceTimeFn y;
};

/// Solvation chemical potential -(v_ion / v_solvent) * log(v_solvent * c_ref),
/// where the reference concentration c_ref is chosen by MuReference.
struct Solvation {
  double ion_volume = 0.0;
  double solvent_volume = 0.0;
};

/// How the reference concentration of a solvation potential is taken.
///   initial       - frozen at the species' initial concentration
///   previous_step - the species' own concentration at the latest time level
///   solvent       - the local solvent concentration (1 - sum v c) / v_solvent
///                   at the latest time level
enum class MuReference { initial, previous_step, solvent };

std::string to_string(MuReference r);
MuReference parse_mu_reference(const std::string& s);

struct SpeciesSpec {
  std::string name;
  double valence = 0.0;
  SpatialFn initial_concentration;
  std::optional<SpaceTimeFn> np_source;
  /// Prescribed excess chemical potential. Mutually exclusive with solvation.
  std::optional<SpaceTimeFn> chemical_potential;
  std::optional<Solvation> solvation;
  std::optional<SpaceTimeFn> exact;
};

/// Tag requesting d0 = -eps grad(phi0) with 2 kappa^2 div d0 equal to the
/// initial charge density.
struct PoissonInit {};

struct Domain {
  double x0 = -1.0;
  double y0 = -1.0;
  double lx = 2.0;
  double ly = 2.0;
};

struct ProblemSpec {
  std::string name;
  double kappa = 1.0;
  SpatialFn permittivity;
  SpatialFn fixed_charge;
  std::optional<VectorSpaceTimeFn> theta;
  std::optional<VectorSpaceTimeFn> ma_source;
  std::vector<SpeciesSpec> species;
  std::variant<VectorSpaceTimeFn, PoissonInit> initial_displacement;
  std::optional<VectorSpaceTimeFn> exact_displacement;
  Domain domain;
  bool gauss_correction = true;
  bool faraday_correction = true;
  MuReference mu_reference = MuReference::previous_step;
};

/// A ProblemSpec sampled onto a grid, plus evaluators for the time-dependent
/// data.
class DiscreteProblem {
 public:
  DiscreteProblem(ProblemSpec spec, GridSpec grid, FaceFieldd eps_face, CellFieldd rho_f,
                  std::vector<CellFieldd> c0, FaceFieldd d0);

  const ProblemSpec& spec() const { return spec_; }
  const GridSpec& grid() const { return grid_; }
  double kappa() const { return spec_.kappa; }
  std::size_t species_count() const { return spec_.species.size(); }
  const std::vector<double>& valences() const { return valences_; }
  const FaceFieldd& eps_face() const { return eps_face_; }
  const CellFieldd& rho_f() const { return rho_f_; }
  const std::vector<CellFieldd>& c0() const { return c0_; }
  const FaceFieldd& d0() const { return d0_; }

  bool has_theta() const { return spec_.theta.has_value(); }
  bool has_ma_source() const { return spec_.ma_source.has_value(); }
  bool has_chemical_potential() const;
  /// True when the chemical potentials do not change with time or state.
  bool chemical_potential_static() const;

  FaceFieldd theta(double t) const;
  FaceFieldd ma_source(double t) const;
  std::optional<CellFieldd> np_source(std::size_t species, double t) const;

  /// Chemical potential of every species at time t given the latest
  /// concentrations (used only by state-dependent references).
  std::vector<CellFieldd> chemical_potentials(double t, const std::vector<CellFieldd>& c) const;

  /// Factorization of poisson_matrix(eps_face()), built on first use.
  const GroundedFactorization& poisson_factor() const;

 private:
  ProblemSpec spec_;
  GridSpec grid_;
  FaceFieldd eps_face_;
  CellFieldd rho_f_;
  std::vector<CellFieldd> c0_;
  FaceFieldd d0_;
  std::vector<double> valences_;
  mutable std::shared_ptr<const GroundedFactorization> poisson_factor_;
};

/// Sum over species of q^l c^l plus the fixed charge, at cells.
CellFieldd charge_density(const std::vector<CellFieldd>& c, const std::vector<double>& valences,
                          const CellFieldd& rho_f);

/// Sparse matrix of phi -> -div(eps grad phi) on the periodic grid.
SparseMatrix poisson_matrix(const FaceFieldd& eps_face);

/// Zero-mean phi with -div(eps grad phi) = rho - mean(rho), by a direct
/// factorization. Throws ValidationError when |mean(rho)| > 1e-10 ||rho||_inf.
CellFieldd poisson_solve(const CellFieldd& rho, const FaceFieldd& eps_face);

/// Samples every coefficient, validates it and builds the initial state.
DiscreteProblem materialize(const ProblemSpec& spec, const GridSpec& grid);

/// The three reference problems on [-1, 1]^2:
///   1 - manufactured smooth solution with known sources
///   2 - quadrupole of Gaussian fixed charges, uniform ions
///   3 - split annular fixed charge with solvation chemical potential
ProblemSpec builtin_example(int id);

}  // namespace manp
