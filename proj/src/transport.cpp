#include "manp/transport.hpp"

#include <cmath>
#include <sstream>

namespace manp {
namespace {

void require_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("time step must be positive and finite");
}

// The columns of the transport matrix sum to its diagonal coefficient, so the
// exact solution carries mass sum(rhs) / coefficient. An iterative solution
// misses this by up to sqrt(n) times its residual. A positive rescaling
// restores it without touching the sign of any entry; both sums are kept as
// unevaluated pairs so the target is not rounded to a single double, which
// would let the total charge random-walk over many steps.
void restore_mass(Vector& x, const Vector& target_rhs) {
  const auto [t_hi, t_lo] = compensated_sum_parts(target_rhs);
  const auto [c_hi, c_lo] = compensated_sum_parts(x);
  if (!(c_hi > 0.0) || !(t_hi > 0.0)) return;
  const double relative = ((t_hi - c_hi) + (t_lo - c_lo)) / c_hi;
  x += relative * x;
  // The rescale itself rounds every entry; the few ulps of mass this leaves
  // go into the largest entry, where they are far below its magnitude.
  const auto [s_hi, s_lo] = compensated_sum_parts(x);
  Eigen::Index k = 0;
  x.maxCoeff(&k);
  x[k] += (t_hi - s_hi) + (t_lo - s_lo);
}

NpStep finish(const CellFieldd& like, const FaceFieldd& dg, double kappa, Solution sol, const Vector& mass_rhs) {
  restore_mass(sol.x, mass_rhs);
  NpStep out{CellFieldd::from_vector(like.grid(), sol.x), FaceFieldd(like.grid()), sol.stats};
  out.flux = compute_flux(out.c, dg, kappa);
  return out;
}

}  // namespace

std::string to_string(Scheme s) { return s == Scheme::euler ? "euler" : "bdf2"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "euler") return Scheme::euler;
  if (s == "bdf2") return Scheme::bdf2;
  throw ValidationError("scheme must be euler or bdf2, got '" + s + "'");
}

double bernoulli(double z) {
  if (std::abs(z) < 1e-6) return 1.0 - z / 2.0 + z * z / 12.0;
  return z / std::expm1(z);
}

FaceFieldd compute_dg(const FaceFieldd& d, const CellFieldd& mu, double q, const FaceFieldd& eps) {
  detail::require_same_grid(d.grid(), eps.grid(), "compute_dg");
  detail::require_same_grid(d.grid(), mu.grid(), "compute_dg");
  const GridSpec& g = d.grid();
  FaceFieldd dg(g);
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      dg.xs()(i, j) = -g.dx() * q * d.xs()(i, j) / eps.xs()(i, j) + mu(i + 1, j) - mu(i, j);
      dg.ys()(i, j) = -g.dy() * q * d.ys()(i, j) / eps.ys()(i, j) + mu(i, j + 1) - mu(i, j);
    }
  }
  return dg;
}

std::vector<FaceFieldd> compute_dg(const FaceFieldd& d, const std::vector<CellFieldd>& mu,
                                   const std::vector<double>& valences, const FaceFieldd& eps) {
  if (mu.size() != valences.size()) throw ValidationError("compute_dg: species count mismatch");
  std::vector<FaceFieldd> out;
  out.reserve(mu.size());
  for (std::size_t l = 0; l < mu.size(); ++l) {
    out.push_back(compute_dg(d, mu[l], valences[l], eps));
    if (!out.back().xs().allFinite() || !out.back().ys().allFinite()) {
      throw ConsistencyError("potential increments of species " + std::to_string(l + 1) + " are not finite");
    }
  }
  return out;
}

FaceFieldd compute_flux(const CellFieldd& c, const FaceFieldd& dg, double kappa) {
  detail::require_same_grid(c.grid(), dg.grid(), "compute_flux");
  const GridSpec& g = c.grid();
  const double ax = kappa / g.dx();
  const double ay = kappa / g.dy();
  FaceFieldd flux(g);
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      const double zx = dg.xs()(i, j);
      const double zy = dg.ys()(i, j);
      flux.xs()(i, j) = -ax * (bernoulli(-zx) * c(i + 1, j) - bernoulli(zx) * c(i, j));
      flux.ys()(i, j) = -ay * (bernoulli(-zy) * c(i, j + 1) - bernoulli(zy) * c(i, j));
    }
  }
  return flux;
}

SparseMatrix assemble_np_matrix(const FaceFieldd& dg, double kappa, double dt, Scheme scheme) {
  require_dt(dt);
  const GridSpec& g = dg.grid();
  const double a = scheme == Scheme::euler ? 1.0 : 3.0;
  const double b = scheme == Scheme::euler ? 1.0 : 2.0;
  const double sx = b * dt * kappa / (g.dx() * g.dx());
  const double sy = b * dt * kappa / (g.dy() * g.dy());

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(5 * g.cells()));
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      const Index k = g.linear(i, j);
      const double e = dg.x(i, j), w = dg.x(i - 1, j);
      const double n = dg.y(i, j), s = dg.y(i, j - 1);
      // Row of a I - b dt Q; duplicates (nx or ny == 2) are summed.
      t.emplace_back(k, k,
                     a + sx * (bernoulli(e) + bernoulli(-w)) + sy * (bernoulli(n) + bernoulli(-s)));
      t.emplace_back(k, g.linear(i + 1, j), -sx * bernoulli(-e));
      t.emplace_back(k, g.linear(i - 1, j), -sx * bernoulli(w));
      t.emplace_back(k, g.linear(i, j + 1), -sy * bernoulli(-n));
      t.emplace_back(k, g.linear(i, j - 1), -sy * bernoulli(s));
    }
  }
  SparseMatrix m(g.cells(), g.cells());
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

NpStep euler_np_step(const CellFieldd& c_n, const FaceFieldd& dg, double kappa, double dt,
                     const std::optional<CellFieldd>& source, const SolverOptions& opts) {
  detail::require_same_grid(c_n.grid(), dg.grid(), "euler_np_step");
  if (!c_n.values().allFinite()) throw ValidationError("euler_np_step: concentration is not finite");

  Vector rhs = c_n.as_vector();
  if (source) rhs += dt * source->as_vector();
  const SparseMatrix l = assemble_np_matrix(dg, kappa, dt, Scheme::euler);
  const bool positivity_expected = c_n.min() > 0.0 && (!source || source->min() >= 0.0);

  // Krylov first; the diagonal-pivot LU takes over when the iteration stalls
  // or when rounding in a strongly depleted region leaves a non-positive entry.
  std::optional<NpStep> out;
  try {
    out = finish(c_n, dg, kappa, solve_nonsymmetric(l, rhs, opts, Vector(c_n.as_vector())), rhs);
  } catch (const SolverError&) {
  }
  if (!out || (positivity_expected && !(out->c.min() > 0.0))) {
    Solution direct = solve_diagonal_pivot_lu(l, rhs);
    if (direct.stats.final_relative_residual > opts.tol) {
      throw SolverError("euler_np_step: direct solve residual " + std::to_string(direct.stats.final_relative_residual) +
                            " exceeds the tolerance",
                        direct.stats);
    }
    out = finish(c_n, dg, kappa, std::move(direct), rhs);
  }
  if (positivity_expected && !(out->c.min() > 0.0)) {
    std::ostringstream os;
    os << "euler_np_step produced a non-positive concentration (min " << out->c.min() << ") from positive data";
    throw ConsistencyError(os.str());
  }
  return std::move(*out);
}

NpStep bdf2_np_step(const CellFieldd& c_n, const CellFieldd& c_nm1, const FaceFieldd& dg, double kappa,
                    double dt, const std::optional<CellFieldd>& source, const SolverOptions& opts) {
  detail::require_same_grid(c_n.grid(), dg.grid(), "bdf2_np_step");
  detail::require_same_grid(c_n.grid(), c_nm1.grid(), "bdf2_np_step");
  if (!c_n.values().allFinite() || !c_nm1.values().allFinite()) {
    throw ValidationError("bdf2_np_step: concentration history is not finite");
  }

  Vector rhs = 4.0 * c_n.as_vector() - c_nm1.as_vector();
  if (source) rhs += 2.0 * dt * source->as_vector();
  const SparseMatrix l = assemble_np_matrix(dg, kappa, dt, Scheme::bdf2);
  Vector guess = 2.0 * c_n.as_vector() - c_nm1.as_vector();
  return finish(c_n, dg, kappa, solve_nonsymmetric(l, rhs, opts, guess), Vector(rhs / 3.0));
}

}  // namespace manp
