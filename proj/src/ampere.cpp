#include "manp/ampere.hpp"

#include <cmath>
#include <sstream>

#include "manp/diagnostics.hpp"
#include "manp/model.hpp"

namespace manp {
namespace {

FaceFieldd current_term(const GridSpec& g, const std::vector<FaceFieldd>& fluxes, const std::vector<double>& q,
                        double kappa) {
  if (fluxes.size() != q.size()) throw ValidationError("Ampere update: species/valence count mismatch");
  FaceFieldd sum(g);
  for (std::size_t l = 0; l < fluxes.size(); ++l) {
    detail::require_same_grid(g, fluxes[l].grid(), "Ampere update");
    sum += q[l] * fluxes[l];
  }
  sum *= -1.0 / (2.0 * kappa * kappa);
  return sum;
}

struct SweepDirections {
  int sx;
  int sy;
};

SweepDirections directions(SweepOrder o) {
  switch (o) {
    case SweepOrder::LL_to_UR: return {+1, +1};
    case SweepOrder::UL_to_LR: return {+1, -1};
    case SweepOrder::LR_to_UL: return {-1, +1};
    case SweepOrder::UR_to_LL: return {-1, -1};
  }
  return {+1, +1};
}

}  // namespace

FaceFieldd ma_euler_update(const FaceFieldd& d_n, const std::vector<FaceFieldd>& fluxes,
                           const std::vector<double>& q, double kappa, double dt, const FaceFieldd& theta,
                           const FaceFieldd& source) {
  FaceFieldd rate = current_term(d_n.grid(), fluxes, q, kappa) + theta + source;
  return d_n + dt * rate;
}

FaceFieldd ma_bdf2_update(const FaceFieldd& d_n, const FaceFieldd& d_nm1, const std::vector<FaceFieldd>& fluxes,
                          const std::vector<double>& q, double kappa, double dt, const FaceFieldd& theta,
                          const FaceFieldd& source) {
  FaceFieldd rate = current_term(d_n.grid(), fluxes, q, kappa) + theta + source;
  FaceFieldd out = 4.0 * d_n - d_nm1 + 2.0 * dt * rate;
  out *= 1.0 / 3.0;
  return out;
}

std::string to_string(SweepOrder o) {
  switch (o) {
    case SweepOrder::LL_to_UR: return "LL_to_UR";
    case SweepOrder::UL_to_LR: return "UL_to_LR";
    case SweepOrder::LR_to_UL: return "LR_to_UL";
    case SweepOrder::UR_to_LL: return "UR_to_LL";
  }
  return "?";
}

SweepOrder parse_sweep_order(const std::string& s) {
  for (SweepOrder o : {SweepOrder::LL_to_UR, SweepOrder::UL_to_LR, SweepOrder::LR_to_UL, SweepOrder::UR_to_LL}) {
    if (to_string(o) == s) return o;
  }
  throw ValidationError("sweep order must be LL_to_UR, UL_to_LR, LR_to_UL or UR_to_LL, got '" + s + "'");
}

GaussCorrection gauss_correct(const FaceFieldd& d_star, const std::vector<CellFieldd>& c,
                              const std::vector<double>& q, const CellFieldd& rho_f, double kappa,
                              SweepOrder order) {
  detail::require_same_grid(d_star.grid(), rho_f.grid(), "gauss_correct");
  const GridSpec& g = d_star.grid();
  const CellFieldd rho = charge_density(c, q, rho_f);

  const double total = rho.sum();
  const double total_scale = compensated_sum(rho.values().abs());
  if (std::abs(total) > 1e-9 * total_scale) {
    std::ostringstream os;
    os << "gauss_correct: total charge " << total * g.cell_area() << " is not zero; the periodic sweep cannot close";
    throw ValidationError(os.str());
  }

  const double two_k2 = 2.0 * kappa * kappa;
  const double rdx = 1.0 / g.dx();
  const double rdy = 1.0 / g.dy();
  const auto [sx, sy] = directions(order);
  const Index nx = g.nx(), ny = g.ny();

  GaussCorrection out{d_star, {0.0, 0.0, order}};
  auto& dx_faces = out.d.xs();
  auto& dy_faces = out.d.ys();

  for (Index jj = 0; jj < ny; ++jj) {
    const Index j = sy > 0 ? jj : ny - 1 - jj;
    const Index jm = j == 0 ? ny - 1 : j - 1;
    const bool last_row = jj == ny - 1;
    for (Index ii = 0; ii < nx; ++ii) {
      const Index i = sx > 0 ? ii : nx - 1 - ii;
      const Index im = i == 0 ? nx - 1 : i - 1;
      const bool last_col = ii == nx - 1;

      const double div = (dx_faces(i, j) - dx_faces(im, j)) * rdx + (dy_faces(i, j) - dy_faces(i, jm)) * rdy;
      const double xi = two_k2 * div - rho.values()(i, j);
      out.report.max_xi = std::max(out.report.max_xi, std::abs(xi));
      if (last_row && last_col) break;

      // Share of the residual removed through each outgoing face; the two
      // shares add up to one half, which together with the 1/(2 kappa^2)
      // factor cancels xi exactly.
      const double share_x = last_col ? 0.0 : last_row ? 0.5 : 0.25;
      const double share_y = 0.5 - share_x;
      const Index fx = sx > 0 ? i : im;
      const Index fy = sy > 0 ? j : jm;
      dx_faces(fx, j) -= sx * share_x * xi * g.dx() / (kappa * kappa);
      dy_faces(i, fy) -= sy * share_y * xi * g.dy() / (kappa * kappa);
    }
  }

  out.report.closure_residual = gauss_residual(out.d, c, q, rho_f, kappa);
  const double scale = gauss_scale(out.d, rho, kappa);
  if (out.report.closure_residual > 1e-10 * scale) {
    std::ostringstream os;
    os << "gauss_correct: sweep " << to_string(order) << " left residual " << out.report.closure_residual
       << " (scale " << scale << ")";
    throw GaussClosureError(os.str(), out.report);
  }
  return out;
}

PotentialReconstruction faraday_correct(const FaceFieldd& d, const FaceFieldd& eps) {
  detail::require_same_grid(d.grid(), eps.grid(), "faraday_correct");
  if (!(eps.min() > 0.0)) throw ValidationError("faraday_correct: permittivity must be positive");
  const GridSpec& g = d.grid();

  CellFieldd phi(g);
  auto& p = phi.values();
  for (Index j = 0; j + 1 < g.ny(); ++j) p(0, j + 1) = p(0, j) - g.dy() * d.ys()(0, j) / eps.ys()(0, j);
  for (Index j = 0; j < g.ny(); ++j)
    for (Index i = 0; i + 1 < g.nx(); ++i) p(i + 1, j) = p(i, j) - g.dx() * d.xs()(i, j) / eps.xs()(i, j);
  p -= p.mean();

  const FaceFieldd grad = gradient(phi);
  FaceFieldd d_tilde(g, -eps.xs() * grad.xs(), -eps.ys() * grad.ys());
  const double change = (d_tilde - d).max_abs();
  return {std::move(phi), std::move(d_tilde), change};
}

PotentialReconstruction faraday_project(const FaceFieldd& d, const FaceFieldd& eps,
                                        const GroundedFactorization& poisson) {
  detail::require_same_grid(d.grid(), eps.grid(), "faraday_project");
  if (poisson.size() != d.grid().cells()) throw ValidationError("faraday_project: factorization has the wrong size");
  // The recursion supplies a curl-free field carrying nearly all of d; only
  // the small remainder goes through the Poisson solve, so its rounding is
  // relative to the remainder rather than to d.
  PotentialReconstruction base = faraday_correct(d, eps);
  const FaceFieldd remainder = d - base.d_tilde;
  const CellFieldd delta = CellFieldd::from_vector(d.grid(), poisson.solve(divergence(remainder).as_vector()));
  const FaceFieldd grad = gradient(delta);
  FaceFieldd d_tilde(d.grid(), base.d_tilde.xs() - eps.xs() * grad.xs(), base.d_tilde.ys() - eps.ys() * grad.ys());
  CellFieldd phi = base.phi + delta;
  phi.values() -= phi.values().mean();
  const double change = (d_tilde - d).max_abs();
  return {std::move(phi), std::move(d_tilde), change};
}

PotentialReconstruction faraday_project(const FaceFieldd& d, const FaceFieldd& eps) {
  return faraday_project(d, eps, GroundedFactorization(poisson_matrix(eps)));
}

}  // namespace manp
