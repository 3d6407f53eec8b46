#pragma once

#include <optional>
#include <vector>

#include "manp/grid.hpp"
#include "manp/linsolve.hpp"

namespace manp {

enum class Scheme { euler, bdf2 };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

/// B(z) = z / (e^z - 1) with B(0) = 1. Uses a three-term series for
/// |z| < 1e-6; saturates to 0 for large positive z and to -z for large
/// negative z.
double bernoulli(double z);

/// Face increments of the electrochemical potential for one species:
///   x-face: -dx q d.x / eps + mu(i+1, j) - mu(i, j)
///   y-face: -dy q d.y / eps + mu(i, j+1) - mu(i, j)
FaceFieldd compute_dg(const FaceFieldd& d, const CellFieldd& mu, double valence, const FaceFieldd& eps_face);

/// compute_dg for every species. Throws ConsistencyError on a non-finite
/// increment, since those feed exponentials.
std::vector<FaceFieldd> compute_dg(const FaceFieldd& d, const std::vector<CellFieldd>& mu,
                                   const std::vector<double>& valences, const FaceFieldd& eps_face);

/// Scharfetter-Gummel face flux -(kappa/h) [B(-dg) c(+) - B(dg) c].
FaceFieldd compute_flux(const CellFieldd& c, const FaceFieldd& dg, double kappa);

/// Matrix of c -> a c - b dt Q c where Q c = -div(compute_flux(c, dg)) and
/// (a, b) = (1, 1) for euler, (3, 2) for bdf2.
SparseMatrix assemble_np_matrix(const FaceFieldd& dg, double kappa, double dt, Scheme scheme);

struct NpStep {
  CellFieldd c;
  /// Flux at the new concentration and the increments used for the solve.
  FaceFieldd flux;
  SolveStats stats;
};

/// Solves (I - dt Q) c_{n+1} = c_n + dt source. When c_n > 0 and the source
/// is absent or nonnegative a non-positive result raises ConsistencyError.
NpStep euler_np_step(const CellFieldd& c_n, const FaceFieldd& dg, double kappa, double dt,
                     const std::optional<CellFieldd>& source, const SolverOptions& opts = {});

/// Solves (3I - 2 dt Q) c_{n+1} = 4 c_n - c_{n-1} + 2 dt source. Positivity
/// is not guaranteed and not checked.
NpStep bdf2_np_step(const CellFieldd& c_n, const CellFieldd& c_nm1, const FaceFieldd& dg, double kappa,
                    double dt, const std::optional<CellFieldd>& source, const SolverOptions& opts = {});

}  // namespace manp
