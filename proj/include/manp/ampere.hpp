#pragma once

#include <string>
#include <vector>

#include "manp/grid.hpp"
#include "manp/linsolve.hpp"

namespace manp {

/// Displacement update D* = D^n + dt (-sum_l q^l J^l / (2 kappa^2) + theta + source).
FaceFieldd ma_euler_update(const FaceFieldd& d_n, const std::vector<FaceFieldd>& fluxes,
                           const std::vector<double>& valences, double kappa, double dt, const FaceFieldd& theta,
                           const FaceFieldd& source);

/// Second-order update
/// D* = (4 D^n - D^{n-1} + 2 dt (-sum_l q^l J^l / (2 kappa^2) + theta + source)) / 3.
FaceFieldd ma_bdf2_update(const FaceFieldd& d_n, const FaceFieldd& d_nm1, const std::vector<FaceFieldd>& fluxes,
                          const std::vector<double>& valences, double kappa, double dt, const FaceFieldd& theta,
                          const FaceFieldd& source);

/// Cell visiting order of the Gauss sweep: rows are the outer loop and the
/// two outgoing faces of each cell point away from the starting corner.
enum class SweepOrder { LL_to_UR, UL_to_LR, LR_to_UL, UR_to_LL };

std::string to_string(SweepOrder o);
SweepOrder parse_sweep_order(const std::string& s);

struct CorrectionReport {
  double max_xi = 0.0;
  double closure_residual = 0.0;
  SweepOrder sweep_order = SweepOrder::LL_to_UR;
};

struct GaussCorrection {
  FaceFieldd d;
  CorrectionReport report;
};

/// Raised when the sweep leaves a residual above 1e-10 times the Gauss scale.
class GaussClosureError : public ConsistencyError {
 public:
  GaussClosureError(const std::string& what, CorrectionReport report)
      : ConsistencyError(what), report_(report) {}
  const CorrectionReport& report() const { return report_; }

 private:
  CorrectionReport report_;
};

/// Sequential sweep enforcing 2 kappa^2 div D = sum_l q^l c^l + rho_f in
/// every cell. At each visited cell the residual xi is taken from the
/// current working field and removed through the cell's two outgoing faces
/// (xi dx / (4 kappa^2) and xi dy / (4 kappa^2)). Cells in the last visited
/// column push their whole residual through the outgoing y-face and cells in
/// the last visited row through the outgoing x-face, so no already-balanced
/// cell is touched; the final cell then balances because the total charge
/// vanishes. Throws ValidationError when the total charge is not zero
/// (relative 1e-9) and GaussClosureError when the sweep does not close.
GaussCorrection gauss_correct(const FaceFieldd& d_star, const std::vector<CellFieldd>& concentrations,
                              const std::vector<double>& valences, const CellFieldd& rho_f, double kappa,
                              SweepOrder order = SweepOrder::LL_to_UR);

struct PotentialReconstruction {
  CellFieldd phi;
  FaceFieldd d_tilde;
  double max_change = 0.0;
};

/// Integrates -D/eps along the first column and then along every row to get
/// a potential (zero at cell (0, 0), then shifted to zero mean) and returns
/// the curl-free field -eps grad(phi).
PotentialReconstruction faraday_correct(const FaceFieldd& d, const FaceFieldd& eps_face);

/// Path-independent reconstruction: phi solves -div(eps grad phi) = div d
/// (zero mean) and d_tilde = -eps grad(phi). Agrees with faraday_correct on
/// curl-free input; unlike the recursion it leaves div d unchanged up to
/// rounding, so a Gauss-balanced field stays balanced. `poisson` must
/// factor poisson_matrix(eps_face).
PotentialReconstruction faraday_project(const FaceFieldd& d, const FaceFieldd& eps_face,
                                        const GroundedFactorization& poisson);
PotentialReconstruction faraday_project(const FaceFieldd& d, const FaceFieldd& eps_face);

}  // namespace manp
