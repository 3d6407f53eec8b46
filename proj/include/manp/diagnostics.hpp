#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "manp/grid.hpp"
#include "manp/model.hpp"

namespace manp {

/// Total amount dx dy sum c.
double mass(const CellFieldd& c);

/// Cellwise 2 kappa^2 div d - sum_l q^l c^l - rho_f.
CellFieldd gauss_residual_field(const FaceFieldd& d, const std::vector<CellFieldd>& concentrations,
                                const std::vector<double>& valences, const CellFieldd& rho_f, double kappa);

/// Max-norm of gauss_residual_field.
double gauss_residual(const FaceFieldd& d, const std::vector<CellFieldd>& concentrations,
                      const std::vector<double>& valences, const CellFieldd& rho_f, double kappa);

/// Magnitude against which Gauss residuals are judged:
/// max(||rho||_inf, 2 kappa^2 ||d||_inf / min(dx, dy)).
double gauss_scale(const FaceFieldd& d, const CellFieldd& rho, double kappa);

/// Max-norm of curl_scaled(d, eps_face).
double faraday_residual(const FaceFieldd& d, const FaceFieldd& eps_face);

/// Discrete free energy
///   dx dy sum_faces kappa^2 d^2 / eps + dx dy sum_cells sum_l c (log c + mu).
/// Throws ValidationError naming the first non-positive concentration.
double free_energy(const FaceFieldd& d, const std::vector<CellFieldd>& concentrations,
                   const std::vector<CellFieldd>& mu, double kappa, const FaceFieldd& eps_face);

/// Step bound below which the free energy cannot increase:
///   2 kappa eps_min^3 / (eps_max^2 c_max sum_l q_l^2) exp(-max |dg|).
double dt_star(const std::vector<FaceFieldd>& dg, const FaceFieldd& eps_face,
               const std::vector<CellFieldd>& concentrations, double kappa, const std::vector<double>& valences);

/// Discrete L2 distance between a field and a closed form at time t,
/// sampled where the field lives.
double error_vs_exact(const CellFieldd& numeric, const SpaceTimeFn& exact, double t);
double error_vs_exact_x(const FaceFieldd& numeric, const SpaceTimeFn& exact, double t);
double error_vs_exact_y(const FaceFieldd& numeric, const SpaceTimeFn& exact, double t);

/// log(e_{k-1} / e_k) / log(h_{k-1} / h_k) for successive (h, error)
/// levels; empty when a zero error makes the ratio undefined. Requires h
/// strictly decreasing.
std::vector<std::optional<double>> observed_orders(const std::vector<std::pair<double, double>>& levels);

struct DiagnosticsRecord {
  double t = 0.0;
  std::vector<double> mass;
  std::vector<double> min_c;
  /// NaN when some concentration is not positive.
  double energy = 0.0;
  double gauss_residual = 0.0;
  double gauss_residual_pre_faraday = 0.0;
  double faraday_residual = 0.0;
  /// NaN when not computable.
  double dt_star = 0.0;
};

/// `t,mass_1..M,min_c_1..M,energy,gauss_residual,faraday_residual,dt_star`
/// followed by the extra column gauss_residual_pre_faraday.
std::string diagnostics_header(std::size_t species);
void write_diagnostics_row(std::ostream& out, const DiagnosticsRecord& r);

/// Final-time errors of several fields over a sequence of mesh widths.
struct ErrorReport {
  std::vector<double> h;
  std::vector<std::string> fields;
  /// errors[f][k] is the error of field f at mesh width h[k].
  std::vector<std::vector<double>> errors;

  std::vector<std::optional<double>> orders(std::size_t field) const;
  /// Columns h, then per field `<name>_error,<name>_order` (order empty on
  /// the first level).
  void write_csv(std::ostream& out) const;
};

}  // namespace manp
