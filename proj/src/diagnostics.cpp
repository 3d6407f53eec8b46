#include "manp/diagnostics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace manp {
namespace {

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

template <typename Sampler>
double l2_distance(const GridSpec& g, const Eigen::ArrayXXd& values, Sampler&& exact) {
  double sum = 0.0;
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      const double e = values(i, j) - exact(i, j);
      sum += e * e;
    }
  }
  return std::sqrt(g.cell_area() * sum);
}

void write_number(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
  } else {
    out << v;
  }
}

}  // namespace

double mass(const CellFieldd& c) { return c.grid().cell_area() * c.sum(); }

CellFieldd gauss_residual_field(const FaceFieldd& d, const std::vector<CellFieldd>& c, const std::vector<double>& q,
                                const CellFieldd& rho_f, double kappa) {
  detail::require_same_grid(d.grid(), rho_f.grid(), "gauss_residual");
  CellFieldd r = divergence(d);
  r *= 2.0 * kappa * kappa;
  r -= charge_density(c, q, rho_f);
  return r;
}

double gauss_residual(const FaceFieldd& d, const std::vector<CellFieldd>& c, const std::vector<double>& q,
                      const CellFieldd& rho_f, double kappa) {
  return norm_inf(gauss_residual_field(d, c, q, rho_f, kappa));
}

double gauss_scale(const FaceFieldd& d, const CellFieldd& rho, double kappa) {
  const GridSpec& g = d.grid();
  return std::max(norm_inf(rho), 2.0 * kappa * kappa * d.max_abs() / std::min(g.dx(), g.dy()));
}

double faraday_residual(const FaceFieldd& d, const FaceFieldd& eps_face) {
  return norm_inf(curl_scaled(d, eps_face));
}

double free_energy(const FaceFieldd& d, const std::vector<CellFieldd>& c, const std::vector<CellFieldd>& mu,
                   double kappa, const FaceFieldd& eps) {
  detail::require_same_grid(d.grid(), eps.grid(), "free_energy");
  if (c.size() != mu.size()) throw ValidationError("free_energy: species count mismatch");
  const GridSpec& g = d.grid();

  double field = (d.xs().square() / eps.xs()).sum() + (d.ys().square() / eps.ys()).sum();
  double entropy = 0.0;
  for (std::size_t l = 0; l < c.size(); ++l) {
    for (Index j = 0; j < g.ny(); ++j) {
      for (Index i = 0; i < g.nx(); ++i) {
        const double v = c[l].values()(i, j);
        if (!(v > 0.0)) {
          std::ostringstream os;
          os << "free_energy: species " << l + 1 << " has non-positive concentration " << v << " at cell (" << i
             << ", " << j << ")";
          throw ValidationError(os.str());
        }
        entropy += v * (std::log(v) + mu[l].values()(i, j));
      }
    }
  }
  return g.cell_area() * (kappa * kappa * field + entropy);
}

double dt_star(const std::vector<FaceFieldd>& dg, const FaceFieldd& eps, const std::vector<CellFieldd>& c,
               double kappa, const std::vector<double>& q) {
  const double eps_min = eps.min();
  const double eps_max = eps.max();
  double c_max = 0.0;
  for (const auto& cl : c) c_max = std::max(c_max, cl.max());
  double q2 = 0.0;
  for (double v : q) q2 += v * v;
  double dg_max = 0.0;
  for (const auto& f : dg) dg_max = std::max(dg_max, f.max_abs());
  return 2.0 * kappa * eps_min * eps_min * eps_min / (eps_max * eps_max * c_max * q2) * std::exp(-dg_max);
}

double error_vs_exact(const CellFieldd& numeric, const SpaceTimeFn& exact, double t) {
  const GridSpec& g = numeric.grid();
  return l2_distance(g, numeric.values(), [&](Index i, Index j) { return exact(g.x(i), g.y(j), t); });
}

double error_vs_exact_x(const FaceFieldd& numeric, const SpaceTimeFn& exact, double t) {
  const GridSpec& g = numeric.grid();
  return l2_distance(g, numeric.xs(), [&](Index i, Index j) { return exact(g.x_face(i), g.y(j), t); });
}

double error_vs_exact_y(const FaceFieldd& numeric, const SpaceTimeFn& exact, double t) {
  const GridSpec& g = numeric.grid();
  return l2_distance(g, numeric.ys(), [&](Index i, Index j) { return exact(g.x(i), g.y_face(j), t); });
}

std::vector<std::optional<double>> observed_orders(const std::vector<std::pair<double, double>>& levels) {
  if (levels.size() < 2) throw ValidationError("observed_orders needs at least two levels");
  std::vector<std::optional<double>> out;
  for (std::size_t k = 1; k < levels.size(); ++k) {
    const auto [h0, e0] = levels[k - 1];
    const auto [h1, e1] = levels[k];
    if (!(h1 < h0) || !(h1 > 0.0)) throw ValidationError("observed_orders: mesh widths must strictly decrease");
    if (e0 > 0.0 && e1 > 0.0) {
      out.emplace_back(std::log(e0 / e1) / std::log(h0 / h1));
    } else {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

std::string diagnostics_header(std::size_t species) {
  std::string h = "t";
  for (std::size_t l = 1; l <= species; ++l) h += ",mass_" + std::to_string(l);
  for (std::size_t l = 1; l <= species; ++l) h += ",min_c_" + std::to_string(l);
  return h + ",energy,gauss_residual,faraday_residual,dt_star,gauss_residual_pre_faraday";
}

void write_diagnostics_row(std::ostream& out, const DiagnosticsRecord& r) {
  const auto old = out.precision(kDigits);
  write_number(out, r.t);
  for (double m : r.mass) write_number(out << ',', m);
  for (double m : r.min_c) write_number(out << ',', m);
  write_number(out << ',', r.energy);
  write_number(out << ',', r.gauss_residual);
  write_number(out << ',', r.faraday_residual);
  write_number(out << ',', r.dt_star);
  write_number(out << ',', r.gauss_residual_pre_faraday);
  out << '\n';
  out.precision(old);
}

std::vector<std::optional<double>> ErrorReport::orders(std::size_t f) const {
  if (h.size() < 2) return {};
  std::vector<std::pair<double, double>> levels;
  for (std::size_t k = 0; k < h.size(); ++k) levels.emplace_back(h[k], errors.at(f).at(k));
  return observed_orders(levels);
}

void ErrorReport::write_csv(std::ostream& out) const {
  const auto old = out.precision(kDigits);
  out << "h";
  for (const auto& f : fields) out << ',' << f << "_error," << f << "_order";
  out << '\n';
  std::vector<std::vector<std::optional<double>>> ord;
  for (std::size_t f = 0; f < fields.size(); ++f) ord.push_back(orders(f));
  for (std::size_t k = 0; k < h.size(); ++k) {
    out << h[k];
    for (std::size_t f = 0; f < fields.size(); ++f) {
      out << ',' << errors[f][k] << ',';
      if (k > 0 && ord[f][k - 1]) out << *ord[f][k - 1];
    }
    out << '\n';
  }
  out.precision(old);
}

}  // namespace manp
