#pragma once

/// Periodic uniform staggered grid and the discrete operators on it.
///
/// Cell (node) values live at (x_i, y_j) = (x0 + i*dx, y0 + j*dy). Face
/// values live half a mesh width to the right of (x-faces) or above
/// (y-faces) their owning cell, so x-face slot (i, j) stores the value at
/// (i+1/2, j) and slot (nx-1, j) doubles as the (-1/2, j) face. Corner slot
/// (i, j) stores the value at (i+1/2, j+1/2). Every container is periodic in
/// both directions; there are no ghost layers.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "manp/error.hpp"

namespace manp {

using Index = Eigen::Index;

/// Neumaier-compensated sum of all coefficients as an unevaluated pair
/// (sum, correction). Masses and total charges are sums of 10^4 or more
/// similar terms; a plain reduction loses about sqrt(n) to n ulps there,
/// enough to break the Gauss closure.
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> compensated_sum_parts(
    const Eigen::DenseBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  Scalar s(0), comp(0);
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      const Scalar v = a.coeff(i, j);
      const Scalar t = s + v;
      comp += abs(s) >= abs(v) ? (s - t) + v : (v - t) + s;
      s = t;
    }
  }
  return {s, comp};
}

template <typename Derived>
typename Derived::Scalar compensated_sum(const Eigen::DenseBase<Derived>& a) {
  const auto [s, comp] = compensated_sum_parts(a);
  return s + comp;
}

/// Maps any integer index onto [0, n).
inline Index wrap(Index k, Index n) {
  if (k >= 0 && k < n) return k;
  k %= n;
  return k < 0 ? k + n : k;
}

class GridSpec {
 public:
  GridSpec(Index nx, Index ny, double x0, double y0, double lx, double ly)
      : nx_(nx), ny_(ny), x0_(x0), y0_(y0), lx_(lx), ly_(ly) {
    if (nx < 2 || ny < 2) {
      throw ValidationError("grid needs at least 2 cells per direction, got " +
                            std::to_string(nx) + "x" + std::to_string(ny));
    }
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
      throw ValidationError("grid extents must be positive and finite");
    }
    if (!std::isfinite(x0) || !std::isfinite(y0)) {
      throw ValidationError("grid origin must be finite");
    }
  }

  /// n x n cells on [origin, origin + length]^2.
  static GridSpec square(Index n, double origin = -1.0, double length = 2.0) {
    return GridSpec(n, n, origin, origin, length, length);
  }

  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  Index cells() const { return nx_ * ny_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double dx() const { return lx_ / static_cast<double>(nx_); }
  double dy() const { return ly_ / static_cast<double>(ny_); }
  double cell_area() const { return dx() * dy(); }

  double x(Index i) const { return x0_ + static_cast<double>(i) * dx(); }
  double y(Index j) const { return y0_ + static_cast<double>(j) * dy(); }
  double x_face(Index i) const { return x0_ + (static_cast<double>(i) + 0.5) * dx(); }
  double y_face(Index j) const { return y0_ + (static_cast<double>(j) + 0.5) * dy(); }

  /// Unknown ordering shared by fields and sparse systems: i fastest.
  Index linear(Index i, Index j) const { return wrap(i, nx_) + nx_ * wrap(j, ny_); }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  Index nx_;
  Index ny_;
  double x0_;
  double y0_;
  double lx_;
  double ly_;
};

namespace detail {
inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": fields live on different grids");
}
}  // namespace detail

/// Scalar grid function at cell nodes.
template <typename Scalar>
class CellField {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit CellField(const GridSpec& grid, Scalar fill = Scalar(0))
      : grid_(grid), values_(Storage::Constant(grid.nx(), grid.ny(), fill)) {}

  CellField(const GridSpec& grid, Storage values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != grid.nx() || values_.cols() != grid.ny()) {
      throw ValidationError("cell field storage does not match grid shape");
    }
  }

  /// Evaluates f(x, y) at every node.
  template <typename F>
  static CellField sample(const GridSpec& grid, F&& f) {
    CellField out(grid);
    for (Index j = 0; j < grid.ny(); ++j)
      for (Index i = 0; i < grid.nx(); ++i) out.values_(i, j) = f(grid.x(i), grid.y(j));
    return out;
  }

  static CellField from_vector(const GridSpec& grid, const Vector& v) {
    if (v.size() != grid.cells()) throw ValidationError("vector length does not match grid");
    return CellField(grid, Eigen::Map<const Storage>(v.data(), grid.nx(), grid.ny()));
  }

  const GridSpec& grid() const { return grid_; }
  Storage& values() { return values_; }
  const Storage& values() const { return values_; }

  Scalar& operator()(Index i, Index j) { return values_(wrap(i, grid_.nx()), wrap(j, grid_.ny())); }
  Scalar operator()(Index i, Index j) const {
    return values_(wrap(i, grid_.nx()), wrap(j, grid_.ny()));
  }

  /// Flattened view in GridSpec::linear order.
  Eigen::Map<Vector> as_vector() { return Eigen::Map<Vector>(values_.data(), values_.size()); }
  Eigen::Map<const Vector> as_vector() const {
    return Eigen::Map<const Vector>(values_.data(), values_.size());
  }

  Scalar sum() const { return compensated_sum(values_); }
  Scalar min() const { return values_.minCoeff(); }
  Scalar max() const { return values_.maxCoeff(); }

  CellField& operator+=(const CellField& o) {
    detail::require_same_grid(grid_, o.grid_, "CellField +=");
    values_ += o.values_;
    return *this;
  }
  CellField& operator-=(const CellField& o) {
    detail::require_same_grid(grid_, o.grid_, "CellField -=");
    values_ -= o.values_;
    return *this;
  }
  CellField& operator*=(Scalar s) {
    values_ *= s;
    return *this;
  }

  friend CellField operator+(CellField a, const CellField& b) { return a += b; }
  friend CellField operator-(CellField a, const CellField& b) { return a -= b; }
  friend CellField operator*(Scalar s, CellField a) { return a *= s; }
  friend CellField operator*(CellField a, Scalar s) { return a *= s; }

 private:
  GridSpec grid_;
  Storage values_;
};

/// Vector grid function with the x-component on x-faces (i+1/2, j) and the
/// y-component on y-faces (i, j+1/2).
template <typename Scalar>
class FaceField {
 public:
  using Storage = typename CellField<Scalar>::Storage;

  explicit FaceField(const GridSpec& grid, Scalar fill_x = Scalar(0), Scalar fill_y = Scalar(0))
      : grid_(grid),
        x_(Storage::Constant(grid.nx(), grid.ny(), fill_x)),
        y_(Storage::Constant(grid.nx(), grid.ny(), fill_y)) {}

  FaceField(const GridSpec& grid, Storage xs, Storage ys)
      : grid_(grid), x_(std::move(xs)), y_(std::move(ys)) {
    if (x_.rows() != grid.nx() || x_.cols() != grid.ny() || y_.rows() != grid.nx() ||
        y_.cols() != grid.ny()) {
      throw ValidationError("face field storage does not match grid shape");
    }
  }

  /// fx sampled at x-face midpoints, fy at y-face midpoints.
  template <typename FX, typename FY>
  static FaceField sample(const GridSpec& grid, FX&& fx, FY&& fy) {
    FaceField out(grid);
    for (Index j = 0; j < grid.ny(); ++j) {
      for (Index i = 0; i < grid.nx(); ++i) {
        out.x_(i, j) = fx(grid.x_face(i), grid.y(j));
        out.y_(i, j) = fy(grid.x(i), grid.y_face(j));
      }
    }
    return out;
  }

  const GridSpec& grid() const { return grid_; }
  Storage& xs() { return x_; }
  Storage& ys() { return y_; }
  const Storage& xs() const { return x_; }
  const Storage& ys() const { return y_; }

  /// Value at (i+1/2, j).
  Scalar& x(Index i, Index j) { return x_(wrap(i, grid_.nx()), wrap(j, grid_.ny())); }
  Scalar x(Index i, Index j) const { return x_(wrap(i, grid_.nx()), wrap(j, grid_.ny())); }
  /// Value at (i, j+1/2).
  Scalar& y(Index i, Index j) { return y_(wrap(i, grid_.nx()), wrap(j, grid_.ny())); }
  Scalar y(Index i, Index j) const { return y_(wrap(i, grid_.nx()), wrap(j, grid_.ny())); }

  Scalar max_abs() const { return std::max(x_.abs().maxCoeff(), y_.abs().maxCoeff()); }
  Scalar min() const { return std::min(x_.minCoeff(), y_.minCoeff()); }
  Scalar max() const { return std::max(x_.maxCoeff(), y_.maxCoeff()); }

  FaceField& operator+=(const FaceField& o) {
    detail::require_same_grid(grid_, o.grid_, "FaceField +=");
    x_ += o.x_;
    y_ += o.y_;
    return *this;
  }
  FaceField& operator-=(const FaceField& o) {
    detail::require_same_grid(grid_, o.grid_, "FaceField -=");
    x_ -= o.x_;
    y_ -= o.y_;
    return *this;
  }
  FaceField& operator*=(Scalar s) {
    x_ *= s;
    y_ *= s;
    return *this;
  }

  friend FaceField operator+(FaceField a, const FaceField& b) { return a += b; }
  friend FaceField operator-(FaceField a, const FaceField& b) { return a -= b; }
  friend FaceField operator*(Scalar s, FaceField a) { return a *= s; }
  friend FaceField operator*(FaceField a, Scalar s) { return a *= s; }

 private:
  GridSpec grid_;
  Storage x_;
  Storage y_;
};

/// Scalar grid function at corners (i+1/2, j+1/2).
template <typename Scalar>
class CornerField {
 public:
  using Storage = typename CellField<Scalar>::Storage;

  explicit CornerField(const GridSpec& grid, Scalar fill = Scalar(0))
      : grid_(grid), values_(Storage::Constant(grid.nx(), grid.ny(), fill)) {}

  const GridSpec& grid() const { return grid_; }
  Storage& values() { return values_; }
  const Storage& values() const { return values_; }
  Scalar& operator()(Index i, Index j) { return values_(wrap(i, grid_.nx()), wrap(j, grid_.ny())); }
  Scalar operator()(Index i, Index j) const {
    return values_(wrap(i, grid_.nx()), wrap(j, grid_.ny()));
  }

 private:
  GridSpec grid_;
  Storage values_;
};

using CellFieldd = CellField<double>;
using FaceFieldd = FaceField<double>;
using CornerFieldd = CornerField<double>;

/// Discrete divergence at cells: d_x f^1 + d_y f^2.
template <typename Scalar>
CellField<Scalar> divergence(const FaceField<Scalar>& f) {
  const GridSpec& g = f.grid();
  const Scalar rdx = Scalar(1) / Scalar(g.dx());
  const Scalar rdy = Scalar(1) / Scalar(g.dy());
  CellField<Scalar> out(g);
  for (Index j = 0; j < g.ny(); ++j) {
    const Index jm = j == 0 ? g.ny() - 1 : j - 1;
    for (Index i = 0; i < g.nx(); ++i) {
      const Index im = i == 0 ? g.nx() - 1 : i - 1;
      out.values()(i, j) = (f.xs()(i, j) - f.xs()(im, j)) * rdx + (f.ys()(i, j) - f.ys()(i, jm)) * rdy;
    }
  }
  return out;
}

/// Discrete gradient at faces.
template <typename Scalar>
FaceField<Scalar> gradient(const CellField<Scalar>& c) {
  const GridSpec& g = c.grid();
  const Scalar rdx = Scalar(1) / Scalar(g.dx());
  const Scalar rdy = Scalar(1) / Scalar(g.dy());
  FaceField<Scalar> out(g);
  for (Index j = 0; j < g.ny(); ++j) {
    const Index jp = j + 1 == g.ny() ? 0 : j + 1;
    for (Index i = 0; i < g.nx(); ++i) {
      const Index ip = i + 1 == g.nx() ? 0 : i + 1;
      out.xs()(i, j) = (c.values()(ip, j) - c.values()(i, j)) * rdx;
      out.ys()(i, j) = (c.values()(i, jp) - c.values()(i, j)) * rdy;
    }
  }
  return out;
}

/// Discrete curl of d / eps at corners. Throws if any face permittivity is
/// not strictly positive.
template <typename Scalar>
CornerField<Scalar> curl_scaled(const FaceField<Scalar>& d, const FaceField<Scalar>& eps) {
  detail::require_same_grid(d.grid(), eps.grid(), "curl_scaled");
  if (!(eps.min() > Scalar(0))) throw ValidationError("curl_scaled: permittivity must be positive");
  const GridSpec& g = d.grid();
  const Scalar rdx = Scalar(1) / Scalar(g.dx());
  const Scalar rdy = Scalar(1) / Scalar(g.dy());
  CornerField<Scalar> out(g);
  for (Index j = 0; j < g.ny(); ++j) {
    const Index jp = j + 1 == g.ny() ? 0 : j + 1;
    for (Index i = 0; i < g.nx(); ++i) {
      const Index ip = i + 1 == g.nx() ? 0 : i + 1;
      const Scalar ey_r = d.ys()(ip, j) / eps.ys()(ip, j);
      const Scalar ey_l = d.ys()(i, j) / eps.ys()(i, j);
      const Scalar ex_t = d.xs()(i, jp) / eps.xs()(i, jp);
      const Scalar ex_b = d.xs()(i, j) / eps.xs()(i, j);
      out.values()(i, j) = (ey_r - ey_l) * rdx - (ex_t - ex_b) * rdy;
    }
  }
  return out;
}

/// Discrete L2 inner products weighted by the cell area.
template <typename Scalar>
Scalar inner(const CellField<Scalar>& a, const CellField<Scalar>& b) {
  detail::require_same_grid(a.grid(), b.grid(), "inner");
  return Scalar(a.grid().cell_area()) * (a.values() * b.values()).sum();
}

template <typename Scalar>
Scalar inner(const FaceField<Scalar>& a, const FaceField<Scalar>& b) {
  detail::require_same_grid(a.grid(), b.grid(), "inner");
  return Scalar(a.grid().cell_area()) * ((a.xs() * b.xs()).sum() + (a.ys() * b.ys()).sum());
}

template <typename Scalar>
Scalar norm_l2(const CellField<Scalar>& c) {
  using std::sqrt;
  return sqrt(Scalar(c.grid().cell_area()) * c.values().square().sum());
}

template <typename Scalar>
Scalar norm_inf(const CellField<Scalar>& c) {
  return c.values().abs().maxCoeff();
}

template <typename Scalar>
Scalar norm_inf(const CornerField<Scalar>& c) {
  return c.values().abs().maxCoeff();
}

}  // namespace manp
