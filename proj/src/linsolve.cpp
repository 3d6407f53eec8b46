#include "manp/linsolve.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <sstream>

namespace manp {
namespace {

constexpr double kTinyRhs = 1e-300;
constexpr int kRefinements = 3;

Eigen::Index budget(const SolverOptions& opts, Eigen::Index n) {
  return opts.maxit > 0 ? opts.maxit : 10 * n;
}

void require_square(const SparseMatrix& a, const Vector& b, const char* who) {
  if (a.rows() != a.cols()) throw ValidationError(std::string(who) + ": matrix is not square");
  if (a.rows() != b.size()) throw ValidationError(std::string(who) + ": dimension mismatch");
}

std::string describe(const char* who, const SolveStats& s, double tol) {
  std::ostringstream os;
  os << who << ": no convergence after " << s.iterations << " iterations, relative residual "
     << s.final_relative_residual << " > " << tol;
  return os.str();
}

/// Runs the Krylov solver, then up to kRefinements correction solves on the
/// true residual so the returned residual honours `tol` even when the
/// recurrence residual drifted from the true one.
template <typename Krylov>
Solution krylov_solve(Krylov& solver, const SparseMatrix& a, const Vector& b, const SolverOptions& opts,
                      Vector x0, const char* who) {
  const double bnorm = b.norm();
  solver.setMaxIterations(budget(opts, a.rows()));
  solver.setTolerance(opts.tol);
  solver.compute(a);

  Solution out;
  out.x = solver.solveWithGuess(b, x0);
  out.stats.iterations = solver.iterations();
  out.stats.final_relative_residual = relative_residual(a, out.x, b);

  for (int pass = 0; pass < kRefinements && out.stats.final_relative_residual > opts.tol; ++pass) {
    if (!std::isfinite(out.stats.final_relative_residual)) break;
    const Vector r = b - a * out.x;
    const double inner_tol =
        std::max(opts.tol * bnorm / r.norm(), 10.0 * std::numeric_limits<double>::epsilon());
    solver.setTolerance(std::min(inner_tol, 0.5));
    out.x += solver.solveWithGuess(r, Vector::Zero(r.size()));
    out.stats.iterations += solver.iterations();
    out.stats.final_relative_residual = relative_residual(a, out.x, b);
  }

  out.stats.converged = out.stats.final_relative_residual <= opts.tol;
  if (!out.stats.converged) throw SolverError(describe(who, out.stats, opts.tol), out.stats);
  return out;
}

Vector remove_mean(const Vector& b, const char* who) {
  const double mean = b.mean();
  const double scale = b.size() > 0 ? b.cwiseAbs().maxCoeff() : 0.0;
  if (std::abs(mean) > 1e-10 * scale) {
    std::ostringstream os;
    os << who << ": right-hand side mean " << mean << " is not orthogonal to the constant nullspace";
    throw ValidationError(os.str());
  }
  Vector out = b;
  out.array() -= mean;
  return out;
}

}  // namespace

void check_well_formed(const SparseMatrix& a) {
  if (!a.isCompressed()) throw ValidationError("sparse matrix is not in compressed form");
  const auto* outer = a.outerIndexPtr();
  const auto* inner = a.innerIndexPtr();
  if (outer[0] != 0) throw ValidationError("sparse matrix offsets must start at 0");
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    if (outer[r + 1] < outer[r]) throw ValidationError("sparse matrix offsets decrease");
  }
  if (outer[a.outerSize()] != a.nonZeros()) throw ValidationError("sparse matrix final offset != nnz");
  for (Eigen::Index k = 0; k < a.nonZeros(); ++k) {
    if (inner[k] < 0 || inner[k] >= a.cols()) throw ValidationError("sparse matrix column index out of range");
  }
}

Vector matvec(const SparseMatrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw ValidationError("matvec: matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                          std::to_string(x.size()) + " entries");
  }
  return a * x;
}

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double bnorm = b.norm();
  const double rnorm = (b - a * x).norm();
  return bnorm > kTinyRhs ? rnorm / bnorm : rnorm;
}

Solution solve_nonsymmetric(const SparseMatrix& a, const Vector& b, const SolverOptions& opts,
                            const std::optional<Vector>& guess) {
  require_square(a, b, "solve_nonsymmetric");
  if (!(opts.tol > 0.0)) throw ValidationError("solve_nonsymmetric: tolerance must be positive");
  if (b.norm() < kTinyRhs) return {Vector::Zero(b.size()), {0, 0.0, true}};
  if (guess && guess->size() != b.size()) throw ValidationError("solve_nonsymmetric: guess has wrong size");

  Eigen::BiCGSTAB<SparseMatrix, Eigen::DiagonalPreconditioner<double>> solver;
  return krylov_solve(solver, a, b, opts, guess ? *guess : Vector::Zero(b.size()), "solve_nonsymmetric");
}

Solution solve_diagonal_pivot_lu(const SparseMatrix& a, const Vector& b) {
  require_square(a, b, "solve_diagonal_pivot_lu");
  const Eigen::SparseMatrix<double> col_major = a;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.setPivotThreshold(0.0);
  lu.compute(col_major);
  if (lu.info() != Eigen::Success) {
    throw SolverError("solve_diagonal_pivot_lu: factorization failed: " + lu.lastErrorMessage(), {});
  }
  Solution out;
  out.x = lu.solve(b);
  out.stats.iterations = 1;
  out.stats.final_relative_residual = relative_residual(a, out.x, b);
  out.stats.converged = std::isfinite(out.stats.final_relative_residual);
  if (!out.stats.converged) throw SolverError("solve_diagonal_pivot_lu: non-finite solution", out.stats);
  return out;
}

Solution solve_spd(const SparseMatrix& a, const Vector& b, const SolverOptions& opts, Nullspace nullspace) {
  require_square(a, b, "solve_spd");
  if (!(opts.tol > 0.0)) throw ValidationError("solve_spd: tolerance must be positive");

  Vector rhs = b;
  if (nullspace == Nullspace::constants) rhs = remove_mean(b, "solve_spd");
  if (rhs.norm() < kTinyRhs) return {Vector::Zero(b.size()), {0, 0.0, true}};

  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>>
      solver;
  Solution out = krylov_solve(solver, a, rhs, opts, Vector::Zero(rhs.size()), "solve_spd");
  if (nullspace == Nullspace::constants) {
    out.x.array() -= out.x.mean();
    out.stats.final_relative_residual = relative_residual(a, out.x, rhs);
  }
  return out;
}

struct GroundedFactorization::Impl {
  SparseMatrix a;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

GroundedFactorization::GroundedFactorization(const SparseMatrix& a) : impl_(std::make_unique<Impl>()), n_(a.rows()) {
  if (a.rows() != a.cols()) throw ValidationError("GroundedFactorization: matrix is not square");
  if (n_ < 2) throw ValidationError("GroundedFactorization: need at least two unknowns");
  impl_->a = a;
  const Eigen::SparseMatrix<double> reduced = a.topLeftCorner(n_ - 1, n_ - 1);
  impl_->ldlt.compute(reduced);
  if (impl_->ldlt.info() != Eigen::Success) {
    throw SolverError("GroundedFactorization: matrix is not positive definite once grounded", {});
  }
}

GroundedFactorization::~GroundedFactorization() = default;
GroundedFactorization::GroundedFactorization(GroundedFactorization&&) noexcept = default;
GroundedFactorization& GroundedFactorization::operator=(GroundedFactorization&&) noexcept = default;

Vector GroundedFactorization::solve(const Vector& b) const {
  if (b.size() != n_) throw ValidationError("GroundedFactorization: dimension mismatch");
  const Vector rhs = remove_mean(b, "GroundedFactorization");
  Vector x = Vector::Zero(n_);
  x.head(n_ - 1) = impl_->ldlt.solve(rhs.head(n_ - 1));
  for (int pass = 0; pass < kRefinements; ++pass) {
    const Vector r = rhs - impl_->a * x;
    x.head(n_ - 1) += impl_->ldlt.solve(r.head(n_ - 1));
  }
  x.array() -= x.mean();
  return x;
}

}  // namespace manp
