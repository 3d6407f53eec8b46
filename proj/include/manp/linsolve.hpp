#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <optional>

#include "manp/error.hpp"

namespace manp {

/// Compressed-row sparse matrix. Iteration order (and hence every product)
/// is deterministic.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct SolveStats {
  Eigen::Index iterations = 0;
  double final_relative_residual = 0.0;
  bool converged = false;
};

struct Solution {
  Vector x;
  SolveStats stats;
};

struct SolverOptions {
  double tol = 1e-12;
  /// 0 selects the default budget of 10 * n iterations.
  Eigen::Index maxit = 0;
};

/// Raised when an iterative solve misses its tolerance; carries the stats.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, SolveStats stats) : Error(what), stats_(stats) {}
  const SolveStats& stats() const { return stats_; }

 private:
  SolveStats stats_;
};

/// Checks compressed storage: nondecreasing offsets ending at nnz and column
/// indices inside [0, cols). Throws ValidationError otherwise.
void check_well_formed(const SparseMatrix& a);

Vector matvec(const SparseMatrix& a, const Vector& x);

/// ||a x - b|| / ||b||, or ||a x|| when b vanishes.
double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b);

/// Jacobi-preconditioned BiCGSTAB for the nonsymmetric transport systems.
/// The reported residual is recomputed from the returned x.
Solution solve_nonsymmetric(const SparseMatrix& a, const Vector& b, const SolverOptions& opts = {},
                            const std::optional<Vector>& guess = std::nullopt);

/// Sparse LU that always takes the diagonal pivot. For an M-matrix the
/// elimination then never subtracts, so a nonnegative right-hand side yields
/// a nonnegative solution even in floating point. Used as the fallback when
/// a Krylov solution of a transport system loses positivity.
Solution solve_diagonal_pivot_lu(const SparseMatrix& a, const Vector& b);

enum class Nullspace { none, constants };

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// (semi)definite systems. With Nullspace::constants the right-hand side
/// must have zero mean (relative to its max-norm, within 1e-10) and the
/// returned solution is the zero-mean one.
Solution solve_spd(const SparseMatrix& a, const Vector& b, const SolverOptions& opts = {},
                   Nullspace nullspace = Nullspace::none);

/// Sparse Cholesky (LDL^T) factorization of a symmetric positive
/// semidefinite matrix whose nullspace is the constants, made definite by
/// grounding the last unknown. Solves to rounding accuracy, which the
/// iterative solvers cannot reach on large grids.
class GroundedFactorization {
 public:
  explicit GroundedFactorization(const SparseMatrix& a);
  ~GroundedFactorization();
  GroundedFactorization(GroundedFactorization&&) noexcept;
  GroundedFactorization& operator=(GroundedFactorization&&) noexcept;

  Eigen::Index size() const { return n_; }
  /// Zero-mean x with a x = b. The right-hand side must have zero mean
  /// (relative to its max-norm, within 1e-10); the mean is removed first.
  Vector solve(const Vector& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index n_ = 0;
};

}  // namespace manp
