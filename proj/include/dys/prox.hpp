#pragma once

#include "dys/linalg.hpp"

#include <memory>
#include <mutex>
#include <optional>

namespace dys {

struct ProxParams {
  double gamma = 1.0;
  double lambda = 0.0;

  void validate() const;
};

/// Componentwise sign(v) * max(|v| - kappa, 0), the prox of kappa * ||.||_1.
Vector soft_threshold(const Vector &v, double kappa);

/// Nearest matrix of rank at most r (top-r truncated SVD). Ties at the cutoff
/// keep the first r values in the computed order.
Matrix rank_projection(const Matrix &y, Index r, const SvdOptions &opts = {});

/// Prox of 1/2 ||P_Omega(.) - P_Omega(M)||^2 with step gamma. Observed entries
/// become (X_ij + gamma M_ij) / (1 + gamma); the rest are copied from X.
Matrix prox_masked_quadratic(const Matrix &x, const ObservationSet &obs, double gamma);

/// Solves (A^T A + c I) y = A^T u + c v for a fixed A.
///
/// Wide matrices (rows < cols) factor the small system A A^T + c I and use
/// y = v + A^T (A A^T + c I)^{-1} (u - A v); otherwise A^T A + c I is factored.
/// The Cholesky factor for the last shift c is cached, so repeated calls with
/// an unchanged step size only pay for the triangular solves. Calls from
/// several threads are serialized on the cache.
class ShiftedGramSolver {
public:
  explicit ShiftedGramSolver(Matrix a);

  const Matrix &matrix() const noexcept { return a_; }
  Vector solve(const Vector &u, const Vector &v, double shift) const;
  /// Number of factorizations performed so far.
  int factorizations() const noexcept;

private:
  bool wide() const noexcept { return a_.rows() < a_.cols(); }

  Matrix a_;
  Matrix gram_;
  mutable std::mutex mutex_;
  mutable std::optional<double> shift_;
  mutable Eigen::LLT<Matrix> llt_;
  mutable int factorizations_ = 0;
};

/// Prox of 1/2 ||A . - b||^2: (A^T A + I/gamma)^{-1} (A^T b + x/gamma).
class LeastSquaresProx {
public:
  LeastSquaresProx(Matrix a, Vector b);

  Vector operator()(const Vector &x, double gamma) const;
  double value(const Vector &x) const;
  Vector gradient(const Vector &x) const;

  const ShiftedGramSolver &solver() const noexcept { return *solver_; }

private:
  std::shared_ptr<ShiftedGramSolver> solver_;
  Vector b_;
};

/// One-shot form of LeastSquaresProx (no caching across calls).
Vector prox_least_squares(const Matrix &a, const Vector &b, const Vector &x, double gamma);

/// Gradient of (lambda/2) ||X||_F^2.
Matrix grad_frobenius_reg(const Matrix &x, double lambda);

/// Gradient of -lambda ||y||_2, i.e. -lambda y / ||y||. At y = 0 the zero
/// subgradient is returned.
Vector grad_neg_l2(const Vector &y, double lambda);

} // namespace dys
