#include "dys/prox.hpp"

#include <cassert>
#include <cmath>

namespace dys {

void ProxParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw InvalidArgument("ProxParams: gamma must be positive and finite");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("ProxParams: lambda must be finite and nonnegative");
}

Vector soft_threshold(const Vector &v, double kappa) {
  if (!(kappa >= 0.0))
    throw InvalidArgument("soft_threshold: threshold must be nonnegative");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i)) - kappa;
    out(i) = mag > 0.0 ? std::copysign(mag, v(i)) : 0.0;
  }
  return out;
}

Matrix rank_projection(const Matrix &y, Index r, const SvdOptions &opts) {
  if (r < 1 || r > std::min(y.rows(), y.cols()))
    throw InvalidArgument("rank_projection: r must lie in [1, min(rows, cols)]");
  return truncated_svd(y, r, opts).reconstruct();
}

Matrix prox_masked_quadratic(const Matrix &x, const ObservationSet &obs, double gamma) {
  if (x.rows() != obs.rows() || x.cols() != obs.cols())
    throw InvalidArgument("prox_masked_quadratic: shape mismatch");
  if (!(gamma > 0.0))
    throw InvalidArgument("prox_masked_quadratic: gamma must be positive");
  Matrix out = x;
  const double scale = 1.0 / (1.0 + gamma);
  for (const auto &e : obs.entries())
    out(e.row, e.col) = scale * (x(e.row, e.col) + gamma * e.value);
  return out;
}

ShiftedGramSolver::ShiftedGramSolver(Matrix a) : a_(std::move(a)) {
  require_finite(a_, "ShiftedGramSolver");
  gram_ = wide() ? Matrix(a_ * a_.transpose()) : Matrix(a_.transpose() * a_);
}

Vector ShiftedGramSolver::solve(const Vector &u, const Vector &v, double shift) const {
  if (!(shift > 0.0))
    throw InvalidArgument("ShiftedGramSolver: shift must be positive");
  if (u.size() != a_.rows() || v.size() != a_.cols())
    throw InvalidArgument("ShiftedGramSolver: right-hand side length mismatch");
  std::lock_guard lock(mutex_);
  if (!shift_ || *shift_ != shift) {
    Matrix shifted = gram_;
    shifted.diagonal().array() += shift;
    llt_.compute(shifted);
    // Positive definite for shift > 0.
    assert(llt_.info() == Eigen::Success);
    shift_ = shift;
    ++factorizations_;
  }
  if (wide())
    return v + a_.transpose() * llt_.solve(u - a_ * v);
  return llt_.solve(a_.transpose() * u + shift * v);
}

int ShiftedGramSolver::factorizations() const noexcept {
  std::lock_guard lock(mutex_);
  return factorizations_;
}

LeastSquaresProx::LeastSquaresProx(Matrix a, Vector b)
    : solver_(std::make_shared<ShiftedGramSolver>(std::move(a))), b_(std::move(b)) {
  if (b_.size() != solver_->matrix().rows())
    throw InvalidArgument("LeastSquaresProx: b length must equal rows of A");
}

Vector LeastSquaresProx::operator()(const Vector &x, double gamma) const {
  if (!(gamma > 0.0))
    throw InvalidArgument("prox_least_squares: gamma must be positive");
  if (x.size() != solver_->matrix().cols())
    throw InvalidArgument("prox_least_squares: x length must equal columns of A");
  return solver_->solve(b_, x, 1.0 / gamma);
}

double LeastSquaresProx::value(const Vector &x) const {
  return 0.5 * (solver_->matrix() * x - b_).squaredNorm();
}

Vector LeastSquaresProx::gradient(const Vector &x) const {
  return solver_->matrix().transpose() * (solver_->matrix() * x - b_);
}

Vector prox_least_squares(const Matrix &a, const Vector &b, const Vector &x, double gamma) {
  return LeastSquaresProx(a, b)(x, gamma);
}

Matrix grad_frobenius_reg(const Matrix &x, double lambda) { return lambda * x; }

Vector grad_neg_l2(const Vector &y, double lambda) {
  if (!(lambda >= 0.0))
    throw InvalidArgument("grad_neg_l2: lambda must be nonnegative");
  const double n = y.norm();
  if (n == 0.0)
    return Vector::Zero(y.size());
  return (-lambda / n) * y;
}

} // namespace dys
