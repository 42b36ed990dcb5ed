#include "dys/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <utility>

namespace dys {

SvdNotConverged::SvdNotConverged(double residual, int iterations)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "truncated_svd: no convergence after " << iterations
           << " iterations (relative change " << residual << ")";
        return os.str();
      }()),
      residual_(residual), iterations_(iterations) {}

void require_finite(const Matrix &m, const char *what) {
  if (!m.allFinite())
    throw InvalidArgument(std::string(what) + ": non-finite entry");
}

void require_finite(const Vector &v, const char *what) {
  if (!v.allFinite())
    throw InvalidArgument(std::string(what) + ": non-finite entry");
}

ObservationSet::ObservationSet(Index rows, Index cols, std::vector<Entry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows < 0 || cols < 0)
    throw InvalidArgument("ObservationSet: negative shape");
  std::set<std::pair<Index, Index>> seen;
  for (const auto &e : entries_) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      throw InvalidArgument("ObservationSet: index out of bounds");
    if (!std::isfinite(e.value))
      throw InvalidArgument("ObservationSet: non-finite value");
    if (!seen.emplace(e.row, e.col).second)
      throw InvalidArgument("ObservationSet: duplicate index");
  }
}

double ObservationSet::sampling_ratio() const noexcept {
  if (rows_ == 0 || cols_ == 0)
    return 0.0;
  return static_cast<double>(entries_.size()) / (static_cast<double>(rows_) * cols_);
}

double ObservationSet::norm() const noexcept {
  double s = 0.0;
  for (const auto &e : entries_)
    s += e.value * e.value;
  return std::sqrt(s);
}

Matrix ObservationSet::to_dense() const {
  Matrix out = Matrix::Zero(rows_, cols_);
  for (const auto &e : entries_)
    out(e.row, e.col) = e.value;
  return out;
}

ObservationSet ObservationSet::with_values(const std::vector<double> &values) const {
  if (values.size() != entries_.size())
    throw InvalidArgument("ObservationSet::with_values: length mismatch");
  ObservationSet out = *this;
  for (std::size_t i = 0; i < values.size(); ++i)
    out.entries_[i].value = values[i];
  return out;
}

Matrix SvdTriplet::reconstruct() const { return U * S.asDiagonal() * V.transpose(); }

namespace {

Matrix orthonormal_basis(const Matrix &a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

SvdTriplet dense_svd(const Matrix &a, Index k) {
  SvdTriplet out;
  if (std::min(a.rows(), a.cols()) <= 64) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU().leftCols(k);
    out.S = svd.singularValues().head(k);
    out.V = svd.matrixV().leftCols(k);
  } else {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU().leftCols(k);
    out.S = svd.singularValues().head(k);
    out.V = svd.matrixV().leftCols(k);
  }
  return out;
}

SvdTriplet randomized_svd(const Matrix &a, Index k, const SvdOptions &opts) {
  const Index width = std::min(k + opts.oversample, std::min(a.rows(), a.cols()));
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  Matrix start(a.cols(), width);
  for (Index j = 0; j < width; ++j)
    for (Index i = 0; i < a.cols(); ++i)
      start(i, j) = normal(rng);

  Matrix q = orthonormal_basis(a * start);
  Vector previous = Vector::Constant(k, std::numeric_limits<double>::infinity());
  double change = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= opts.max_iterations; ++it) {
    q = orthonormal_basis(a * orthonormal_basis(a.transpose() * q));
    Matrix b = q.transpose() * a;
    Eigen::JacobiSVD<Matrix> small(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = small.singularValues().head(k);

    // Values far below the top one are pure rounding noise; measure them on
    // the sqrt(eps) * sigma_1 scale instead of their own.
    const double floor = std::sqrt(std::numeric_limits<double>::epsilon()) * s(0);
    change = 0.0;
    for (Index j = 0; j < k; ++j)
      change = std::max(change, std::abs(s(j) - previous(j)) / std::max(s(j), floor));
    previous = s;

    if (change < opts.tol) {
      SvdTriplet out;
      out.U = q * small.matrixU().leftCols(k);
      out.S = s;
      out.V = small.matrixV().leftCols(k);
      return out;
    }
  }
  throw SvdNotConverged(change, opts.max_iterations);
}

} // namespace

SvdTriplet truncated_svd(const Matrix &a, Index k, const SvdOptions &opts) {
  const Index min_dim = std::min(a.rows(), a.cols());
  if (k < 1 || k > min_dim)
    throw InvalidArgument("truncated_svd: k must lie in [1, min(rows, cols)]");
  if (!(opts.tol > 0.0))
    throw InvalidArgument("truncated_svd: tol must be positive");
  require_finite(a, "truncated_svd");

  if (a.squaredNorm() == 0.0) {
    SvdTriplet out;
    out.U = Matrix::Identity(a.rows(), k);
    out.S = Vector::Zero(k);
    out.V = Matrix::Identity(a.cols(), k);
    return out;
  }
  if (min_dim <= opts.dense_cutoff || k + opts.oversample >= min_dim)
    return dense_svd(a, k);
  return randomized_svd(a, k, opts);
}

ObservationSet project_omega(const Matrix &x, const ObservationSet &omega) {
  if (x.rows() != omega.rows() || x.cols() != omega.cols())
    throw InvalidArgument("project_omega: shape mismatch");
  std::vector<double> values;
  values.reserve(omega.size());
  for (const auto &e : omega.entries())
    values.push_back(x(e.row, e.col));
  return omega.with_values(values);
}

double masked_relative_residual(const Matrix &x, const ObservationSet &obs) {
  if (x.rows() != obs.rows() || x.cols() != obs.cols())
    throw InvalidArgument("masked_relative_residual: shape mismatch");
  const double denom = obs.norm();
  if (!(denom > 0.0))
    throw InvalidArgument("masked_relative_residual: ||P_Omega(M)|| is zero");
  double num = 0.0;
  for (const auto &e : obs.entries()) {
    const double d = x(e.row, e.col) - e.value;
    num += d * d;
  }
  return std::sqrt(num) / denom;
}

double spectral_norm_squared(const Matrix &a, double tol, int max_iterations) {
  if (a.size() == 0)
    return 0.0;
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  Vector v(a.cols());
  for (Index i = 0; i < v.size(); ++i)
    v(i) = normal(rng);
  v.normalize();

  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Vector w = a.transpose() * (a * v);
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0)
      return 0.0;
    v = w / wn;
    if (std::abs(next - estimate) <= tol * std::abs(next)) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

} // namespace dys
