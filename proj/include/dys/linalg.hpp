#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dys {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a numeric input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by truncated_svd when subspace iteration hits its cap.
class SvdNotConverged : public std::runtime_error {
public:
  SvdNotConverged(double residual, int iterations);
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

void require_finite(const Matrix &m, const char *what);
void require_finite(const Vector &v, const char *what);

struct Entry {
  Index row;
  Index col;
  double value;
};

/// Sparse set of observed entries of a rows x cols matrix (P_Omega(M)).
///
/// Entries are kept in the order given; indices must be unique and in bounds.
class ObservationSet {
public:
  ObservationSet() = default;
  ObservationSet(Index rows, Index cols, std::vector<Entry> entries);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<Entry> &entries() const noexcept { return entries_; }

  /// Fraction of observed entries, |Omega| / (rows * cols).
  double sampling_ratio() const noexcept;
  double norm() const noexcept;

  /// Dense matrix equal to the observed values on Omega and zero elsewhere.
  Matrix to_dense() const;
  /// Same index set with the values replaced by `values` (length must match).
  ObservationSet with_values(const std::vector<double> &values) const;

private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Entry> entries_;
};

struct SvdTriplet {
  Matrix U; // rows x k
  Vector S; // k, nonincreasing
  Matrix V; // cols x k

  Index rank() const noexcept { return S.size(); }
  Matrix reconstruct() const;
};

struct SvdOptions {
  double tol = 1e-10;
  int max_iterations = 500;
  Index oversample = 8;
  /// Matrices whose smaller dimension is at most this use a full dense SVD.
  Index dense_cutoff = 64;
  std::uint64_t seed = 0x5eed5eedULL;
};

/// Top-k singular triplets of `a`.
///
/// Small matrices go through a dense SVD. Larger ones use block randomized
/// subspace iteration with k + oversample columns, iterating until the top-k
/// singular values change by less than `tol` relatively. The random start is
/// drawn from `seed`, so the result is a deterministic function of the inputs.
SvdTriplet truncated_svd(const Matrix &a, Index k, const SvdOptions &opts = {});

/// Values of X at the indices of `omega`.
ObservationSet project_omega(const Matrix &x, const ObservationSet &omega);

/// ||P_Omega(X - M)||_F / ||P_Omega(M)||_F where obs holds P_Omega(M).
double masked_relative_residual(const Matrix &x, const ObservationSet &obs);

/// Largest eigenvalue of A^T A (squared spectral norm), by power iteration.
double spectral_norm_squared(const Matrix &a, double tol = 1e-12, int max_iterations = 10000);

} // namespace dys
