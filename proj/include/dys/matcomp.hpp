#pragma once

#include "dys/linalg.hpp"
#include "dys/splitting.hpp"

#include <functional>
#include <optional>

namespace dys {

/// Matrix completion problem: recover M from P_Omega(M) with rank(X) <= rank.
struct CompletionInstance {
  ObservationSet obs;
  Index rank = 1;
  double lambda = 1.5e-6;
  /// Full ground truth, synthetic mode only. Solvers never read it.
  std::optional<Matrix> truth;

  Index rows() const noexcept { return obs.rows(); }
  Index cols() const noexcept { return obs.cols(); }
  double sampling_ratio() const noexcept { return obs.sampling_ratio(); }
  void validate() const;
};

struct CompletionResult {
  Matrix X;
  std::size_t iterations = 0;
  std::optional<double> relative_error;
  RunTrace trace;
  RunStatus status = RunStatus::max_iter;
  double gamma = 0.0;
};

/// Stop rule used by every completion solver: masked relative residual < 1e-4.
StoppingRule completion_rule(std::size_t max_iter = 1000, double tol = 1e-4);

/// Heuristic step policy for the regularized DYS iteration; gamma0 is the
/// threshold root for L = 1, l = 0 and the given beta (1 reproduces 0.15).
StepSizePolicy dys_completion_policy(double multiplier = 1e6, double beta = 1.0);
/// Same heuristic with the H-free threshold (beta = 0).
StepSizePolicy drs_completion_policy(double multiplier = 1e6);

struct CompletionOptions {
  SvdOptions svd;
  /// Compute Theta_gamma every iteration (costs a full SVD for the rank check).
  bool record_energy = false;
  /// beta reported to the engine (Lipschitz constant of grad H).
  std::optional<double> beta;
  std::function<void(const SplittingState &, const TraceRecord &)> observer;
};

/// The completion objective as an engine problem over vec(X) (column-major):
/// F = 1/2 ||P_Omega(X - M)||^2, G = indicator of rank <= r, H = lambda/2 ||X||^2.
ThreeTermProblem completion_problem(const CompletionInstance &inst, const CompletionOptions &opts = {});

CompletionResult dys_complete(const CompletionInstance &inst, const StepControl &step,
                              const StoppingRule &rule, const CompletionOptions &opts = {});

/// dys_complete with lambda = 0 (classical Douglas-Rachford).
CompletionResult drs_complete(const CompletionInstance &inst, const StepControl &step,
                              const StoppingRule &rule, const CompletionOptions &opts = {});

struct SvpOptions {
  /// Step size for iteration t >= 1; defaults to 1 / (p sqrt(t)).
  std::function<double(std::size_t)> step;
  SvdOptions svd;
};

CompletionResult svp_complete(const CompletionInstance &inst, const StoppingRule &rule,
                              const SvpOptions &opts = {});

struct SvtOptions {
  /// Defaults: tau = 5 sqrt(rows * cols), delta = 1.2 / p.
  std::optional<double> tau;
  std::optional<double> delta;
  Index rank_increment = 5;
  SvdOptions svd;
  std::function<void(std::size_t, const Matrix &dual)> observer;
};

/// Sum over sigma_j > tau of (sigma_j - tau) u_j v_j^T. `rank_hint` is the
/// starting number of singular values to compute; on return it holds the
/// number that exceeded tau.
Matrix singular_value_shrink(const Matrix &y, double tau, Index &rank_hint,
                             Index increment = 5, const SvdOptions &svd = {});

CompletionResult svt_complete(const CompletionInstance &inst, const StoppingRule &rule,
                              const SvtOptions &opts = {});

/// ||X - M||_F / ||M||_F.
double relative_error(const Matrix &x, const Matrix &m);

/// Root mean square error of X against held-out ratings.
double rmse(const Matrix &x, const ObservationSet &test);

} // namespace dys
