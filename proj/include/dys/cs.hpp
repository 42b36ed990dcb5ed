#pragma once

#include "dys/linalg.hpp"
#include "dys/prox.hpp"
#include "dys/splitting.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace dys {

/// Sparse recovery from b = A x_true (+ noise).
struct SensingInstance {
  Matrix A;
  Vector b;
  std::optional<Vector> x_true;
  double lambda = 1e-5;
  double rho = 1e-5;

  void validate() const;
};

/// Entries below this magnitude are treated as zero when scoring.
inline constexpr double truncation_threshold = 5e-6;
/// Relative error below which a recovery counts as a success.
inline constexpr double success_tolerance = 1e-4;

struct RecoveryMetrics {
  double relative_error = 0.0;
  bool success = false;
  std::size_t sparsity = 0;
};

/// Scores x_opt against x_true after zeroing entries with |x_i| < 5e-6.
RecoveryMetrics evaluate(const Vector &x_opt, const Vector &x_true);

struct RecoveryReport {
  Vector x_opt;
  bool success = false;
  std::optional<double> relative_error;
  std::size_t sparsity = 0;
  std::size_t iterations = 0;
  RunStatus status = RunStatus::max_iter;
  /// Iterations where grad(-lambda ||.||) was evaluated at ||y|| < 1e-12.
  std::size_t near_origin_hits = 0;
  /// lambda / min ||y|| over the run: local Lipschitz constant of grad H.
  std::optional<double> beta_estimate;
  double gamma = 0.0;
  RunTrace trace;
};

double lasso_objective(const Matrix &a, const Vector &b, double lambda, const Vector &x);
/// 1/2 ||Ax - b||^2 + lambda (||x||_1 - ||x||_2).
double l12_objective(const Matrix &a, const Vector &b, double lambda, const Vector &x);

/// Residual-pair rule with the recovery defaults (eps_abs 1e-7, eps_rel 1e-5).
StoppingRule recovery_rule(std::size_t max_iter = 50000);

/// Iterate and dual variable of an ADMM run, for warm starts.
struct AdmmState {
  Vector y;
  Vector z;
  Vector w; // scaled dual
};

/// ADMM for min 1/2||Ax - b||^2 - lambda <v, x> + lambda ||x||_1 (v = 0 gives the Lasso).
struct AdmmRun {
  AdmmState state;
  std::size_t iterations = 0;
  RunStatus status = RunStatus::max_iter;
  RunTrace trace;
};

AdmmRun admm_l1(const ShiftedGramSolver &solver, const Vector &b, double lambda, double rho,
                const Vector &linear, AdmmState start, const StoppingRule &rule);

RecoveryReport admm_lasso(const SensingInstance &inst, const StoppingRule &rule = recovery_rule());

struct DcaOptions {
  std::size_t outer_max = 10;
  StoppingRule inner = recovery_rule(5000);
  /// Outer stop: ||x^{k+1} - x^k|| / max(||x^k||, 1) < outer_tol.
  double outer_tol = 1e-2;
  /// Restart each inner ADMM from the previous outer solution.
  bool warm_start = true;
};

RecoveryReport dca_l12(const SensingInstance &inst, const DcaOptions &opts = {});

struct DysL12Options {
  /// Fixed step or heuristic policy. Unset: policy with gamma0 from the
  /// threshold at (L = ||A||^2, l = 0, beta_threshold) and `multiplier`.
  std::optional<StepControl> step;
  double multiplier = 1e6;
  double beta_threshold = 1.0;
  StoppingRule rule = recovery_rule();
  std::function<void(const SplittingState &, const TraceRecord &)> observer;
};

/// The l1-l2 model as an engine problem: F = 1/2||Ax - b||^2, G = lambda||x||_1,
/// H = -lambda||x||_2. `near_origin` (optional) counts gradient calls at ||y|| < 1e-12.
ThreeTermProblem l12_problem(const SensingInstance &inst, double lipschitz_f, double beta,
                             std::shared_ptr<std::size_t> near_origin = {});

RecoveryReport dys_l12(const SensingInstance &inst, const DysL12Options &opts = {});

} // namespace dys
