#pragma once

#include "dys/linalg.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dys {

using ProxOracle = std::function<Vector(const Vector &, double)>;
using GradientOracle = std::function<Vector(const Vector &)>;
using ValueOracle = std::function<double(const Vector &)>;

/// Oracle bundle for min F(x) + G(x) + H(x).
///
/// F is handled through its prox and must have an L-Lipschitz gradient, G only
/// through its prox, H through its gradient (beta-Lipschitz). Value oracles are
/// optional; without all three the energy diagnostics are reported as
/// unavailable.
struct ThreeTermProblem {
  ProxOracle prox_f;
  ProxOracle prox_g;
  GradientOracle grad_h;
  ValueOracle value_f;
  ValueOracle value_g;
  ValueOracle value_h;
  double lipschitz_f = 1.0;
  /// Weak-convexity modulus l of F. Unset means "not certified", and L is used.
  std::optional<double> weak_convexity;
  double lipschitz_h = 0.0;

  double modulus() const { return weak_convexity.value_or(lipschitz_f); }
  bool has_values() const { return value_f && value_g && value_h; }
  void validate() const;
};

ProxOracle identity_prox();
GradientOracle zero_gradient();
ValueOracle zero_value();

struct SplittingState {
  Vector x;
  Vector y;
  Vector z;
  std::size_t t = 0;

  /// State before the first step: y and z are set to x0.
  static SplittingState initial(const Vector &x0);
};

class OracleError : public std::runtime_error {
public:
  OracleError(std::size_t iteration, const std::string &what);
  std::size_t iteration() const noexcept { return iteration_; }

private:
  std::size_t iteration_;
};

class DiagnosticsUnavailable : public std::runtime_error {
public:
  DiagnosticsUnavailable() : std::runtime_error("energy diagnostics unavailable: value oracles missing") {}
};

/// One pass of the three-operator iteration:
///   y' = prox_F(x), z' = prox_G(2y' - gamma grad_H(y') - x), x' = x + z' - y'.
SplittingState dys_step(const ThreeTermProblem &problem, const SplittingState &state, double gamma);

/// Descent coefficient
///   1/2 (1/gamma - l) - beta - (1/gamma + beta/2) [(-1 + 2 gamma l) + (1 + gamma L)^2].
double lambda_threshold(double gamma, double L, double l, double beta);

/// Smallest positive root of lambda_threshold in gamma (bisection).
double max_step_size(double L, double l, double beta);

/// Fixed step used when no policy is given: 0.99 of the threshold root.
double default_fixed_step(double L, double l, double beta);

/// Energy Theta_gamma(x, y, z). An infeasible z (G = +inf) yields +inf.
double energy(const ThreeTermProblem &problem, const SplittingState &state, double gamma);

/// (L + beta + 1/gamma) ||z - y||, an upper bound on dist(0, grad F + dG + grad H) at z.
double stationarity_bound(const SplittingState &state, double gamma, double L, double beta);

struct StepSizePolicy {
  double gamma0 = 0.15;
  double multiplier = 1e6;
  double decay_floor = 0.9999;
  double divergence_speed = 1000.0;
  double magnitude_cap = 1e10;

  double initial_gamma() const { return multiplier * gamma0; }
  void validate() const;
};

enum class StopMode { residual_pair, masked_relative, iterate_change };

struct StoppingRule {
  double eps_abs = 1e-7;
  double eps_rel = 1e-5;
  std::size_t max_iter = 50000;
  StopMode mode = StopMode::residual_pair;

  void validate() const;
};

struct TraceRecord {
  std::size_t iter = 0;
  double gamma = 0.0;
  std::optional<double> energy;
  double dy_norm = 0.0;  // ||y^t - y^{t-1}||
  double zy_gap = 0.0;   // ||z^t - y^t||
  double r_primal = 0.0; // ||y^t - z^t||
  double s_dual = 0.0;   // ||z^t - z^{t-1}|| / gamma
  double dx_norm = 0.0;  // ||x^t - x^{t-1}||
  double prev_x_norm = 0.0;
  double x_norm = 0.0;
  double y_norm = 0.0;
  double z_norm = 0.0;
  double y_inf = 0.0;
  std::optional<double> monitor;
};

struct RunTrace {
  std::vector<TraceRecord> records;

  bool empty() const noexcept { return records.empty(); }
  std::size_t size() const noexcept { return records.size(); }
  const TraceRecord &back() const { return records.back(); }
  /// Columns: iter, gamma, energy, dy_norm, zy_gap, r_primal, s_dual.
  void write_csv(std::ostream &os) const;
};

/// Step-size heuristic: halve gamma (not below decay_floor * gamma0) while it
/// exceeds gamma0 and the latest record shows fast motion or a huge iterate.
double adapt_gamma(const StepSizePolicy &policy, double gamma, const RunTrace &trace);

/// Threshold the primal residual is compared against in residual_pair mode.
double primal_tolerance(const StoppingRule &rule, const TraceRecord &rec, Index dims);
double dual_tolerance(const StoppingRule &rule, const TraceRecord &rec, Index dims);

/// True iff the latest record satisfies the rule's convergence test (the
/// iteration cap is handled by run()).
bool check_stop(const StoppingRule &rule, const RunTrace &trace, Index dims);

enum class RunStatus { converged, max_iter, diverged };
const char *to_string(RunStatus s);

using StepControl = std::variant<double, StepSizePolicy>;

struct RunOptions {
  /// Record Theta_gamma each iteration when value oracles exist.
  bool record_energy = true;
  /// Problem-specific scalar stored in TraceRecord::monitor (masked_relative mode reads it).
  std::function<double(const SplittingState &)> monitor;
  /// Called after every accepted step.
  std::function<void(const SplittingState &, const TraceRecord &)> observer;
  /// Divergence guard on ||y||_inf.
  double blowup_cap = 1e30;
};

struct RunResult {
  SplittingState state;
  RunTrace trace;
  RunStatus status = RunStatus::max_iter;
  double gamma = 0.0; // step size of the final step
};

RunResult run(const ThreeTermProblem &problem, const Vector &x0, const StepControl &step,
              const StoppingRule &rule, const RunOptions &options = {});

} // namespace dys
