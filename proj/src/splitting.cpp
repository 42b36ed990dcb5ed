#include "dys/splitting.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace dys {

void ThreeTermProblem::validate() const {
  if (!prox_f || !prox_g || !grad_h)
    throw InvalidArgument("ThreeTermProblem: prox_f, prox_g and grad_h are required");
  if (!(lipschitz_f > 0.0))
    throw InvalidArgument("ThreeTermProblem: L must be positive");
  if (!(lipschitz_h >= 0.0))
    throw InvalidArgument("ThreeTermProblem: beta must be nonnegative");
  if (modulus() > lipschitz_f)
    throw InvalidArgument("ThreeTermProblem: weak-convexity modulus exceeds L");
}

ProxOracle identity_prox() {
  return [](const Vector &v, double) { return v; };
}

GradientOracle zero_gradient() {
  return [](const Vector &v) { return Vector::Zero(v.size()).eval(); };
}

ValueOracle zero_value() {
  return [](const Vector &) { return 0.0; };
}

SplittingState SplittingState::initial(const Vector &x0) { return {x0, x0, x0, 0}; }

OracleError::OracleError(std::size_t iteration, const std::string &what)
    : std::runtime_error("oracle failure at iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

SplittingState dys_step(const ThreeTermProblem &problem, const SplittingState &state,
                        double gamma) {
  if (!(gamma > 0.0))
    throw InvalidArgument("dys_step: gamma must be positive");
  SplittingState next;
  next.t = state.t + 1;
  try {
    next.y = problem.prox_f(state.x, gamma);
    const Vector reflected = 2.0 * next.y - gamma * problem.grad_h(next.y) - state.x;
    next.z = problem.prox_g(reflected, gamma);
  } catch (const OracleError &) {
    throw;
  } catch (const std::exception &e) {
    throw OracleError(next.t, e.what());
  }
  next.x = state.x + (next.z - next.y);
  return next;
}

double lambda_threshold(double gamma, double L, double l, double beta) {
  const double inv = 1.0 / gamma;
  const double bracket = (-1.0 + 2.0 * gamma * l) + (1.0 + gamma * L) * (1.0 + gamma * L);
  return 0.5 * (inv - l) - beta - (inv + 0.5 * beta) * bracket;
}

double max_step_size(double L, double l, double beta) {
  constexpr double lo_limit = 1e-12;
  constexpr double hi_limit = 1e3;
  constexpr double ratio = 1.02;

  double lo = lo_limit;
  if (!(lambda_threshold(lo, L, l, beta) > 0.0))
    throw InvalidArgument("max_step_size: threshold not positive for small step sizes");
  double hi = lo;
  bool bracketed = false;
  while (hi < hi_limit) {
    const double next = std::min(hi * ratio, hi_limit);
    if (!(lambda_threshold(next, L, l, beta) > 0.0)) {
      lo = hi;
      hi = next;
      bracketed = true;
      break;
    }
    hi = next;
  }
  if (!bracketed)
    throw InvalidArgument("max_step_size: no sign change of the threshold on (1e-12, 1e3]");

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi)
      break;
    if (lambda_threshold(mid, L, l, beta) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double default_fixed_step(double L, double l, double beta) {
  return 0.99 * max_step_size(L, l, beta);
}

double energy(const ThreeTermProblem &problem, const SplittingState &state, double gamma) {
  if (!problem.has_values())
    throw DiagnosticsUnavailable();
  const Vector &x = state.x;
  const Vector &y = state.y;
  const Vector &z = state.z;
  const double g = problem.value_g(z);
  if (std::isinf(g) && g > 0.0)
    return std::numeric_limits<double>::infinity();
  const Vector gh = gamma * problem.grad_h(y);
  const double inv = 1.0 / gamma;
  return problem.value_f(y) + g + problem.value_h(y) +
         0.5 * inv * (2.0 * y - z - x - gh).squaredNorm() -
         0.5 * inv * (x - y + gh).squaredNorm() - inv * (y - z).squaredNorm();
}

double stationarity_bound(const SplittingState &state, double gamma, double L, double beta) {
  return (L + beta + 1.0 / gamma) * (state.z - state.y).norm();
}

void StepSizePolicy::validate() const {
  if (!(gamma0 > 0.0))
    throw InvalidArgument("StepSizePolicy: gamma0 must be positive");
  if (!(multiplier >= 1.0))
    throw InvalidArgument("StepSizePolicy: multiplier must be at least 1");
}

void StoppingRule::validate() const {
  if (!(eps_abs > 0.0) || !(eps_rel > 0.0))
    throw InvalidArgument("StoppingRule: tolerances must be positive");
  if (max_iter < 1)
    throw InvalidArgument("StoppingRule: max_iter must be at least 1");
}

void RunTrace::write_csv(std::ostream &os) const {
  const auto old_precision = os.precision(17);
  os << "iter,gamma,energy,dy_norm,zy_gap,r_primal,s_dual\n";
  for (const auto &r : records) {
    os << r.iter << ',' << r.gamma << ',';
    if (r.energy)
      os << *r.energy;
    os << ',' << r.dy_norm << ',' << r.zy_gap << ',' << r.r_primal << ',' << r.s_dual << '\n';
  }
  os.precision(old_precision);
}

double adapt_gamma(const StepSizePolicy &policy, double gamma, const RunTrace &trace) {
  if (!(gamma > policy.gamma0) || trace.empty())
    return gamma;
  const auto &last = trace.back();
  const double t = static_cast<double>(std::max<std::size_t>(last.iter, 1));
  const bool moving = last.dy_norm > policy.divergence_speed / t;
  const bool huge = last.y_inf > policy.magnitude_cap;
  if (moving || huge)
    return std::max(0.5 * gamma, policy.decay_floor * policy.gamma0);
  return gamma;
}

double primal_tolerance(const StoppingRule &rule, const TraceRecord &rec, Index dims) {
  return std::sqrt(static_cast<double>(dims)) * rule.eps_abs +
         rule.eps_rel * std::max(rec.y_norm, rec.z_norm);
}

double dual_tolerance(const StoppingRule &rule, const TraceRecord &rec, Index dims) {
  return std::sqrt(static_cast<double>(dims)) * rule.eps_abs + rule.eps_rel * rec.x_norm;
}

bool check_stop(const StoppingRule &rule, const RunTrace &trace, Index dims) {
  if (trace.empty())
    return false;
  const auto &rec = trace.back();
  switch (rule.mode) {
  case StopMode::residual_pair:
    return rec.r_primal <= primal_tolerance(rule, rec, dims) &&
           rec.s_dual <= dual_tolerance(rule, rec, dims);
  case StopMode::masked_relative:
    return rec.monitor.has_value() && *rec.monitor < rule.eps_rel;
  case StopMode::iterate_change:
    return rec.dx_norm / std::max(rec.prev_x_norm, 1.0) < rule.eps_rel;
  }
  return false;
}

const char *to_string(RunStatus s) {
  switch (s) {
  case RunStatus::converged:
    return "converged";
  case RunStatus::max_iter:
    return "max_iter";
  case RunStatus::diverged:
    return "diverged";
  }
  return "unknown";
}

namespace {

bool finite_state(const SplittingState &s, double cap) {
  return s.x.allFinite() && s.y.allFinite() && s.z.allFinite() &&
         (s.y.size() == 0 || s.y.cwiseAbs().maxCoeff() <= cap);
}

} // namespace

RunResult run(const ThreeTermProblem &problem, const Vector &x0, const StepControl &step,
              const StoppingRule &rule, const RunOptions &options) {
  problem.validate();
  rule.validate();
  require_finite(x0, "run: initial point");

  const StepSizePolicy *policy = std::get_if<StepSizePolicy>(&step);
  double gamma = policy ? policy->initial_gamma() : std::get<double>(step);
  if (policy)
    policy->validate();
  if (!(gamma > 0.0))
    throw InvalidArgument("run: step size must be positive");

  const bool with_energy = options.record_energy && problem.has_values();
  RunResult result;
  result.state = SplittingState::initial(x0);
  result.status = RunStatus::max_iter;

  while (result.state.t < rule.max_iter) {
    SplittingState next = dys_step(problem, result.state, gamma);
    if (!finite_state(next, options.blowup_cap)) {
      result.status = RunStatus::diverged;
      break;
    }

    TraceRecord rec;
    rec.iter = next.t;
    rec.gamma = gamma;
    rec.dy_norm = (next.y - result.state.y).norm();
    rec.zy_gap = (next.z - next.y).norm();
    rec.r_primal = rec.zy_gap;
    rec.s_dual = (next.z - result.state.z).norm() / gamma;
    rec.dx_norm = (next.x - result.state.x).norm();
    rec.prev_x_norm = result.state.x.norm();
    rec.x_norm = next.x.norm();
    rec.y_norm = next.y.norm();
    rec.z_norm = next.z.norm();
    rec.y_inf = next.y.size() ? next.y.cwiseAbs().maxCoeff() : 0.0;
    if (with_energy)
      rec.energy = energy(problem, next, gamma);
    if (options.monitor)
      rec.monitor = options.monitor(next);

    result.state = std::move(next);
    result.trace.records.push_back(rec);
    if (options.observer)
      options.observer(result.state, rec);

    if (check_stop(rule, result.trace, result.state.x.size())) {
      result.status = RunStatus::converged;
      break;
    }
    if (policy)
      gamma = adapt_gamma(*policy, gamma, result.trace);
  }
  result.gamma = result.trace.empty() ? gamma : result.trace.back().gamma;
  return result;
}

} // namespace dys
