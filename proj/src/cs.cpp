#include "dys/cs.hpp"

#include <cmath>
#include <limits>

namespace dys {

void SensingInstance::validate() const {
  if (A.rows() < 1 || A.cols() < 1)
    throw InvalidArgument("SensingInstance: empty sensing matrix");
  if (b.size() != A.rows())
    throw InvalidArgument("SensingInstance: b length must equal rows of A");
  if (b.squaredNorm() == 0.0)
    throw InvalidArgument("SensingInstance: measurement b must be nonzero");
  if (x_true && x_true->size() != A.cols())
    throw InvalidArgument("SensingInstance: x_true length must equal columns of A");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("SensingInstance: lambda must be finite and nonnegative");
  if (!(rho > 0.0))
    throw InvalidArgument("SensingInstance: rho must be positive");
  require_finite(A, "SensingInstance A");
  require_finite(b, "SensingInstance b");
}

RecoveryMetrics evaluate(const Vector &x_opt, const Vector &x_true) {
  if (x_opt.size() != x_true.size())
    throw InvalidArgument("evaluate: length mismatch");
  const double denom = x_true.norm();
  if (!(denom > 0.0))
    throw InvalidArgument("evaluate: ground truth is zero");
  Vector truncated = x_opt;
  std::size_t nnz = 0;
  for (Index i = 0; i < truncated.size(); ++i) {
    if (std::abs(truncated(i)) < truncation_threshold)
      truncated(i) = 0.0;
    else
      ++nnz;
  }
  RecoveryMetrics m;
  m.relative_error = (truncated - x_true).norm() / denom;
  m.success = m.relative_error < success_tolerance;
  m.sparsity = nnz;
  return m;
}

double lasso_objective(const Matrix &a, const Vector &b, double lambda, const Vector &x) {
  return 0.5 * (a * x - b).squaredNorm() + lambda * x.lpNorm<1>();
}

double l12_objective(const Matrix &a, const Vector &b, double lambda, const Vector &x) {
  return 0.5 * (a * x - b).squaredNorm() + lambda * (x.lpNorm<1>() - x.norm());
}

StoppingRule recovery_rule(std::size_t max_iter) {
  StoppingRule rule;
  rule.eps_abs = 1e-7;
  rule.eps_rel = 1e-5;
  rule.max_iter = max_iter;
  rule.mode = StopMode::residual_pair;
  return rule;
}

AdmmRun admm_l1(const ShiftedGramSolver &solver, const Vector &b, double lambda, double rho,
                const Vector &linear, AdmmState start, const StoppingRule &rule) {
  rule.validate();
  const Index n = solver.matrix().cols();
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  // A^T b + lambda v + rho (z - w) = A^T b + rho (z - w + (lambda / rho) v)
  const Vector offset = (lambda / rho) * linear;

  AdmmRun out;
  out.state = std::move(start);
  auto &[y, z, w] = out.state;
  for (std::size_t k = 1; k <= rule.max_iter; ++k) {
    Vector y_next = solver.solve(b, z - w + offset, rho);
    Vector z_next = soft_threshold(y_next + w, lambda / rho);
    Vector w_next = w + y_next - z_next;
    if (!y_next.allFinite() || !z_next.allFinite() || !w_next.allFinite()) {
      out.status = RunStatus::diverged;
      break;
    }

    TraceRecord rec;
    rec.iter = k;
    rec.gamma = 1.0 / rho;
    rec.dy_norm = (y_next - y).norm();
    rec.r_primal = (y_next - z_next).norm();
    rec.zy_gap = rec.r_primal;
    rec.s_dual = rho * (z_next - z).norm();
    rec.y_norm = y_next.norm();
    rec.z_norm = z_next.norm();
    rec.prev_x_norm = rho * w.norm();
    rec.x_norm = rho * w_next.norm();
    rec.dx_norm = rho * (w_next - w).norm();
    rec.y_inf = y_next.cwiseAbs().maxCoeff();
    out.trace.records.push_back(rec);

    y = std::move(y_next);
    z = std::move(z_next);
    w = std::move(w_next);
    out.iterations = k;

    if (rec.r_primal <= sqrt_n * rule.eps_abs + rule.eps_rel * std::max(rec.y_norm, rec.z_norm) &&
        rec.s_dual <= sqrt_n * rule.eps_abs + rule.eps_rel * rec.x_norm) {
      out.status = RunStatus::converged;
      break;
    }
  }
  return out;
}

namespace {

AdmmState zero_admm_state(Index n) {
  return {Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
}

void score(RecoveryReport &report, const SensingInstance &inst) {
  if (!inst.x_true)
    return;
  const RecoveryMetrics m = evaluate(report.x_opt, *inst.x_true);
  report.relative_error = m.relative_error;
  report.success = m.success;
  report.sparsity = m.sparsity;
}

std::size_t count_sparsity(const Vector &x) {
  return static_cast<std::size_t>((x.array().abs() >= truncation_threshold).count());
}

} // namespace

RecoveryReport admm_lasso(const SensingInstance &inst, const StoppingRule &rule) {
  inst.validate();
  const ShiftedGramSolver solver(inst.A);
  const Index n = inst.A.cols();
  AdmmRun res = admm_l1(solver, inst.b, inst.lambda, inst.rho, Vector::Zero(n), zero_admm_state(n), rule);

  RecoveryReport report;
  report.x_opt = res.state.z;
  report.iterations = res.iterations;
  report.status = res.status;
  report.gamma = 1.0 / inst.rho;
  report.trace = std::move(res.trace);
  report.sparsity = count_sparsity(report.x_opt);
  score(report, inst);
  return report;
}

RecoveryReport dca_l12(const SensingInstance &inst, const DcaOptions &opts) {
  inst.validate();
  if (opts.outer_max < 1)
    throw InvalidArgument("dca_l12: outer_max must be at least 1");
  const ShiftedGramSolver solver(inst.A);
  const Index n = inst.A.cols();

  RecoveryReport report;
  Vector linearization_point = Vector::Zero(n);
  Vector outer = Vector::Zero(n);
  AdmmState warm = zero_admm_state(n);
  report.status = RunStatus::max_iter;

  for (std::size_t t = 0; t < opts.outer_max; ++t) {
    const double norm = linearization_point.norm();
    const Vector direction = norm > 0.0 ? Vector(linearization_point / norm) : Vector::Zero(n);
    AdmmRun inner = admm_l1(solver, inst.b, inst.lambda, inst.rho, direction,
                            opts.warm_start ? warm : zero_admm_state(n), opts.inner);
    report.iterations += inner.iterations;
    for (const auto &rec : inner.trace.records)
      report.trace.records.push_back(rec);
    if (inner.status == RunStatus::diverged) {
      report.status = RunStatus::diverged;
      break;
    }

    const Vector next = inner.state.z;
    const double change = (next - outer).norm() / std::max(outer.norm(), 1.0);
    linearization_point = inner.state.y;
    outer = next;
    warm = std::move(inner.state);
    if (change < opts.outer_tol) {
      report.status = RunStatus::converged;
      break;
    }
  }

  report.x_opt = outer;
  report.gamma = 1.0 / inst.rho;
  report.sparsity = count_sparsity(report.x_opt);
  score(report, inst);
  return report;
}

ThreeTermProblem l12_problem(const SensingInstance &inst, double lipschitz_f, double beta,
                             std::shared_ptr<std::size_t> near_origin) {
  inst.validate();
  const auto data = std::make_shared<LeastSquaresProx>(inst.A, inst.b);
  const double lambda = inst.lambda;

  ThreeTermProblem p;
  p.prox_f = [data](const Vector &x, double gamma) { return (*data)(x, gamma); };
  p.prox_g = [lambda](const Vector &v, double gamma) { return soft_threshold(v, gamma * lambda); };
  p.grad_h = [lambda, near_origin](const Vector &y) {
    if (near_origin && y.norm() < 1e-12)
      ++*near_origin;
    return grad_neg_l2(y, lambda);
  };
  p.value_f = [data](const Vector &x) { return data->value(x); };
  p.value_g = [lambda](const Vector &x) { return lambda * x.lpNorm<1>(); };
  p.value_h = [lambda](const Vector &x) { return -lambda * x.norm(); };
  p.lipschitz_f = lipschitz_f;
  p.weak_convexity = 0.0;
  p.lipschitz_h = beta;
  return p;
}

RecoveryReport dys_l12(const SensingInstance &inst, const DysL12Options &opts) {
  inst.validate();
  const double lipschitz = spectral_norm_squared(inst.A);
  auto near_origin = std::make_shared<std::size_t>(0);
  const ThreeTermProblem problem = l12_problem(inst, lipschitz, opts.beta_threshold, near_origin);

  StepControl step;
  if (opts.step) {
    step = *opts.step;
  } else {
    StepSizePolicy policy;
    policy.gamma0 = max_step_size(lipschitz, 0.0, opts.beta_threshold);
    policy.multiplier = opts.multiplier;
    step = policy;
  }

  double min_y = std::numeric_limits<double>::infinity();
  RunOptions run_opts;
  run_opts.observer = [&](const SplittingState &s, const TraceRecord &rec) {
    min_y = std::min(min_y, s.y.norm());
    if (opts.observer)
      opts.observer(s, rec);
  };
  RunResult res = run(problem, Vector::Zero(inst.A.cols()), step, opts.rule, run_opts);

  RecoveryReport report;
  report.x_opt = res.state.z;
  report.iterations = res.trace.size();
  report.status = res.status;
  report.gamma = res.gamma;
  report.near_origin_hits = *near_origin;
  if (min_y > 0.0 && std::isfinite(min_y))
    report.beta_estimate = inst.lambda / min_y;
  report.trace = std::move(res.trace);
  report.sparsity = count_sparsity(report.x_opt);
  score(report, inst);
  return report;
}

} // namespace dys
