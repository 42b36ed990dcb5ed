#include "dys/matcomp.hpp"

#include "dys/prox.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace dys {

namespace {

using ConstMap = Eigen::Map<const Matrix>;

Vector flatten(const Matrix &m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unflatten(const Vector &v, Index rows, Index cols) { return ConstMap(v.data(), rows, cols); }

bool rank_at_most(const Matrix &x, Index r) {
  if (r >= std::min(x.rows(), x.cols()))
    return true;
  Eigen::BDCSVD<Matrix> svd(x);
  const Vector &s = svd.singularValues();
  if (s(0) == 0.0)
    return true;
  return s(r) < 1e-8 * s(0);
}

TraceRecord baseline_record(std::size_t iter, double step, const Matrix &next, const Matrix &prev,
                            double monitor) {
  TraceRecord rec;
  rec.iter = iter;
  rec.gamma = step;
  rec.dx_norm = (next - prev).norm();
  rec.dy_norm = rec.dx_norm;
  rec.prev_x_norm = prev.norm();
  rec.x_norm = next.norm();
  rec.y_norm = rec.x_norm;
  rec.z_norm = rec.x_norm;
  rec.y_inf = next.size() ? next.cwiseAbs().maxCoeff() : 0.0;
  rec.monitor = monitor;
  return rec;
}

void finish(CompletionResult &result, const CompletionInstance &inst) {
  result.iterations = result.trace.size();
  if (inst.truth)
    result.relative_error = relative_error(result.X, *inst.truth);
}

} // namespace

void CompletionInstance::validate() const {
  if (obs.empty())
    throw InvalidArgument("CompletionInstance: no observed entries");
  if (rank < 1 || rank > std::min(rows(), cols()))
    throw InvalidArgument("CompletionInstance: rank must lie in [1, min(rows, cols)]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("CompletionInstance: lambda must be finite and nonnegative");
  if (truth && (truth->rows() != rows() || truth->cols() != cols()))
    throw InvalidArgument("CompletionInstance: ground truth shape mismatch");
}

StoppingRule completion_rule(std::size_t max_iter, double tol) {
  StoppingRule rule;
  rule.eps_abs = tol;
  rule.eps_rel = tol;
  rule.max_iter = max_iter;
  rule.mode = StopMode::masked_relative;
  return rule;
}

StepSizePolicy dys_completion_policy(double multiplier, double beta) {
  StepSizePolicy policy;
  policy.gamma0 = max_step_size(1.0, 0.0, beta);
  policy.multiplier = multiplier;
  return policy;
}

StepSizePolicy drs_completion_policy(double multiplier) { return dys_completion_policy(multiplier, 0.0); }

ThreeTermProblem completion_problem(const CompletionInstance &inst, const CompletionOptions &opts) {
  inst.validate();
  const Index rows = inst.rows();
  const Index cols = inst.cols();
  const Index rank = inst.rank;
  const double lambda = inst.lambda;
  auto obs = std::make_shared<const ObservationSet>(inst.obs);
  const SvdOptions svd = opts.svd;

  ThreeTermProblem p;
  p.prox_f = [=](const Vector &v, double gamma) {
    return flatten(prox_masked_quadratic(unflatten(v, rows, cols), *obs, gamma));
  };
  p.prox_g = [=](const Vector &v, double) {
    return flatten(rank_projection(unflatten(v, rows, cols), rank, svd));
  };
  p.grad_h = [=](const Vector &v) { return (lambda * v).eval(); };
  p.value_f = [=](const Vector &v) {
    double s = 0.0;
    for (const auto &e : obs->entries()) {
      const double d = v(e.col * rows + e.row) - e.value;
      s += d * d;
    }
    return 0.5 * s;
  };
  p.value_g = [=](const Vector &v) {
    return rank_at_most(unflatten(v, rows, cols), rank) ? 0.0
                                                        : std::numeric_limits<double>::infinity();
  };
  p.value_h = [=](const Vector &v) { return 0.5 * lambda * v.squaredNorm(); };
  p.lipschitz_f = 1.0;
  p.weak_convexity = 0.0;
  p.lipschitz_h = opts.beta.value_or(lambda);
  return p;
}

CompletionResult dys_complete(const CompletionInstance &inst, const StepControl &step,
                              const StoppingRule &rule, const CompletionOptions &opts) {
  const ThreeTermProblem problem = completion_problem(inst, opts);
  const Index rows = inst.rows();
  const Index cols = inst.cols();

  RunOptions run_opts;
  run_opts.record_energy = opts.record_energy;
  run_opts.observer = opts.observer;
  run_opts.monitor = [&](const SplittingState &s) {
    return masked_relative_residual(unflatten(s.z, rows, cols), inst.obs);
  };

  RunResult run_result = run(problem, Vector::Zero(rows * cols), step, rule, run_opts);

  CompletionResult out;
  out.X = unflatten(run_result.state.z, rows, cols);
  out.trace = std::move(run_result.trace);
  out.status = run_result.status;
  out.gamma = run_result.gamma;
  finish(out, inst);
  return out;
}

CompletionResult drs_complete(const CompletionInstance &inst, const StepControl &step,
                              const StoppingRule &rule, const CompletionOptions &opts) {
  CompletionInstance plain = inst;
  plain.lambda = 0.0;
  return dys_complete(plain, step, rule, opts);
}

CompletionResult svp_complete(const CompletionInstance &inst, const StoppingRule &rule,
                              const SvpOptions &opts) {
  inst.validate();
  rule.validate();
  const double p = inst.sampling_ratio();
  auto step = opts.step ? opts.step
                        : std::function<double(std::size_t)>([p](std::size_t t) {
                            return 1.0 / (p * std::sqrt(static_cast<double>(t)));
                          });

  CompletionResult out;
  Matrix x = Matrix::Zero(inst.rows(), inst.cols());
  for (std::size_t t = 1; t <= rule.max_iter; ++t) {
    const double eta = step(t);
    Matrix y = x;
    for (const auto &e : inst.obs.entries())
      y(e.row, e.col) -= eta * (x(e.row, e.col) - e.value);
    Matrix next = rank_projection(y, inst.rank, opts.svd);
    if (!next.allFinite()) {
      out.status = RunStatus::diverged;
      break;
    }
    const double residual = masked_relative_residual(next, inst.obs);
    out.trace.records.push_back(baseline_record(t, eta, next, x, residual));
    x = std::move(next);
    if (check_stop(rule, out.trace, x.size())) {
      out.status = RunStatus::converged;
      break;
    }
  }
  out.X = std::move(x);
  finish(out, inst);
  return out;
}

Matrix singular_value_shrink(const Matrix &y, double tau, Index &rank_hint, Index increment,
                             const SvdOptions &svd) {
  if (!(tau >= 0.0))
    throw InvalidArgument("singular_value_shrink: tau must be nonnegative");
  const Index max_rank = std::min(y.rows(), y.cols());
  Index k = std::clamp<Index>(rank_hint + 1, 1, max_rank);
  SvdTriplet trip = truncated_svd(y, k, svd);
  while (trip.S(k - 1) > tau && k < max_rank) {
    k = std::min(k + std::max<Index>(increment, 1), max_rank);
    trip = truncated_svd(y, k, svd);
  }
  Index kept = 0;
  while (kept < k && trip.S(kept) > tau)
    ++kept;
  rank_hint = kept;
  if (kept == 0)
    return Matrix::Zero(y.rows(), y.cols());
  const Vector shrunk = trip.S.head(kept).array() - tau;
  return trip.U.leftCols(kept) * shrunk.asDiagonal() * trip.V.leftCols(kept).transpose();
}

CompletionResult svt_complete(const CompletionInstance &inst, const StoppingRule &rule,
                              const SvtOptions &opts) {
  inst.validate();
  rule.validate();
  const double p = inst.sampling_ratio();
  const double tau =
      opts.tau.value_or(5.0 * std::sqrt(static_cast<double>(inst.rows()) * inst.cols()));
  const double delta = opts.delta.value_or(1.2 / p);
  if (!(tau > 0.0) || !(delta > 0.0))
    throw InvalidArgument("svt_complete: tau and delta must be positive");

  CompletionResult out;
  Matrix dual = Matrix::Zero(inst.rows(), inst.cols());
  Matrix primal = dual;
  Index rank_hint = 0;
  for (std::size_t t = 1; t <= rule.max_iter; ++t) {
    Matrix next = singular_value_shrink(dual, tau, rank_hint, opts.rank_increment, opts.svd);
    if (!next.allFinite()) {
      out.status = RunStatus::diverged;
      break;
    }
    const double residual = masked_relative_residual(next, inst.obs);
    out.trace.records.push_back(baseline_record(t, delta, next, primal, residual));
    primal = std::move(next);
    if (check_stop(rule, out.trace, primal.size())) {
      out.status = RunStatus::converged;
      break;
    }
    for (const auto &e : inst.obs.entries())
      dual(e.row, e.col) += delta * (e.value - primal(e.row, e.col));
    if (opts.observer)
      opts.observer(t, dual);
  }
  out.X = std::move(primal);
  finish(out, inst);
  return out;
}

double relative_error(const Matrix &x, const Matrix &m) {
  if (x.rows() != m.rows() || x.cols() != m.cols())
    throw InvalidArgument("relative_error: shape mismatch");
  const double denom = m.norm();
  if (!(denom > 0.0))
    throw InvalidArgument("relative_error: ||M|| is zero");
  return (x - m).norm() / denom;
}

double rmse(const Matrix &x, const ObservationSet &test) {
  if (test.empty())
    throw InvalidArgument("rmse: empty test set");
  if (x.rows() != test.rows() || x.cols() != test.cols())
    throw InvalidArgument("rmse: shape mismatch");
  double s = 0.0;
  for (const auto &e : test.entries()) {
    const double d = x(e.row, e.col) - e.value;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(test.size()));
}

} // namespace dys
