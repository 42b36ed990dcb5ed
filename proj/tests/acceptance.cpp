// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include "dys/cs.hpp"
#include "dys/datagen.hpp"
#include "dys/experiment.hpp"
#include "dys/matcomp.hpp"
#include "dys/prox.hpp"
#include "dys/splitting.hpp"
#include "oracles.hpp"
#include "problems.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace dys;
using testprob::Regularizer;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string &detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_diff(const Vector &a, const Vector &b) { return (a - b).norm() / std::max(1.0, b.norm()); }

std::vector<SplittingState> trajectory(const ThreeTermProblem &p, const Vector &x0, double gamma, std::size_t steps) {
  std::vector<SplittingState> out{SplittingState::initial(x0)};
  for (std::size_t t = 0; t < steps; ++t)
    out.push_back(dys_step(p, out.back(), gamma));
  return out;
}

// One converged run for the certificate check.
struct Certificate {
  std::string label;
  double bound = 0.0;
  double scale = 0.0;
  double gap_ratio = 0.0; // final ||z - y|| over the largest along the run
};

std::vector<Certificate> certificates;

void add_certificate(const std::string &label, const RunTrace &trace, double gamma, double L, double beta,
                     double scale) {
  double peak = 0.0;
  for (const auto &r : trace.records)
    peak = std::max(peak, r.zy_gap);
  const double last = trace.back().zy_gap;
  certificates.push_back({label, (L + beta + 1.0 / gamma) * last, scale, peak > 0.0 ? last / peak : 0.0});
}

// Trajectories shared by criteria 3 and 4.
struct Instance3 {
  testprob::Instance inst;
  std::vector<SplittingState> traj;
};
std::vector<Instance3> descent_runs;
double descent_gamma = 0.0;

void criterion1() {
  const auto start = Clock::now();
  const double g = max_step_size(1.0, 0.0, 1.0);
  const double secs = seconds_since(start);
  report(1, g >= 0.14 && g <= 0.16 && secs < 1.0, fmt("gamma0(1,0,1) = %.6f in %.3g s", g, secs));
}

void criterion2() {
  const double a = lambda_threshold(0.1, 1.0, 0.0, 1.0);
  const double b = lambda_threshold(1e-6, 1.0, 0.0, 1.0);
  report(2, std::abs(a - 1.795) <= 1e-9 && b > 1e5, fmt("Lambda(0.1) = %.12f, Lambda(1e-6) = %.6g", a, b));
}

void criterion3() {
  const auto start = Clock::now();
  std::mt19937_64 rng(3003);
  descent_gamma = 0.99 * max_step_size(1.0, 0.0, 1.0);
  const double lam = lambda_threshold(descent_gamma, 1.0, 0.0, 1.0);
  std::size_t checked = 0, violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    const Index n = 5 + (k * 45) / 19;
    Instance3 run{testprob::random_instance(n, k % 2 ? Regularizer::box : Regularizer::l1, rng), {}};
    run.traj = trajectory(run.inst.problem, 3.0 * oracle::gaussian(n, rng), descent_gamma, 400);
    for (std::size_t t = 1; t + 1 < run.traj.size(); ++t) {
      const double drop = energy(run.inst.problem, run.traj[t], descent_gamma) -
                          energy(run.inst.problem, run.traj[t + 1], descent_gamma);
      const double need = lam * (run.traj[t + 1].y - run.traj[t].y).squaredNorm();
      ++checked;
      worst = std::min(worst, drop - need);
      if (!(drop >= -1e-9 && drop >= need - 1e-9))
        ++violations;
    }
    descent_runs.push_back(std::move(run));
  }
  const double secs = seconds_since(start);
  report(3, violations == 0 && secs < 30.0,
         fmt("%zu steps on 20 instances, %zu violations, min slack %.3g, %.2f s", checked, violations, worst, secs));
}

void criterion4() {
  std::mt19937_64 rng(4004);
  double worst_identity = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vector a = oracle::gaussian(8, rng), b = oracle::gaussian(8, rng);
    const Vector c = oracle::gaussian(8, rng), d = oracle::gaussian(8, rng);
    const double lhs = (2.0 * a - b - c - d).squaredNorm() - (a - c - d).squaredNorm();
    const double rhs = ((a - c).squaredNorm() - (b - c).squaredNorm()) + 2.0 * (a - b).squaredNorm() + 2.0 * d.dot(b - a);
    const double scale = (2.0 * a - b - c - d).squaredNorm() + (a - c - d).squaredNorm();
    worst_identity = std::max(worst_identity, std::abs(lhs - rhs) / scale);
  }

  std::size_t bound_violations = 0, bound_checks = 0;
  const double g = descent_gamma;
  for (const auto &run : descent_runs)
    for (std::size_t t = 1; t + 1 < run.traj.size(); ++t) {
      const double lhs = (run.traj[t].x - run.traj[t - 1].x).norm();
      const double rhs = (1.0 + g * run.inst.problem.lipschitz_f) * (run.traj[t + 1].y - run.traj[t].y).norm();
      ++bound_checks;
      if (lhs > rhs * (1.0 + 1e-12) + 1e-14)
        ++bound_violations;
    }

  auto inst = testprob::random_instance(12, Regularizer::l1, rng);
  const auto &p = inst.problem;
  double worst_collapse = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vector x = oracle::gaussian(12, rng), y = oracle::gaussian(12, rng);
    const double obj = p.value_f(y) + p.value_g(y) + p.value_h(y);
    worst_collapse = std::max(worst_collapse, std::abs(energy(p, {x, y, y, 1}, 0.2) - obj) / std::max(1.0, std::abs(obj)));
  }
  report(4, worst_identity <= 1e-10 && bound_violations == 0 && worst_collapse <= 1e-12,
         fmt("identity rel err %.2g, x-difference bound %zu/%zu violations, Theta(x,y,y) rel err %.2g",
             worst_identity, bound_violations, bound_checks, worst_collapse));
}

void criterion5() {
  std::mt19937_64 rng(5005);
  double drs_err = 0.0, fbs_err = 0.0;
  for (auto reg : {Regularizer::l1, Regularizer::box}) {
    auto inst = testprob::random_instance(10, reg, rng);
    inst.problem.grad_h = zero_gradient();
    oracle::DrsState d{oracle::gaussian(10, rng), {}, {}};
    auto s = SplittingState::initial(d.x);
    for (int t = 0; t < 200; ++t) {
      s = dys_step(inst.problem, s, 0.7);
      d = oracle::drs_step(inst.problem.prox_f, inst.problem.prox_g, d.x, 0.7);
      drs_err = std::max({drs_err, rel_diff(s.x, d.x), rel_diff(s.y, d.y), rel_diff(s.z, d.z)});
    }
  }
  for (auto reg : {Regularizer::l1, Regularizer::box}) {
    auto inst = testprob::random_instance(10, reg, rng);
    inst.problem.prox_f = identity_prox();
    Vector x = oracle::gaussian(10, rng);
    auto s = SplittingState::initial(x);
    for (int t = 0; t < 200; ++t) {
      s = dys_step(inst.problem, s, 0.5);
      x = oracle::fbs_step(inst.problem.prox_g, inst.problem.grad_h, x, 0.5);
      fbs_err = std::max({fbs_err, rel_diff(s.x, x), rel_diff(s.z, x)});
    }
  }
  report(5, drs_err <= 1e-12 && fbs_err <= 1e-12,
         fmt("max deviation over 200 iterations: DRS %.2g, FBS %.2g", drs_err, fbs_err));
}

void criterion6() {
  std::mt19937_64 rng(6006);
  const Matrix a = oracle::gaussian(20, 50, rng);
  const Vector b = oracle::gaussian(20, rng);
  const double lambda = 0.1;
  StoppingRule tight;
  tight.eps_abs = 1e-13;
  tight.eps_rel = 1e-13;
  tight.max_iter = 200000;

  const double f_ref = lasso_objective(a, b, lambda, oracle::lasso_fista(a, b, lambda));
  const auto admm = admm_lasso(SensingInstance{a, b, std::nullopt, lambda, 1.0}, tight);
  const double f_admm = lasso_objective(a, b, lambda, admm.x_opt);

  const double L = spectral_norm_squared(a);
  const LeastSquaresProx ls(a, b);
  ThreeTermProblem p;
  p.prox_f = [ls](const Vector &v, double g) { return ls(v, g); };
  p.prox_g = [lambda](const Vector &v, double g) { return soft_threshold(v, g * lambda); };
  p.grad_h = zero_gradient();
  p.lipschitz_f = L;
  p.weak_convexity = 0.0;
  // The fixed threshold step is about 1/(5L); convergence to 1e-13 takes ~6e5 steps.
  StoppingRule long_rule = tight;
  long_rule.max_iter = 2000000;
  const auto dys = run(p, Vector::Zero(50), default_fixed_step(L, 0.0, 0.0), long_rule);
  const double f_dys = lasso_objective(a, b, lambda, dys.state.z);
  if (dys.status == RunStatus::converged)
    add_certificate("lasso DYS", dys.trace, dys.gamma, L, 0.0, primal_tolerance(long_rule, dys.trace.back(), 50));

  const double spread = std::max({f_ref, f_admm, f_dys}) - std::min({f_ref, f_admm, f_dys});
  report(6, spread < 1e-6,
         fmt("objectives FISTA %.10f, ADMM %.10f, DYS %.10f (%zu iterations), spread %.2g", f_ref, f_admm, f_dys,
             dys.trace.size(), spread));
}

void criterion7() {
  const auto start = Clock::now();
  const Index n = 300, r = 10;
  const double p = 0.3;
  int dys_ok = 0, dys_faster = 0;
  std::string detail;
  for (std::uint64_t t = 0; t < 5; ++t) {
    const auto seed = trial_seed({1}, t);
    const auto lr = gen_low_rank(n, r, seed);
    const auto omega = sample_omega(n, n, static_cast<std::size_t>(std::llround(p * n * n)), seed);
    const CompletionInstance inst{project_omega(lr.M, omega), r, 1.5e-6, lr.M};
    const auto rule = completion_rule();
    const auto dys = dys_complete(inst, dys_completion_policy(), rule);
    const auto drs = drs_complete(inst, drs_completion_policy(), rule);
    const double err = dys.relative_error.value_or(INFINITY);
    dys_ok += dys.status == RunStatus::converged && err < 1e-3 && dys.iterations < 300;
    dys_faster += dys.iterations < drs.iterations;
    const double scale = rule.eps_rel * inst.obs.norm();
    if (dys.status == RunStatus::converged)
      add_certificate("completion DYS", dys.trace, dys.gamma, 1.0, inst.lambda, scale);
    if (drs.status == RunStatus::converged)
      add_certificate("completion DRS", drs.trace, drs.gamma, 1.0, 0.0, scale);
    detail += fmt(" [%zu vs %zu, err %.1e]", dys.iterations, drs.iterations, err);
  }
  const double secs = seconds_since(start);
  report(7, dys_ok == 5 && dys_faster >= 4 && secs < 300.0,
         fmt("DYS ok %d/5, DYS fewer iterations %d/5, %.1f s; DYS vs DRS iterations:", dys_ok, dys_faster, secs) +
             detail);
}

void criterion8() {
  const auto start = Clock::now();
  const Index m = 100, n = 1500, s = 5;
  const int F = 10;
  int successes = 0, dys_not_worse = 0;
  double err_sum = 0.0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    const auto seed = trial_seed({1}, t);
    const Matrix a = gen_dct_matrix(m, n, F, seed);
    const Vector x = gen_sparse_signal(n, s, 2 * F, seed);
    const SensingInstance clean{a, a * x, x, 1e-5, 1e-5};
    const auto rep = dys_l12(clean);
    if (rep.success) {
      ++successes;
      err_sum += *rep.relative_error;
    }
    if (rep.status == RunStatus::converged)
      add_certificate("sensing DYS", rep.trace, rep.gamma, spectral_norm_squared(a), 1.0,
                      primal_tolerance(recovery_rule(), rep.trace.back(), n));

    const SensingInstance noisy{a, add_noise(a * x, 0.01, seed), x, 1e-5, 1e-5};
    const auto dys = dys_l12(noisy);
    const auto dca = dca_l12(noisy);
    dys_not_worse += *dys.relative_error <= *dca.relative_error;
  }
  const double mean_err = successes ? err_sum / successes : INFINITY;
  const double secs = seconds_since(start);
  const bool noiseless = successes >= 8 && mean_err < 1e-4;
  const bool noisy = dys_not_worse >= 6;
  report(8, noiseless && noisy && secs < 600.0,
         fmt("noiseless success %d/10 (mean error %.2e) %s; noisy DYS <= DCA on %d/10 %s; %.1f s", successes,
             mean_err, noiseless ? "ok" : "below threshold", dys_not_worse, noisy ? "ok" : "below threshold", secs));
}

void criterion9() {
  int above = 0;
  std::string detail;
  for (std::uint64_t t = 0; t < 5; ++t) {
    const double mu = mutual_coherence(gen_dct_matrix(100, 2000, 10, trial_seed({1}, t)));
    above += mu > 0.99;
    detail += fmt(" %.4f", mu);
  }
  report(9, above == 5, fmt("coherence > 0.99 on %d/5 seeds:", above) + detail);
}

void criterion10() {
  std::size_t ok = 0;
  double worst_ratio = 0.0, worst_gap = 0.0;
  std::string worst_label;
  for (const auto &c : certificates) {
    const double ratio = c.bound / c.scale;
    const bool pass = ratio < 10.0 && c.gap_ratio < 1e-2;
    ok += pass;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_label = c.label;
    }
    worst_gap = std::max(worst_gap, c.gap_ratio);
  }
  report(10, !certificates.empty() && ok == certificates.size(),
         fmt("%zu/%zu converged runs certified; worst bound/tolerance %.3g (%s); worst final/peak ||z-y|| %.2g", ok,
             certificates.size(), worst_ratio, worst_label.c_str(), worst_gap));
}

std::string csv_of(const ExperimentConfig &cfg) {
  std::ostringstream os;
  run_experiment(cfg).write_csv(os);
  return os.str();
}

void criterion11() {
  auto mc = preset("table1-desk");
  mc.trials = 3;
  mc.matcomp.sizes = {60};
  mc.matcomp.ranks = {3};
  auto cs = preset("cs-noise-desk");
  cs.trials = 3;
  cs.cs.n = 300;
  cs.cs.rows = {40};
  cs.cs.sigmas = {0.01};
  bool same = true;
  for (auto cfg : {mc, cs}) {
    const auto first = csv_of(cfg);
    same = same && first == csv_of(cfg);
    cfg.threads = 3;
    same = same && first == csv_of(cfg);
  }
  report(11, same, same ? "reruns and threaded runs produce identical CSV bytes" : "CSV output differs across reruns");
}

} // namespace

int main() {
  const auto start = Clock::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  criterion11();
  std::printf("%d of 11 criteria failed, %.1f s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
