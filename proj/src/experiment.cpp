#include "dys/experiment.hpp"

#include "dys/cs.hpp"
#include "dys/datagen.hpp"
#include "dys/matcomp.hpp"
#include "dys/ratings.hpp"
#include "dys/splitting.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace dys {

using json = nlohmann::json;

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

const std::map<std::string, Task> &task_names() {
  static const std::map<std::string, Task> names{{"matcomp_synth", Task::matcomp_synth},
                                                 {"matcomp_ratings", Task::matcomp_ratings},
                                                 {"cs_recovery", Task::cs_recovery},
                                                 {"cs_noise", Task::cs_noise},
                                                 {"diagnose", Task::diagnose}};
  return names;
}

// ---- JSON overlay --------------------------------------------------------

void check_keys(const json &j, const std::string &where, std::initializer_list<const char *> known) {
  if (!j.is_object())
    throw ConfigError(where + ": expected an object");
  for (const auto &item : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char *k) { return item.key() == k; }))
      throw ConfigError("unknown config key '" + where + "." + item.key() + "'");
  }
}

double number(const json &j, const std::string &key) {
  if (!j.is_number())
    throw ConfigError("'" + key + "' must be a number");
  return j.get<double>();
}

std::uint64_t count(const json &j, const std::string &key) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError("'" + key + "' must be a nonnegative integer");
  return j.get<std::uint64_t>();
}

std::string text(const json &j, const std::string &key) {
  if (!j.is_string())
    throw ConfigError("'" + key + "' must be a string");
  return j.get<std::string>();
}

std::vector<Index> index_list(const json &j, const std::string &key) {
  std::vector<Index> out;
  if (j.is_array()) {
    for (const auto &v : j)
      out.push_back(static_cast<Index>(count(v, key)));
  } else {
    out.push_back(static_cast<Index>(count(j, key)));
  }
  return out;
}

std::vector<double> real_list(const json &j, const std::string &key) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto &v : j)
      out.push_back(number(v, key));
  } else {
    out.push_back(number(j, key));
  }
  return out;
}

template <class Fn> void each(const json &j, Fn fn) {
  for (const auto &item : j.items())
    fn(item.key(), item.value());
}

void overlay_matcomp(MatcompParams &p, const json &j) {
  check_keys(j, "matcomp", {"n", "r", "p", "lambda", "multiplier", "max_iter", "tol", "success_tol"});
  each(j, [&](const std::string &k, const json &v) {
    if (k == "n") p.sizes = index_list(v, k);
    else if (k == "r") p.ranks = index_list(v, k);
    else if (k == "p") p.ratios = real_list(v, k);
    else if (k == "lambda") p.lambda = number(v, k);
    else if (k == "multiplier") p.multiplier = number(v, k);
    else if (k == "max_iter") p.max_iter = count(v, k);
    else if (k == "tol") p.tol = number(v, k);
    else if (k == "success_tol") p.success_tol = number(v, k);
  });
}

void overlay_ratings(RatingsParams &p, const json &j) {
  check_keys(j, "ratings", {"path", "test_fraction", "r", "lambda", "multiplier", "max_iter", "tol"});
  each(j, [&](const std::string &k, const json &v) {
    if (k == "path") p.path = text(v, k);
    else if (k == "test_fraction") p.test_fraction = number(v, k);
    else if (k == "r") p.ranks = index_list(v, k);
    else if (k == "lambda") p.lambda = number(v, k);
    else if (k == "multiplier") p.multiplier = number(v, k);
    else if (k == "max_iter") p.max_iter = count(v, k);
    else if (k == "tol") p.tol = number(v, k);
  });
}

void overlay_cs(CsParams &p, const json &j) {
  check_keys(j, "cs", {"m", "n", "F", "min_sep", "s", "sigma", "lambda", "lasso_lambda", "rho",
                       "multiplier", "max_iter", "eps_abs", "eps_rel", "dca_outer", "dca_inner",
                       "dca_outer_tol"});
  each(j, [&](const std::string &k, const json &v) {
    if (k == "m") p.rows = index_list(v, k);
    else if (k == "n") p.n = static_cast<Index>(count(v, k));
    else if (k == "F") p.refinement = static_cast<int>(count(v, k));
    else if (k == "min_sep") p.min_sep = static_cast<Index>(count(v, k));
    else if (k == "s") p.sparsity = index_list(v, k);
    else if (k == "sigma") p.sigmas = real_list(v, k);
    else if (k == "lambda") p.lambda = number(v, k);
    else if (k == "lasso_lambda") p.lasso_lambda = number(v, k);
    else if (k == "rho") p.rho = number(v, k);
    else if (k == "multiplier") p.multiplier = number(v, k);
    else if (k == "max_iter") p.max_iter = count(v, k);
    else if (k == "eps_abs") p.eps_abs = number(v, k);
    else if (k == "eps_rel") p.eps_rel = number(v, k);
    else if (k == "dca_outer") p.dca_outer = count(v, k);
    else if (k == "dca_inner") p.dca_inner = count(v, k);
    else if (k == "dca_outer_tol") p.dca_outer_tol = number(v, k);
  });
}

void overlay_diagnose(DiagnoseParams &p, const json &j) {
  check_keys(j, "diagnose", {"L", "l", "beta", "grid_min", "grid_max", "grid_points"});
  each(j, [&](const std::string &k, const json &v) {
    if (k == "L") p.L = number(v, k);
    else if (k == "l") p.l = number(v, k);
    else if (k == "beta") p.beta = number(v, k);
    else if (k == "grid_min") p.grid_min = number(v, k);
    else if (k == "grid_max") p.grid_max = number(v, k);
    else if (k == "grid_points") p.grid_points = count(v, k);
  });
}

OutputFormat parse_format(const std::string &s) {
  if (s == "csv")
    return OutputFormat::csv;
  if (s == "json")
    return OutputFormat::json;
  throw ConfigError("unknown output format '" + s + "' (expected csv or json)");
}

// ---- trial execution -----------------------------------------------------

struct Outcome {
  RunStatus status = RunStatus::max_iter;
  double iterations = 0.0;
  double error = nan_value;
  bool success = false;
  std::vector<double> extras;
};

struct GridPoint {
  std::vector<Cell> keys;
  std::function<Outcome(const std::string &method, RngSeed seed)> run;
};

struct TaskLayout {
  std::vector<std::string> group;
  std::string error;
  std::vector<std::string> extras;
};

TaskLayout layout(Task t) {
  switch (t) {
  case Task::matcomp_synth:
    return {{"n", "r", "p", "lambda"}, "rel_error", {}};
  case Task::matcomp_ratings:
    return {{"users", "items", "r", "test_fraction", "lambda"}, "rmse", {"test_rel_error"}};
  case Task::cs_recovery:
  case Task::cs_noise:
    return {{"m", "n", "F", "s", "sigma"}, "rel_error", {"sparsity"}};
  case Task::diagnose:
    break;
  }
  return {};
}

Outcome from_completion(const CompletionResult &r, double success_tol) {
  Outcome o;
  o.status = r.status;
  o.iterations = static_cast<double>(r.iterations);
  o.error = r.relative_error.value_or(nan_value);
  o.success = r.status == RunStatus::converged && o.error < success_tol;
  return o;
}

Outcome from_recovery(const RecoveryReport &r) {
  Outcome o;
  o.status = r.status;
  o.iterations = static_cast<double>(r.iterations);
  o.error = r.relative_error.value_or(nan_value);
  o.success = r.success;
  o.extras = {static_cast<double>(r.sparsity)};
  return o;
}

CompletionResult complete(const std::string &method, const CompletionInstance &inst, double multiplier,
                          const StoppingRule &rule) {
  if (method == "DYS")
    return dys_complete(inst, dys_completion_policy(multiplier), rule);
  if (method == "DRS")
    return drs_complete(inst, drs_completion_policy(multiplier), rule);
  if (method == "SVP")
    return svp_complete(inst, rule);
  if (method == "SVT")
    return svt_complete(inst, rule);
  throw ConfigError("unknown completion method '" + method + "'");
}

std::vector<GridPoint> matcomp_grid(const ExperimentConfig &cfg) {
  std::vector<GridPoint> grid;
  const MatcompParams p = cfg.matcomp;
  for (Index n : p.sizes)
    for (Index r : p.ranks)
      for (double ratio : p.ratios) {
        GridPoint g;
        g.keys = {static_cast<long long>(n), static_cast<long long>(r), ratio, p.lambda};
        g.run = [p, n, r, ratio](const std::string &method, RngSeed seed) {
          const auto lr = gen_low_rank(n, r, seed);
          const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n * n)));
          const auto omega = sample_omega(n, n, count, seed);
          CompletionInstance inst{project_omega(lr.M, omega), r, p.lambda, lr.M};
          return from_completion(complete(method, inst, p.multiplier, completion_rule(p.max_iter, p.tol)),
                                 p.success_tol);
        };
        grid.push_back(std::move(g));
      }
  return grid;
}

std::vector<GridPoint> ratings_grid(const ExperimentConfig &cfg) {
  const RatingsParams p = cfg.ratings;
  auto data = std::make_shared<const RatingsDataset>(read_ratings(p.path));
  std::vector<GridPoint> grid;
  for (Index r : p.ranks) {
    GridPoint g;
    g.keys = {static_cast<long long>(data->num_users()), static_cast<long long>(data->num_items()),
              static_cast<long long>(r), p.test_fraction, p.lambda};
    g.run = [p, r, data](const std::string &method, RngSeed seed) {
      const auto split = split_ratings(*data, p.test_fraction, seed);
      CompletionInstance inst{split.train, r, p.lambda, std::nullopt};
      const auto res = complete(method, inst, p.multiplier, completion_rule(p.max_iter, p.tol));
      Outcome o;
      o.status = res.status;
      o.iterations = static_cast<double>(res.iterations);
      o.error = rmse(res.X, split.test);
      o.success = res.status == RunStatus::converged;
      o.extras = {masked_relative_residual(res.X, split.test)};
      return o;
    };
    grid.push_back(std::move(g));
  }
  return grid;
}

std::vector<GridPoint> cs_grid(const ExperimentConfig &cfg) {
  const CsParams p = cfg.cs;
  std::vector<GridPoint> grid;
  for (Index m : p.rows)
    for (Index s : p.sparsity)
      for (double sigma : p.sigmas) {
        GridPoint g;
        g.keys = {static_cast<long long>(m), static_cast<long long>(p.n), static_cast<long long>(p.refinement),
                  static_cast<long long>(s), sigma};
        g.run = [p, m, s, sigma](const std::string &method, RngSeed seed) {
          const Matrix a = gen_dct_matrix(m, p.n, p.refinement, seed);
          const Vector x = gen_sparse_signal(p.n, s, p.separation(), seed);
          const Vector b = add_noise(a * x, sigma, seed);
          StoppingRule rule = recovery_rule(p.max_iter);
          rule.eps_abs = p.eps_abs;
          rule.eps_rel = p.eps_rel;
          if (method == "ADMM")
            return from_recovery(admm_lasso(SensingInstance{a, b, x, p.lasso_lambda, p.rho}, rule));
          SensingInstance inst{a, b, x, p.lambda, p.rho};
          if (method == "DCA") {
            DcaOptions opts;
            opts.outer_max = p.dca_outer;
            opts.inner = rule;
            opts.inner.max_iter = p.dca_inner;
            opts.outer_tol = p.dca_outer_tol;
            return from_recovery(dca_l12(inst, opts));
          }
          if (method == "DYS") {
            DysL12Options opts;
            opts.multiplier = p.multiplier;
            opts.rule = rule;
            return from_recovery(dys_l12(inst, opts));
          }
          throw ConfigError("unknown sensing method '" + method + "'");
        };
        grid.push_back(std::move(g));
      }
  return grid;
}

Outcome guarded(const GridPoint &g, const std::string &method, RngSeed seed) {
  try {
    return g.run(method, seed);
  } catch (const OracleError &) {
  } catch (const SvdNotConverged &) {
  }
  Outcome o;
  o.status = RunStatus::diverged;
  return o;
}

// Runs jobs [0, n) on up to `threads` workers; results land at their index.
template <class Fn> void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++)
          fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  for (auto &t : pool)
    t.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

std::string format_double(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  // Shortest representation that parses back to the same double.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_cell(const Cell &c) {
  return std::visit(
      [](const auto &v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>)
          return "";
        else if constexpr (std::is_same_v<T, std::string>)
          return v;
        else if constexpr (std::is_same_v<T, long long>)
          return std::to_string(v);
        else
          return format_double(v);
      },
      c);
}

json json_cell(const Cell &c) {
  return std::visit(
      [](const auto &v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>)
          return nullptr;
        else if constexpr (std::is_same_v<T, double>)
          return std::isfinite(v) ? json(v) : json(nullptr);
        else
          return json(v);
      },
      c);
}

} // namespace

const char *to_string(Task t) {
  for (const auto &[name, task] : task_names())
    if (task == t)
      return name.c_str();
  return "unknown";
}

Task parse_task(const std::string &s) {
  const auto it = task_names().find(s);
  if (it == task_names().end())
    throw ConfigError("unknown task '" + s + "'");
  return it->second;
}

std::vector<std::string> methods_for(Task t) {
  switch (t) {
  case Task::matcomp_synth:
    return {"DYS", "DRS", "SVP", "SVT"};
  case Task::matcomp_ratings:
    return {"DYS", "DRS", "SVP"};
  case Task::cs_recovery:
  case Task::cs_noise:
    return {"ADMM", "DCA", "DYS"};
  case Task::diagnose:
    break;
  }
  return {};
}

void ExperimentConfig::validate() const {
  if (trials < 1)
    throw ConfigError("trials must be at least 1");
  if (threads < 1)
    throw ConfigError("threads must be at least 1");
  if (task != Task::diagnose) {
    if (methods.empty())
      throw ConfigError("no methods selected");
    const auto known = methods_for(task);
    for (const auto &m : methods)
      if (std::find(known.begin(), known.end(), m) == known.end())
        throw ConfigError("method '" + m + "' is not implemented for task " + to_string(task));
  }
  auto positive = [](double v, const char *what) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string(what) + " must be positive and finite");
  };
  switch (task) {
  case Task::matcomp_synth:
    if (matcomp.sizes.empty() || matcomp.ranks.empty() || matcomp.ratios.empty())
      throw ConfigError("matcomp: n, r and p lists must be nonempty");
    for (Index n : matcomp.sizes)
      for (Index r : matcomp.ranks)
        if (r < 1 || r > n)
          throw ConfigError("matcomp: rank must lie in [1, n]");
    for (double p : matcomp.ratios)
      if (!(p > 0.0 && p <= 1.0))
        throw ConfigError("matcomp: p must lie in (0, 1]");
    if (!(matcomp.lambda >= 0.0))
      throw ConfigError("matcomp: lambda must be nonnegative");
    positive(matcomp.multiplier, "matcomp.multiplier");
    positive(matcomp.tol, "matcomp.tol");
    if (matcomp.max_iter < 1)
      throw ConfigError("matcomp: max_iter must be at least 1");
    break;
  case Task::matcomp_ratings:
    if (ratings.path.empty())
      throw ConfigError("ratings: path is required");
    if (!(ratings.test_fraction > 0.0 && ratings.test_fraction < 1.0))
      throw ConfigError("ratings: test_fraction must lie in (0, 1)");
    if (ratings.ranks.empty())
      throw ConfigError("ratings: rank list must be nonempty");
    for (Index r : ratings.ranks)
      if (r < 1)
        throw ConfigError("ratings: rank must be at least 1");
    if (!(ratings.lambda >= 0.0))
      throw ConfigError("ratings: lambda must be nonnegative");
    positive(ratings.multiplier, "ratings.multiplier");
    positive(ratings.tol, "ratings.tol");
    if (ratings.max_iter < 1)
      throw ConfigError("ratings: max_iter must be at least 1");
    break;
  case Task::cs_recovery:
  case Task::cs_noise:
    if (cs.rows.empty() || cs.sparsity.empty() || cs.sigmas.empty())
      throw ConfigError("cs: m, s and sigma lists must be nonempty");
    if (cs.n < 1 || cs.refinement < 1)
      throw ConfigError("cs: n and F must be at least 1");
    for (Index m : cs.rows)
      if (m < 1)
        throw ConfigError("cs: m must be at least 1");
    for (Index s : cs.sparsity)
      if (s < 1 || s * cs.separation() > cs.n)
        throw ConfigError("cs: need 1 <= s and s * min_sep <= n");
    for (double sigma : cs.sigmas)
      if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw ConfigError("cs: sigma must be finite and nonnegative");
    if (!(cs.lambda >= 0.0) || !(cs.lasso_lambda >= 0.0))
      throw ConfigError("cs: lambda must be nonnegative");
    positive(cs.rho, "cs.rho");
    positive(cs.multiplier, "cs.multiplier");
    positive(cs.eps_abs, "cs.eps_abs");
    positive(cs.eps_rel, "cs.eps_rel");
    positive(cs.dca_outer_tol, "cs.dca_outer_tol");
    if (cs.max_iter < 1 || cs.dca_outer < 1 || cs.dca_inner < 1)
      throw ConfigError("cs: iteration caps must be at least 1");
    break;
  case Task::diagnose:
    if (!std::isfinite(diagnose.L) || !std::isfinite(diagnose.l) || !std::isfinite(diagnose.beta))
      throw ConfigError("diagnose: L, l and beta must be finite");
    positive(diagnose.grid_min, "diagnose.grid_min");
    if (!(diagnose.grid_max > diagnose.grid_min))
      throw ConfigError("diagnose: grid_max must exceed grid_min");
    if (diagnose.grid_points < 2)
      throw ConfigError("diagnose: grid_points must be at least 2");
    break;
  }
}

std::vector<PresetInfo> presets() {
  return {
      {"table1-desk", "matrix completion n=300 r=10 p=0.3, DYS/DRS/SVP/SVT, 5 trials", false},
      {"table1-full", "matrix completion p=0.08, n up to 12000, r in {10, 30}, 5 trials", true},
      {"table2-full", "matrix completion p=0.05, n up to 12000, r in {10, 30}, 5 trials", true},
      {"movielens", "ratings completion, ranks 5..30, k=100, lambda=1e-3 (set ratings.path)", true},
      {"cs-noiseless-desk", "sensing F=10 m=100 n=1500 s=5, ADMM/DCA/DYS, 10 trials", false},
      {"cs-sparsity-desk", "sensing F=10 m=100 n=1500, s in {5, 9, 15, 17, 20}, 10 trials", false},
      {"cs-noise-desk", "sensing F=10 m=100 n=1500 s=5, sigma in {0.01, 0.005, 0.001, 0.0005}, 10 trials", false},
      {"cs-phase-full", "sensing n=2000, m in 80..200, s in {5, 9, 15, 17, 20}, 100 trials", true},
      {"diagnose-default", "step-size threshold for L=1, l=0, beta=1", false},
  };
}

ExperimentConfig preset(const std::string &name) {
  ExperimentConfig c;
  if (name == "table1-desk") {
    c.task = Task::matcomp_synth;
    c.trials = 5;
  } else if (name == "table1-full" || name == "table2-full") {
    c.task = Task::matcomp_synth;
    c.trials = 5;
    c.matcomp.sizes = {3000, 5000, 8000, 10000, 12000};
    c.matcomp.ranks = {10, 30};
    c.matcomp.ratios = {name == "table1-full" ? 0.08 : 0.05};
  } else if (name == "movielens") {
    c.task = Task::matcomp_ratings;
    c.methods = methods_for(c.task);
  } else if (name == "cs-noiseless-desk" || name == "cs-sparsity-desk") {
    c.task = Task::cs_recovery;
    c.methods = methods_for(c.task);
    c.trials = 10;
    if (name == "cs-sparsity-desk")
      c.cs.sparsity = {5, 9, 15, 17, 20};
  } else if (name == "cs-noise-desk") {
    c.task = Task::cs_noise;
    c.methods = methods_for(c.task);
    c.trials = 10;
    c.cs.sigmas = {0.01, 0.005, 0.001, 0.0005};
  } else if (name == "cs-phase-full") {
    c.task = Task::cs_recovery;
    c.methods = methods_for(c.task);
    c.trials = 100;
    c.cs.n = 2000;
    c.cs.rows = {80, 100, 120, 140, 160, 180, 200};
    c.cs.sparsity = {5, 9, 15, 17, 20};
  } else if (name == "diagnose-default") {
    c.task = Task::diagnose;
    c.methods.clear();
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

ExperimentConfig apply_config_text(ExperimentConfig base, const std::string &json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error &e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc, "config", {"preset", "task", "methods", "trials", "seed", "threads", "matcomp", "ratings",
                             "cs", "diagnose", "output"});
  if (doc.contains("preset"))
    base = preset(text(doc["preset"], "preset"));
  bool methods_given = false;
  each(doc, [&](const std::string &k, const json &v) {
    if (k == "task") {
      base.task = parse_task(text(v, k));
    } else if (k == "methods") {
      if (!v.is_array())
        throw ConfigError("'methods' must be an array of names");
      base.methods.clear();
      for (const auto &m : v)
        base.methods.push_back(text(m, k));
      methods_given = true;
    } else if (k == "trials") {
      base.trials = count(v, k);
    } else if (k == "seed") {
      base.seed = count(v, k);
    } else if (k == "threads") {
      base.threads = count(v, k);
    } else if (k == "matcomp") {
      overlay_matcomp(base.matcomp, v);
    } else if (k == "ratings") {
      overlay_ratings(base.ratings, v);
    } else if (k == "cs") {
      overlay_cs(base.cs, v);
    } else if (k == "diagnose") {
      overlay_diagnose(base.diagnose, v);
    } else if (k == "output") {
      check_keys(v, "output", {"path", "format"});
      if (v.contains("path"))
        base.out = text(v["path"], "output.path");
      if (v.contains("format"))
        base.format = parse_format(text(v["format"], "output.format"));
    }
  });
  if (doc.contains("task") && !methods_given)
    base.methods = methods_for(base.task);
  return base;
}

ExperimentConfig load_config(const std::string &path, ExperimentConfig base) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return apply_config_text(std::move(base), ss.str());
}

std::pair<double, double> mean_std(const std::vector<double> &values) {
  if (values.empty())
    return {nan_value, nan_value};
  double mean = 0.0;
  for (double v : values)
    mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values)
    var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

ResultTable run_experiment(const ExperimentConfig &config) {
  config.validate();
  if (config.task == Task::diagnose) {
    const auto &d = config.diagnose;
    return diagnosis_table(diagnose_gamma(d.L, d.l, d.beta, d.grid_min, d.grid_max, d.grid_points));
  }

  std::vector<GridPoint> grid;
  if (config.task == Task::matcomp_synth)
    grid = matcomp_grid(config);
  else if (config.task == Task::matcomp_ratings)
    grid = ratings_grid(config);
  else
    grid = cs_grid(config);

  const std::size_t per_point = config.methods.size() * config.trials;
  std::vector<Outcome> outcomes(grid.size() * per_point);
  parallel_for(outcomes.size(), config.threads, [&](std::size_t job) {
    const std::size_t g = job / per_point;
    const std::size_t method = (job % per_point) / config.trials;
    const std::size_t trial = job % config.trials;
    outcomes[job] = guarded(grid[g], config.methods[method], trial_seed({config.seed}, trial));
  });

  const TaskLayout lay = layout(config.task);
  ResultTable table;
  table.task = config.task;
  table.columns = {"row_type", "method"};
  table.columns.insert(table.columns.end(), lay.group.begin(), lay.group.end());
  for (std::string c : {"trial", "seed", "status", "iterations"})
    table.columns.push_back(c);
  table.columns.push_back(lay.error);
  table.columns.push_back(lay.error + "_std");
  table.columns.push_back("success");
  table.columns.push_back("diverged");
  table.columns.insert(table.columns.end(), lay.extras.begin(), lay.extras.end());

  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const std::string &method = config.methods[mi];
      std::vector<double> iters, errors, success;
      std::vector<std::vector<double>> extras(lay.extras.size());
      long long diverged = 0;
      for (std::size_t t = 0; t < config.trials; ++t) {
        const Outcome &o = outcomes[g * per_point + mi * config.trials + t];
        const bool div = o.status == RunStatus::diverged;
        diverged += div;
        std::vector<Cell> row{std::string("trial"), method};
        row.insert(row.end(), grid[g].keys.begin(), grid[g].keys.end());
        row.emplace_back(static_cast<long long>(t));
        row.emplace_back(static_cast<long long>(trial_seed({config.seed}, t).value));
        row.emplace_back(std::string(to_string(o.status)));
        row.emplace_back(o.iterations);
        row.emplace_back(o.error);
        row.emplace_back(std::monostate{});
        row.emplace_back(o.success ? 1.0 : 0.0);
        row.emplace_back(static_cast<long long>(div));
        for (std::size_t e = 0; e < lay.extras.size(); ++e) {
          const double v = e < o.extras.size() ? o.extras[e] : nan_value;
          row.emplace_back(v);
          if (std::isfinite(v))
            extras[e].push_back(v);
        }
        table.rows.push_back(std::move(row));
        iters.push_back(o.iterations);
        if (std::isfinite(o.error))
          errors.push_back(o.error);
        success.push_back(o.success ? 1.0 : 0.0);
      }
      table.diverged += static_cast<std::size_t>(diverged);

      const auto [err_mean, err_std] = mean_std(errors);
      std::vector<Cell> agg{std::string("aggregate"), method};
      agg.insert(agg.end(), grid[g].keys.begin(), grid[g].keys.end());
      agg.emplace_back(static_cast<long long>(config.trials));
      agg.emplace_back(std::monostate{});
      agg.emplace_back(std::monostate{});
      agg.emplace_back(mean_std(iters).first);
      agg.emplace_back(err_mean);
      agg.emplace_back(err_std);
      agg.emplace_back(mean_std(success).first);
      agg.emplace_back(diverged);
      for (const auto &e : extras)
        agg.emplace_back(mean_std(e).first);
      table.rows.push_back(std::move(agg));
    }
  }
  return table;
}

void ResultTable::write_csv(std::ostream &os) const {
  os << "# schema=" << result_schema << " task=" << to_string(task) << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i)
    os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto &row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << csv_cell(row[i]);
    os << '\n';
  }
}

void ResultTable::write_json(std::ostream &os) const {
  nlohmann::ordered_json doc;
  doc["schema"] = result_schema;
  doc["task"] = to_string(task);
  doc["columns"] = columns;
  auto &out = doc["rows"] = nlohmann::ordered_json::array();
  for (const auto &row : rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size() && i < columns.size(); ++i)
      obj[columns[i]] = json_cell(row[i]);
    out.push_back(std::move(obj));
  }
  os << doc.dump(2) << '\n';
}

void ResultTable::write(std::ostream &os, OutputFormat f) const {
  if (f == OutputFormat::json)
    write_json(os);
  else
    write_csv(os);
}

GammaDiagnosis diagnose_gamma(double L, double l, double beta, double grid_min, double grid_max,
                              std::size_t points) {
  if (!(grid_min > 0.0) || !(grid_max > grid_min) || points < 2)
    throw InvalidArgument("diagnose_gamma: need 0 < grid_min < grid_max and at least 2 points");
  GammaDiagnosis d;
  d.gamma0 = max_step_size(L, l, beta);
  d.fixed_step = default_fixed_step(L, l, beta);
  const double ratio = std::log(grid_max / grid_min) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double g = grid_min * std::exp(ratio * static_cast<double>(i));
    d.grid.emplace_back(g, lambda_threshold(g, L, l, beta));
  }
  return d;
}

ResultTable diagnosis_table(const GammaDiagnosis &d) {
  ResultTable t;
  t.task = Task::diagnose;
  t.columns = {"row_type", "gamma", "threshold"};
  t.rows.push_back({std::string("gamma0"), d.gamma0, std::monostate{}});
  t.rows.push_back({std::string("fixed_step"), d.fixed_step, std::monostate{}});
  for (const auto &[g, v] : d.grid)
    t.rows.push_back({std::string("grid"), g, v});
  return t;
}

} // namespace dys
