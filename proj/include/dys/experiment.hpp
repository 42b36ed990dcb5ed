#pragma once

#include "dys/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dys {

/// Invalid experiment configuration (unknown key, preset, method, bad value).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Task { matcomp_synth, matcomp_ratings, cs_recovery, cs_noise, diagnose };
enum class OutputFormat { csv, json };

const char *to_string(Task t);
Task parse_task(const std::string &s);

struct MatcompParams {
  std::vector<Index> sizes{300};
  std::vector<Index> ranks{10};
  std::vector<double> ratios{0.3};
  double lambda = 1.5e-6;
  double multiplier = 1e6;
  std::size_t max_iter = 1000;
  double tol = 1e-4;
  /// A trial succeeds when it converges with relative error below this.
  double success_tol = 1e-3;
};

struct RatingsParams {
  std::string path;
  double test_fraction = 0.2;
  std::vector<Index> ranks{5, 10, 15, 20, 25, 30};
  double lambda = 1e-3;
  double multiplier = 100.0;
  std::size_t max_iter = 1000;
  double tol = 1e-4;
};

struct CsParams {
  std::vector<Index> rows{100};
  Index n = 1500;
  int refinement = 10;
  /// Minimum support separation; unset means 2 * refinement.
  std::optional<Index> min_sep;
  std::vector<Index> sparsity{5};
  std::vector<double> sigmas{0.0};
  double lambda = 1e-5;
  double lasso_lambda = 1e-6;
  double rho = 1e-5;
  double multiplier = 1e6;
  std::size_t max_iter = 50000;
  double eps_abs = 1e-7;
  double eps_rel = 1e-5;
  std::size_t dca_outer = 10;
  std::size_t dca_inner = 5000;
  double dca_outer_tol = 1e-2;

  Index separation() const { return min_sep.value_or(2 * static_cast<Index>(refinement)); }
};

struct DiagnoseParams {
  double L = 1.0;
  double l = 0.0;
  double beta = 1.0;
  double grid_min = 1e-4;
  double grid_max = 10.0;
  std::size_t grid_points = 25;
};

struct ExperimentConfig {
  Task task = Task::matcomp_synth;
  std::vector<std::string> methods{"DYS", "DRS", "SVP", "SVT"};
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  MatcompParams matcomp;
  RatingsParams ratings;
  CsParams cs;
  DiagnoseParams diagnose;
  std::string out; // empty: standard output
  OutputFormat format = OutputFormat::csv;

  /// Throws ConfigError when a field is out of range or a method is not
  /// available for the task.
  void validate() const;
};

/// Methods implemented for a task, in canonical order.
std::vector<std::string> methods_for(Task t);

struct PresetInfo {
  std::string name;
  std::string description;
  bool long_running;
};

std::vector<PresetInfo> presets();
ExperimentConfig preset(const std::string &name);

/// Overlays a JSON document onto `base`. Recognised top-level keys: preset,
/// task, methods, trials, seed, threads, matcomp, ratings, cs, diagnose,
/// output. A "preset" key replaces `base` before the other keys apply.
ExperimentConfig apply_config_text(ExperimentConfig base, const std::string &json_text);
ExperimentConfig load_config(const std::string &path, ExperimentConfig base = {});

using Cell = std::variant<std::monostate, std::string, long long, double>;

/// Rows of an experiment, one per trial plus one aggregate per (grid point,
/// method). Column order is fixed per task.
struct ResultTable {
  Task task = Task::matcomp_synth;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::size_t diverged = 0;

  void write_csv(std::ostream &os) const;
  void write_json(std::ostream &os) const;
  void write(std::ostream &os, OutputFormat f) const;
};

/// Version tag on the first line of every CSV and in every JSON document.
inline constexpr const char *result_schema = "dys-results/1";

ResultTable run_experiment(const ExperimentConfig &config);

struct GammaDiagnosis {
  double gamma0 = 0.0;
  double fixed_step = 0.0;
  std::vector<std::pair<double, double>> grid; // (gamma, threshold value)
};

/// Threshold root, recommended fixed step 0.99 gamma0, and the threshold on a
/// log-spaced gamma grid.
GammaDiagnosis diagnose_gamma(double L, double l, double beta, double grid_min = 1e-4,
                              double grid_max = 10.0, std::size_t points = 25);

ResultTable diagnosis_table(const GammaDiagnosis &d);

/// Population mean and standard deviation used by the aggregate rows.
std::pair<double, double> mean_std(const std::vector<double> &values);

} // namespace dys
