// Command-line front end for the experiment runner.
//
//   dysrun matcomp  [--preset NAME] [--config PATH] [--ratings PATH] ...
//   dysrun cs       [--preset NAME] [--config PATH] ...
//   dysrun diagnose [--lipschitz L] [--weak-convexity l] [--beta B]
//   dysrun ingest   PATH [--test-fraction F] [--seed N]
//
// Exit status: 0 on success, 2 if any trial diverged, 1 on configuration or
// input errors.

#include "dys/experiment.hpp"
#include "dys/io.hpp"
#include "dys/ratings.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_diverged = 2;

struct CommonFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> threads;
  std::string out;
  std::string format;
};

void add_common(CLI::App *cmd, CommonFlags &f) {
  cmd->add_option("--config", f.config, "JSON config file (nested sections)");
  cmd->add_option("--preset", f.preset, "named preset, see `dysrun presets`");
  cmd->add_option("--seed", f.seed, "base seed; trial i uses seed + i");
  cmd->add_option("--trials", f.trials, "number of trials per method and grid point");
  cmd->add_option("--threads", f.threads, "worker threads for independent trials");
  cmd->add_option("--out", f.out, "output file (default: standard output)");
  cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

dys::ExperimentConfig resolve(const std::string &default_preset, const CommonFlags &f) {
  dys::ExperimentConfig cfg = dys::preset(f.preset.empty() ? default_preset : f.preset);
  if (!f.config.empty())
    cfg = dys::load_config(f.config, cfg);
  if (f.seed)
    cfg.seed = *f.seed;
  if (f.trials)
    cfg.trials = *f.trials;
  if (f.threads)
    cfg.threads = *f.threads;
  if (!f.out.empty())
    cfg.out = f.out;
  if (!f.format.empty())
    cfg.format = f.format == "json" ? dys::OutputFormat::json : dys::OutputFormat::csv;
  return cfg;
}

template <class Fn> void with_output(const std::string &path, Fn fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os)
    throw dys::ConfigError("cannot open output file '" + path + "'");
  fn(os);
}

int execute(const dys::ExperimentConfig &cfg) {
  const auto start = std::chrono::steady_clock::now();
  const dys::ResultTable table = dys::run_experiment(cfg);
  with_output(cfg.out, [&](std::ostream &os) { table.write(os, cfg.format); });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "dysrun: " << dys::to_string(cfg.task) << ", " << table.rows.size() << " rows, "
            << table.diverged << " diverged, " << secs << " s\n";
  return table.diverged ? exit_diverged : exit_ok;
}

void require_task(const dys::ExperimentConfig &cfg, std::initializer_list<dys::Task> allowed, const char *cmd) {
  for (auto t : allowed)
    if (cfg.task == t)
      return;
  throw dys::ConfigError(std::string("task ") + dys::to_string(cfg.task) + " cannot run under '" + cmd + "'");
}

int ingest(const std::string &path, double fraction, std::uint64_t seed, const std::string &train_out,
           const std::string &test_out, std::optional<dys::Index> rank, const std::string &out,
           const std::string &format) {
  const auto res = dys::ingest_ratings(path, {seed}, fraction);
  if (res.data.duplicates)
    std::cerr << "dysrun: warning: " << res.data.duplicates
              << " duplicate (user, item) records replaced by later ones\n";
  const dys::Index r = rank.value_or(1);
  if (!train_out.empty())
    dys::save_instance(train_out, dys::CompletionInstance{res.split.train, r, 0.0, std::nullopt});
  if (!test_out.empty() && !res.split.test.empty())
    dys::save_instance(test_out, dys::CompletionInstance{res.split.test, r, 0.0, std::nullopt});

  dys::ResultTable t;
  t.task = dys::Task::matcomp_ratings;
  t.columns = {"lines", "records", "duplicates", "users", "items", "train", "test", "test_fraction", "seed"};
  t.rows.push_back({static_cast<long long>(res.data.lines), static_cast<long long>(res.data.size()),
                    static_cast<long long>(res.data.duplicates), static_cast<long long>(res.data.num_users()),
                    static_cast<long long>(res.data.num_items()), static_cast<long long>(res.split.train.size()),
                    static_cast<long long>(res.split.test.size()), fraction, static_cast<long long>(seed)});
  with_output(out, [&](std::ostream &os) {
    t.write(os, format == "json" ? dys::OutputFormat::json : dys::OutputFormat::csv);
  });
  return exit_ok;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Three-operator splitting experiments: matrix completion, sparse recovery, diagnostics"};
  app.require_subcommand(1);

  CommonFlags mc_flags;
  std::string ratings_path;
  auto *mc = app.add_subcommand("matcomp", "matrix completion (synthetic or ratings file)");
  add_common(mc, mc_flags);
  mc->add_option("--ratings", ratings_path, "UserID::MovieID::Rating::Timestamp file; runs the ratings task");

  CommonFlags cs_flags;
  auto *cs = app.add_subcommand("cs", "sparse recovery with oversampled DCT matrices");
  add_common(cs, cs_flags);

  CommonFlags dg_flags;
  std::optional<double> lip, weak, beta;
  auto *dg = app.add_subcommand("diagnose", "step-size threshold report");
  add_common(dg, dg_flags);
  dg->add_option("--lipschitz", lip, "Lipschitz constant L of grad F");
  dg->add_option("--weak-convexity", weak, "weak-convexity modulus l of F");
  dg->add_option("--beta", beta, "Lipschitz constant of grad H");

  std::string in_path, in_out, in_format = "csv", train_out, test_out;
  double fraction = 0.2;
  std::uint64_t in_seed = 1;
  std::optional<dys::Index> in_rank;
  auto *in = app.add_subcommand("ingest", "parse and split a ratings file");
  in->add_option("path", in_path, "ratings file")->required();
  in->add_option("--test-fraction", fraction, "held-out fraction in [0, 1)");
  in->add_option("--seed", in_seed, "split seed");
  in->add_option("--out", in_out, "summary output file");
  in->add_option("--format", in_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  in->add_option("--save-train", train_out, "write the training set as a completion instance");
  in->add_option("--save-test", test_out, "write the test set as a completion instance");
  in->add_option("--rank", in_rank, "rank recorded in saved instances");

  auto *ls = app.add_subcommand("presets", "list named presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*ls) {
      for (const auto &p : dys::presets())
        std::cout << p.name << (p.long_running ? " [long-running]" : "") << ": " << p.description << '\n';
      return exit_ok;
    }
    if (*mc) {
      auto cfg = resolve("table1-desk", mc_flags);
      if (!ratings_path.empty()) {
        if (cfg.task != dys::Task::matcomp_ratings) {
          cfg.task = dys::Task::matcomp_ratings;
          cfg.methods = dys::methods_for(cfg.task);
        }
        cfg.ratings.path = ratings_path;
      }
      require_task(cfg, {dys::Task::matcomp_synth, dys::Task::matcomp_ratings}, "matcomp");
      return execute(cfg);
    }
    if (*cs) {
      auto cfg = resolve("cs-noiseless-desk", cs_flags);
      require_task(cfg, {dys::Task::cs_recovery, dys::Task::cs_noise}, "cs");
      return execute(cfg);
    }
    if (*dg) {
      auto cfg = resolve("diagnose-default", dg_flags);
      require_task(cfg, {dys::Task::diagnose}, "diagnose");
      if (lip)
        cfg.diagnose.L = *lip;
      if (weak)
        cfg.diagnose.l = *weak;
      if (beta)
        cfg.diagnose.beta = *beta;
      return execute(cfg);
    }
    return ingest(in_path, fraction, in_seed, train_out, test_out, in_rank, in_out, in_format);
  } catch (const dys::ConfigError &e) {
    std::cerr << "dysrun: configuration error: " << e.what() << '\n';
  } catch (const std::exception &e) {
    std::cerr << "dysrun: error: " << e.what() << '\n';
  }
  return exit_config;
}
