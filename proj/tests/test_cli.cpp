#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dys/experiment.hpp"
#include "dys/io.hpp"
#include "dys/ratings.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace dys;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "dys_test_cli";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path &p, const std::string &text) {
  std::ofstream os(p);
  os << text;
}

std::string read_file(const fs::path &p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string(DYSRUN_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

std::string ratings_text(int users, int items, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::set<std::pair<int, int>> used;
  std::ostringstream os;
  while (static_cast<int>(used.size()) < count) {
    const int u = 1 + static_cast<int>(rng() % users), i = 1 + static_cast<int>(rng() % items);
    if (!used.insert({u, i}).second)
      continue;
    os << u << "::" << i << "::" << 1 + rng() % 5 << "::" << 978300000 + used.size() << '\n';
  }
  return os.str();
}

ExperimentConfig tiny_matcomp() {
  ExperimentConfig c = preset("table1-desk");
  c.trials = 2;
  c.matcomp.sizes = {20};
  c.matcomp.ranks = {2};
  c.matcomp.ratios = {0.5, 0.6};
  c.matcomp.max_iter = 200;
  return c;
}

double as_double(const Cell &c) {
  if (const auto *d = std::get_if<double>(&c))
    return *d;
  return static_cast<double>(std::get<long long>(c));
}

} // namespace

TEST_CASE("ratings parser remaps ids and keeps the last duplicate") {
  std::istringstream is("10::7::4::100\n\n3::7::2::101\n10::7::5::102\n3::9::1.5::103\n");
  const auto d = parse_ratings(is);
  CHECK(d.lines == 4);
  CHECK(d.duplicates == 1);
  CHECK(d.size() == 3);
  CHECK(d.num_users() == 2);
  CHECK(d.num_items() == 2);
  CHECK(d.user_ids == std::vector<std::int64_t>{3, 10});
  CHECK(d.item_ids == std::vector<std::int64_t>{7, 9});
  for (std::size_t k = 0; k < d.size(); ++k)
    if (d.user_ids[static_cast<std::size_t>(d.users[k])] == 10) {
      CHECK(d.ratings[k] == 5.0);
      CHECK(d.timestamps[k] == 102);
    }
}

TEST_CASE("ratings parser reports line numbers") {
  auto line_of = [](const std::string &text) {
    std::istringstream is(text);
    try {
      (void)parse_ratings(is);
    } catch (const ParseError &e) {
      return e.line();
    }
    return std::size_t{999};
  };
  CHECK(line_of("1::2::3::4\n1::2::3\n") == 2);
  CHECK(line_of("1::2::3::4\n\nx::2::3::4\n") == 3);
  CHECK(line_of("1::2::9::4\n") == 1);
  CHECK(line_of("1::2::0.5::4\n") == 1);
  CHECK(line_of("1::2::3::4::5\n") == 1);
  CHECK(line_of("") == 0);
  CHECK(line_of("\n  \n") == 0);
}

TEST_CASE("split with fraction 0 keeps every record for training") {
  std::istringstream is("1::1::3::0\n1::2::4::0\n2::1::5::0\n");
  const auto d = parse_ratings(is);
  const auto s = split_ratings(d, 0.0, {1});
  CHECK(s.train.size() == 3);
  CHECK(s.test.empty());
  CHECK_THROWS_AS((void)split_ratings(d, 1.0, {1}), InvalidArgument);
  CHECK_THROWS_AS((void)split_ratings(d, -0.1, {1}), InvalidArgument);
}

TEST_CASE("split of 1000 records at 0.2 is disjoint, complete and seeded") {
  std::istringstream is(ratings_text(60, 80, 1000, 3));
  const auto d = parse_ratings(is);
  REQUIRE(d.size() == 1000);
  const auto s = split_ratings(d, 0.2, {5});
  CHECK(s.train.size() == 800);
  CHECK(s.test.size() == 200);
  std::set<std::pair<Index, Index>> seen;
  for (const auto *part : {&s.train, &s.test})
    for (const auto &e : part->entries())
      CHECK(seen.insert({e.row, e.col}).second);
  CHECK(seen.size() == 1000);

  const auto again = split_ratings(d, 0.2, {5});
  const auto other = split_ratings(d, 0.2, {6});
  bool same = true, differs = false;
  for (std::size_t k = 0; k < 200; ++k) {
    same = same && again.test.entries()[k].row == s.test.entries()[k].row &&
           again.test.entries()[k].col == s.test.entries()[k].col;
    differs = differs || other.test.entries()[k].row != s.test.entries()[k].row ||
              other.test.entries()[k].col != s.test.entries()[k].col;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("ingest_ratings reads a file") {
  const auto path = scratch("ratings.dat");
  write_file(path, ratings_text(10, 12, 50, 4));
  const auto res = ingest_ratings(path.string(), {1}, 0.2);
  CHECK(res.data.size() == 50);
  CHECK(res.split.test.size() == 10);
  CHECK_THROWS((void)ingest_ratings(scratch("missing.dat").string(), {1}));
}

TEST_CASE("sensing instances round trip bit for bit") {
  std::mt19937_64 rng(71);
  SensingInstance inst{oracle::gaussian(4, 6, rng), oracle::gaussian(4, rng), oracle::gaussian(6, rng), 1e-5,
                       0.1 + 1e-17};
  inst.A(0, 0) = 0.1 + 0.2;
  std::stringstream ss;
  write_instance(ss, inst);
  const auto back = read_sensing_instance(ss);
  CHECK(back.A == inst.A);
  CHECK(back.b == inst.b);
  REQUIRE(back.x_true);
  CHECK(*back.x_true == *inst.x_true);
  CHECK(back.lambda == inst.lambda);
  CHECK(back.rho == inst.rho);

  inst.x_true.reset();
  const auto path = scratch("sensing.txt");
  save_instance(path.string(), inst);
  const auto loaded = load_sensing_instance(path.string());
  CHECK(loaded.A == inst.A);
  CHECK_FALSE(loaded.x_true);
}

TEST_CASE("completion instances round trip bit for bit") {
  std::mt19937_64 rng(72);
  const Matrix m = oracle::gaussian(5, 4, rng);
  const ObservationSet obs(5, 4, {{0, 0, m(0, 0)}, {3, 1, m(3, 1)}, {4, 3, m(4, 3)}});
  const CompletionInstance inst{obs, 2, 1.5e-6, m};
  std::stringstream ss;
  write_instance(ss, inst);
  const auto back = read_completion_instance(ss);
  CHECK(back.rank == 2);
  CHECK(back.lambda == 1.5e-6);
  REQUIRE(back.obs.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back.obs.entries()[k].row == obs.entries()[k].row);
    CHECK(back.obs.entries()[k].col == obs.entries()[k].col);
    CHECK(back.obs.entries()[k].value == obs.entries()[k].value);
  }
  REQUIRE(back.truth);
  CHECK(*back.truth == m);
}

TEST_CASE("malformed instance text raises ParseError") {
  auto fails = [](const std::string &text, bool sensing) {
    std::istringstream is(text);
    try {
      if (sensing)
        (void)read_sensing_instance(is);
      else
        (void)read_completion_instance(is);
    } catch (const ParseError &) {
      return true;
    }
    return false;
  };
  CHECK(fails("", true));
  CHECK(fails("dys-completion 1\n", true));
  CHECK(fails("dys-sensing 2\n1 1 0\n0 1\n1\n1\n", true));
  CHECK(fails("dys-sensing 1\n1 1 0\n0 1\n1\n", true));
  CHECK(fails("dys-sensing 1\n1 1 0\n0 1\n1\n1\n7\n", true));
  CHECK(fails("dys-sensing 1\n1 1 0\n0 1\nabc\n1\n", true));
  CHECK_FALSE(fails("dys-sensing 1\n1 1 0\n0 1\n1\n1\n", true));
  CHECK(fails("dys-completion 1\n2 2 1 1 0\n0\n5 0 1\n", false));
  CHECK(fails("dys-completion 1\n2 2 2 1 0\n0\n0 0 1\n", false));
  CHECK_FALSE(fails("dys-completion 1\n2 2 1 1 0\n0\n1 0 1\n", false));
}

TEST_CASE("config overlay applies sections and rejects unknown keys") {
  const auto c = apply_config_text(ExperimentConfig{}, R"({
    "trials": 3, "seed": 42, "threads": 2,
    "matcomp": {"n": [50, 60], "r": 4, "p": 0.5, "max_iter": 10},
    "output": {"format": "json", "path": "x.json"}
  })");
  CHECK(c.trials == 3);
  CHECK(c.seed == 42);
  CHECK(c.threads == 2);
  CHECK(c.matcomp.sizes == std::vector<Index>{50, 60});
  CHECK(c.matcomp.ranks == std::vector<Index>{4});
  CHECK(c.matcomp.ratios == std::vector<double>{0.5});
  CHECK(c.matcomp.max_iter == 10);
  CHECK(c.format == OutputFormat::json);
  CHECK(c.out == "x.json");

  CHECK_THROWS_AS((void)apply_config_text({}, R"({"trails": 3})"), ConfigError);
  CHECK_THROWS_AS((void)apply_config_text({}, R"({"matcomp": {"rank": 3}})"), ConfigError);
  CHECK_THROWS_AS((void)apply_config_text({}, R"({"trials": -1})"), ConfigError);
  CHECK_THROWS_AS((void)apply_config_text({}, R"({"trials": 1.5})"), ConfigError);
  CHECK_THROWS_AS((void)apply_config_text({}, R"({"task": "nope"})"), ConfigError);
  CHECK_THROWS_AS((void)apply_config_text({}, "{not json"), ConfigError);
  CHECK_THROWS_AS((void)load_config(scratch("absent.json").string()), ConfigError);
}

TEST_CASE("config presets and task defaults") {
  const auto c = apply_config_text(ExperimentConfig{}, R"({"preset": "cs-noise-desk", "trials": 2})");
  CHECK(c.task == Task::cs_noise);
  CHECK(c.trials == 2);
  CHECK(c.cs.sigmas.size() == 4);
  CHECK(c.methods == methods_for(Task::cs_noise));

  const auto t = apply_config_text(ExperimentConfig{}, R"({"task": "cs_recovery"})");
  CHECK(t.methods == std::vector<std::string>{"ADMM", "DCA", "DYS"});
  const auto m = apply_config_text(ExperimentConfig{}, R"({"task": "cs_recovery", "methods": ["DYS"]})");
  CHECK(m.methods == std::vector<std::string>{"DYS"});

  for (const auto &p : presets()) {
    CHECK_NOTHROW((void)preset(p.name));
    if (p.name != "movielens")
      CHECK_NOTHROW(preset(p.name).validate());
  }
  CHECK_THROWS_AS((void)preset("nope"), ConfigError);
  CHECK_THROWS_AS(preset("movielens").validate(), ConfigError);
  CHECK(parse_task(to_string(Task::matcomp_ratings)) == Task::matcomp_ratings);
}

TEST_CASE("config validation") {
  auto c = tiny_matcomp();
  CHECK_NOTHROW(c.validate());
  c.methods = {"ADMM"};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_matcomp();
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_matcomp();
  c.matcomp.ratios = {1.5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_matcomp();
  c.matcomp.ranks = {21};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  auto s = preset("cs-noiseless-desk");
  s.cs.sparsity = {100};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = preset("cs-noiseless-desk");
  s.cs.sigmas = {-0.1};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  auto d = preset("diagnose-default");
  d.diagnose.grid_points = 1;
  CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("run_experiment emits one row per trial plus aggregates") {
  const auto cfg = tiny_matcomp();
  const auto t = run_experiment(cfg);
  // 2 grid points x 4 methods x (2 trials + 1 aggregate)
  CHECK(t.rows.size() == 2 * 4 * 3);
  const std::vector<std::string> cols{"row_type", "method", "n",          "r",       "p",       "lambda",
                                      "trial",    "seed",   "status",     "iterations", "rel_error",
                                      "rel_error_std", "success", "diverged"};
  CHECK(t.columns == cols);
  for (const auto &row : t.rows)
    CHECK(row.size() == cols.size());

  // Aggregates recompute from the trial rows.
  for (std::size_t k = 0; k < t.rows.size(); k += 3) {
    const auto &a = t.rows[k], &b = t.rows[k + 1], &agg = t.rows[k + 2];
    CHECK(std::get<std::string>(agg[0]) == "aggregate");
    CHECK(std::get<std::string>(a[1]) == std::get<std::string>(agg[1]));
    CHECK(std::get<long long>(a[7]) == 1);
    CHECK(std::get<long long>(b[7]) == 2);
    const double e1 = as_double(a[10]), e2 = as_double(b[10]);
    CHECK(std::abs(as_double(agg[9]) - 0.5 * (as_double(a[9]) + as_double(b[9]))) < 1e-12);
    CHECK(std::abs(as_double(agg[10]) - 0.5 * (e1 + e2)) < 1e-12);
    CHECK(std::abs(as_double(agg[11]) - 0.5 * std::abs(e1 - e2)) < 1e-12);
    CHECK(std::abs(as_double(agg[12]) - 0.5 * (as_double(a[12]) + as_double(b[12]))) < 1e-12);
  }
  CHECK(t.diverged == 0);
}

TEST_CASE("mean_std is the population statistic") {
  const auto [m, s] = mean_std({1.0, 3.0});
  CHECK(m == 2.0);
  CHECK(s == 1.0);
  CHECK(std::isnan(mean_std({}).first));
}

TEST_CASE("experiment output is byte-identical across reruns and thread counts") {
  auto cfg = tiny_matcomp();
  std::ostringstream a, b, c;
  run_experiment(cfg).write_csv(a);
  run_experiment(cfg).write_csv(b);
  cfg.threads = 3;
  run_experiment(cfg).write_csv(c);
  CHECK(a.str() == b.str());
  CHECK(a.str() == c.str());
  CHECK(a.str().rfind("# schema=dys-results/1 task=matcomp_synth\n", 0) == 0);
}

TEST_CASE("small sensing experiment runs every method") {
  auto cfg = preset("cs-noiseless-desk");
  cfg.trials = 1;
  cfg.cs.rows = {30};
  cfg.cs.n = 120;
  cfg.cs.refinement = 2;
  cfg.cs.sparsity = {3};
  cfg.cs.max_iter = 3000;
  cfg.cs.dca_inner = 500;
  const auto t = run_experiment(cfg);
  CHECK(t.rows.size() == 3 * 2);
  CHECK(t.columns.back() == "sparsity");
  CHECK(std::get<long long>(t.rows[0][4]) == 2);
}

TEST_CASE("ratings experiment reports held-out error") {
  const auto path = scratch("exp_ratings.dat");
  write_file(path, ratings_text(30, 40, 600, 8));
  ExperimentConfig cfg = preset("movielens");
  cfg.ratings.path = path.string();
  cfg.ratings.ranks = {2};
  cfg.ratings.max_iter = 30;
  cfg.methods = {"DYS", "SVP"};
  const auto t = run_experiment(cfg);
  CHECK(t.rows.size() == 2 * 2);
  const auto col = std::find(t.columns.begin(), t.columns.end(), "rmse");
  REQUIRE(col != t.columns.end());
  CHECK(t.columns.back() == "test_rel_error");
  CHECK(std::isfinite(as_double(t.rows[0][static_cast<std::size_t>(col - t.columns.begin())])));
}

TEST_CASE("JSON output carries the schema and null for missing values") {
  auto cfg = tiny_matcomp();
  cfg.matcomp.ratios = {0.5};
  cfg.methods = {"DYS"};
  std::ostringstream os;
  run_experiment(cfg).write_json(os);
  const std::string s = os.str();
  CHECK(s.find("\"schema\": \"dys-results/1\"") != std::string::npos);
  CHECK(s.find("\"rel_error_std\": null") != std::string::npos);
}

TEST_CASE("diagnose_gamma reports the threshold root and a sign-consistent grid") {
  const auto d = diagnose_gamma(1.0, 0.0, 1.0);
  CHECK(d.gamma0 > 0.14);
  CHECK(d.gamma0 < 0.16);
  const auto e = diagnose_gamma(1.0, 1.0, 1.0);
  CHECK(e.gamma0 == max_step_size(1.0, 1.0, 1.0));
  CHECK(e.fixed_step == default_fixed_step(1.0, 1.0, 1.0));
  CHECK(d.grid.size() == 25);
  CHECK(d.grid.front().first == doctest::Approx(1e-4));
  CHECK(d.grid.back().first == doctest::Approx(10.0));
  for (const auto &[g, v] : d.grid)
    CHECK((g < d.gamma0) == (v > 0.0));
  const auto t = diagnosis_table(d);
  CHECK(t.rows.size() == 27);
  CHECK_THROWS_AS((void)diagnose_gamma(1.0, 0.0, 1.0, 0.0, 1.0, 5), InvalidArgument);
}

TEST_CASE("dysrun exit codes") {
  CHECK(run_cli("presets") == 0);
  CHECK(run_cli("diagnose --out " + scratch("diag.csv").string()) == 0);
  CHECK(read_file(scratch("diag.csv")).find("gamma0,0.1509") != std::string::npos);
  CHECK(run_cli("matcomp --preset nope") == 1);
  CHECK(run_cli("cs --preset table1-desk") == 1);
  CHECK(run_cli("bogus") == 1);
  CHECK(run_cli("ingest " + scratch("missing.dat").string()) == 1);

  const auto bad = scratch("bad.json");
  write_file(bad, R"({"matcomp": {"bogus": 1}})");
  CHECK(run_cli("matcomp --config " + bad.string()) == 1);
}

TEST_CASE("dysrun runs a configured experiment and ingests ratings") {
  const auto cfg = scratch("tiny.json");
  write_file(cfg, R"({"matcomp": {"n": 20, "r": 2, "p": 0.5, "max_iter": 100}, "methods": ["DYS", "SVP"]})");
  const auto out1 = scratch("tiny1.csv"), out2 = scratch("tiny2.csv");
  CHECK(run_cli("matcomp --config " + cfg.string() + " --trials 2 --seed 9 --out " + out1.string()) == 0);
  CHECK(run_cli("matcomp --config " + cfg.string() + " --trials 2 --seed 9 --threads 2 --out " + out2.string()) == 0);
  const std::string a = read_file(out1);
  CHECK(a == read_file(out2));
  std::istringstream lines(a);
  std::string line;
  int count = 0;
  while (std::getline(lines, line))
    ++count;
  CHECK(count == 2 + 2 * 3);

  const auto ratings = scratch("ingest.dat");
  write_file(ratings, ratings_text(10, 10, 40, 2) + "1::1::5::1\n1::1::4::2\n");
  const auto summary = scratch("ingest.csv"), train = scratch("train.txt");
  CHECK(run_cli("ingest " + ratings.string() + " --test-fraction 0.25 --out " + summary.string() +
                " --save-train " + train.string()) == 0);
  std::istringstream sum(read_file(summary));
  std::getline(sum, line);
  std::getline(sum, line);
  const auto header = split_csv(line);
  std::getline(sum, line);
  const auto values = split_csv(line);
  REQUIRE(header.size() == values.size());
  std::map<std::string, std::string> row;
  for (std::size_t i = 0; i < header.size(); ++i)
    row[header[i]] = values[i];
  const long long records = std::stoll(row["records"]);
  CHECK(std::stoll(row["lines"]) == 42);
  CHECK(std::stoll(row["duplicates"]) == 42 - records);
  CHECK(std::stoll(row["train"]) + std::stoll(row["test"]) == records);
  const auto inst = load_completion_instance(train.string());
  CHECK(static_cast<long long>(inst.obs.size()) == std::stoll(row["train"]));
}
