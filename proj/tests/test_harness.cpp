#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "codesign/errors.hpp"
#include "codesign/forecaster.hpp"
#include "codesign/metrics.hpp"
#include "codesign/scenarios.hpp"

using namespace codesign;
namespace fs = std::filesystem;

namespace {

ScenarioSpec small_lqr_full() {
  ScenarioSpec s = builtin("lqr-full");
  s.train_series = 20;
  s.test_series = 10;
  return s;
}

ScenarioSpec small_lqr_mpc() {
  ScenarioSpec s = builtin("lqr-mpc");
  s.T = 25;
  s.train_series = 6;
  s.test_series = 4;
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("compression gain is pH over Z") {
  CHECK(compression_gain(4, 15, 4) == doctest::Approx(15.0));
  CHECK(compression_gain(8, 24, 2) == doctest::Approx(96.0));
  CHECK(compression_gain(5, 15, 75) == doctest::Approx(1.0));  // Z = pH
  CHECK_THROWS_AS(compression_gain(0, 15, 4), ConfigError);
  CHECK_THROWS_AS(compression_gain(4, 15, 0), ConfigError);
}

TEST_CASE("quantile interpolates linearly") {
  const std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({7.0}, 0.9) == doctest::Approx(7.0));
  CHECK_THROWS_AS(quantile({}, 0.5), DimensionError);
  CHECK_THROWS_AS(quantile(v, 1.5), ConfigError);
}

TEST_CASE("a single-cell sweep reproduces run_experiment") {
  const ScenarioSpec spec = small_lqr_full();
  const CellResult direct = run_experiment(spec, LossMode::TaskAware, 10, 0.0, 3);

  SweepOptions opts;
  opts.z_values = {10};
  opts.schemes = {LossMode::TaskAware};
  opts.seeds = {3};
  const MetricsReport rep = sweep(spec, opts);

  REQUIRE(rep.cells.size() == 1);
  REQUIRE(rep.cells[0].ok);
  const CellMetrics& a = direct.metrics;
  const CellMetrics& b = rep.cells[0].metrics;
  CHECK(a.mean_cost == b.mean_cost);
  CHECK(a.q10 == b.q10);
  CHECK(a.q50 == b.q50);
  CHECK(a.q90 == b.q90);
  CHECK(a.baseline_mean == b.baseline_mean);
  REQUIRE(a.costs.size() == b.costs.size());
  for (std::size_t i = 0; i < a.costs.size(); ++i) CHECK(a.costs[i] == b.costs[i]);
  REQUIRE(rep.aggregates.size() == 1);
  CHECK(rep.aggregates[0].mean_cost == a.mean_cost);
}

TEST_CASE("cost vs Z is non-increasing and task-aware dominates on the full-horizon scenario") {
  const ScenarioSpec spec = small_lqr_full();
  SweepOptions opts;
  opts.z_values = {2, 5, 10, 20, 50};
  opts.schemes = {LossMode::TaskAware, LossMode::TaskAgnostic};
  opts.seeds = {1};
  const MetricsReport rep = sweep(spec, opts);
  CHECK(rep.failed_cells == 0);

  for (const auto scheme : {"task-aware", "task-agnostic"}) {
    double prev = std::numeric_limits<double>::infinity();
    for (const int z : opts.z_values) {
      for (const auto& row : rep.aggregates)
        if (row.scheme == scheme && row.Z == z) {
          CHECK(row.mean_cost <= prev * (1.0 + 1e-9) + 1e-12);
          prev = row.mean_cost;
        }
    }
  }

  // baseline validity on the unconstrained quadratic scenario: the perfect
  // forecast is a per-cell lower bound
  for (const auto& cell : rep.cells) {
    CHECK(cell.metrics.baseline_mean <= cell.metrics.mean_cost + 1e-9);
    for (std::size_t i = 0; i < cell.metrics.costs.size(); ++i)
      CHECK(cell.metrics.baseline_costs[i] <= cell.metrics.costs[i] + 1e-9);
  }

  // task-aware at or below task-agnostic for every Z
  for (const int z : opts.z_values) {
    double aware = 0, agnostic = 0;
    for (const auto& row : rep.aggregates) {
      if (row.Z != z) continue;
      if (row.scheme == "task-aware") aware = row.mean_cost;
      if (row.scheme == "task-agnostic") agnostic = row.mean_cost;
    }
    CHECK(aware <= agnostic * (1.0 + 1e-9));
  }
}

TEST_CASE("report_min_z picks the smallest qualifying Z per scheme") {
  MetricsReport rep;
  auto add = [&](const std::string& scheme, int z, double cost, double base) {
    AggregateRow row;
    row.scheme = scheme;
    row.Z = z;
    row.cells = 1;
    row.mean_cost = cost;
    row.baseline_mean = base;
    rep.aggregates.push_back(row);
  };
  // always exactly at the optimum -> smallest swept Z
  add("task-aware", 4, 100.0, 100.0);
  add("task-aware", 8, 100.0, 100.0);
  // never within 5% -> not reached
  add("task-agnostic", 4, 120.0, 100.0);
  add("task-agnostic", 8, 111.0, 100.0);
  // qualifies only at the larger Z
  add("weighted", 4, 110.0, 100.0);
  add("weighted", 8, 104.0, 100.0);

  const auto mz = report_min_z(rep, 0.05);
  CHECK(mz.at("task-aware") == 4);
  CHECK(mz.at("task-agnostic") == -1);
  CHECK(mz.at("weighted") == 8);

  // a looser tolerance flips the verdict
  const auto loose = report_min_z(rep, 0.25);
  CHECK(loose.at("task-agnostic") == 4);
}

TEST_CASE("every reported number is recomputable from the rollouts") {
  const ScenarioSpec spec = small_lqr_mpc();
  const CellResult cell = run_experiment(spec, LossMode::TaskAware, 8, 0.0, 2);
  REQUIRE(cell.ok);

  // re-derive the metrics from the serialized rollout data alone
  std::vector<double> costs;
  for (const auto& ro : cell.rollouts) costs.push_back(ro.total_cost * spec.cost_scale);
  double mean = 0;
  for (double c : costs) mean += c;
  mean /= costs.size();
  CHECK(cell.metrics.mean_cost == doctest::Approx(mean).epsilon(1e-15));
  CHECK(cell.metrics.q10 == doctest::Approx(quantile(costs, 0.10)).epsilon(1e-15));
  CHECK(cell.metrics.q50 == doctest::Approx(quantile(costs, 0.50)).epsilon(1e-15));
  CHECK(cell.metrics.q90 == doctest::Approx(quantile(costs, 0.90)).epsilon(1e-15));

  Eigen::VectorXd cm = Eigen::VectorXd::Zero(spec.n);
  long steps = 0;
  for (const auto& ro : cell.rollouts) {
    cm += (ro.u_hat - ro.u_star).array().square().matrix().rowwise().sum();
    steps += ro.u_hat.cols();
  }
  cm /= static_cast<double>(steps);
  CHECK((cell.metrics.control_mse - cm).lpNorm<Eigen::Infinity>() < 1e-15);

  Eigen::MatrixXd fe = Eigen::MatrixXd::Zero(spec.n, spec.H);
  for (const auto& ro : cell.rollouts) fe += horizon_error(ro.s_hat, ro.s_future);
  fe /= static_cast<double>(cell.rollouts.size());
  CHECK((cell.metrics.forecast_err - fe).lpNorm<Eigen::Infinity>() < 1e-15);

  // total cost itself is recomputable from the trajectory
  const MpcProblem pb = spec.problem();
  for (const auto& ro : cell.rollouts)
    CHECK(ro.total_cost == doctest::Approx(evaluate_cost(pb, ro.x, ro.u_hat)).epsilon(1e-12));

  CHECK(cell.compression == doctest::Approx(compression_gain(spec.n, spec.H, 8)));
}

TEST_CASE("rollout serialization is bit-exact") {
  const ScenarioSpec spec = small_lqr_mpc();
  const MpcProblem pb = spec.problem();
  const SeriesBatch batch = spec.make_batch(1, 11);
  RolloutOptions opts;
  opts.x0 = spec.x0();
  const Rollout ro = rollout(pb, PerfectForecast(), batch, 0, opts);

  const std::string path = "harness_rollout.bundle";
  save_rollout(ro, path);
  const Rollout re = load_rollout(path);
  fs::remove(path);

  CHECK((ro.x - re.x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((ro.u_hat - re.u_hat).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((ro.u_star - re.u_star).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((ro.s_true - re.s_true).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((ro.stage_cost - re.stage_cost).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(ro.total_cost == re.total_cost);
  CHECK(re.has_u_star == ro.has_u_star);
  REQUIRE(re.s_hat.size() == ro.s_hat.size());
  for (std::size_t t = 0; t < ro.s_hat.size(); ++t) {
    CHECK((ro.s_hat[t] - re.s_hat[t]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((ro.s_future[t] - re.s_future[t]).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("sweep artifacts land on disk and repeat byte for byte") {
  const ScenarioSpec spec = small_lqr_full();
  SweepOptions opts;
  opts.z_values = {5, 20};
  opts.schemes = {LossMode::TaskAware, LossMode::TaskAgnostic};
  opts.seeds = {0};
  opts.out_dir = "harness_out_a";
  const MetricsReport rep = sweep(spec, opts);
  CHECK(rep.failed_cells == 0);

  CHECK(fs::exists("harness_out_a/report.csv"));
  CHECK(fs::exists("harness_out_a/report.json"));
  CHECK(fs::exists("harness_out_a/cost_vs_z.svg"));
  CHECK(fs::exists("harness_out_a/control_error.svg"));
  CHECK(fs::exists("harness_out_a/forecast_error.svg"));
  int bundles = 0;
  for (const auto& e : fs::directory_iterator("harness_out_a/rollouts"))
    if (e.path().extension() == ".bundle") ++bundles;
  CHECK(bundles == 4 * spec.test_series);

  opts.out_dir = "harness_out_b";
  sweep(spec, opts);
  CHECK(slurp("harness_out_a/report.json") == slurp("harness_out_b/report.json"));
  CHECK(slurp("harness_out_a/report.csv") == slurp("harness_out_b/report.csv"));

  // a serialized rollout reproduces its share of the report
  std::string first_bundle;
  for (const auto& e : fs::directory_iterator("harness_out_a/rollouts"))
    if (first_bundle.empty() || e.path().string() < first_bundle)
      first_bundle = e.path().string();
  const Rollout first = load_rollout(first_bundle);
  CHECK(first.total_cost * spec.cost_scale ==
        doctest::Approx(rep.cells[0].metrics.costs[0]).epsilon(1e-15));

  fs::remove_all("harness_out_a");
  fs::remove_all("harness_out_b");
}

TEST_CASE("failed cells are recorded and the sweep continues") {
  const ScenarioSpec spec = small_lqr_full();
  SweepOptions opts;
  opts.z_values = {5, 10000};  // the second exceeds pH and must fail cleanly
  opts.schemes = {LossMode::TaskAware};
  opts.seeds = {0};
  const MetricsReport rep = sweep(spec, opts);
  REQUIRE(rep.cells.size() == 2);
  CHECK(rep.failed_cells == 1);
  CHECK(rep.cells[0].ok);
  CHECK_FALSE(rep.cells[1].ok);
  CHECK_FALSE(rep.cells[1].error.empty());
  // the healthy cell still aggregates
  REQUIRE(rep.aggregates.size() == 1);
  CHECK(rep.aggregates[0].Z == 5);
}

TEST_CASE("sweep validates its axes and run_experiment its arguments") {
  const ScenarioSpec spec = small_lqr_full();
  SweepOptions opts;
  CHECK_THROWS_AS(sweep(spec, opts), ConfigError);  // no Z values
  opts.z_values = {5};
  opts.schemes.clear();
  CHECK_THROWS_AS(sweep(spec, opts), ConfigError);
  CHECK_THROWS_AS(run_experiment(spec, LossMode::TaskAware, 0, 0.0, 0), ConfigError);
  CHECK_THROWS_AS(run_experiment(spec, LossMode::TaskAware, 5, -1.0, 0), ConfigError);
}

TEST_CASE("multithreaded sweeps match the single-threaded report") {
  const ScenarioSpec spec = small_lqr_full();
  SweepOptions opts;
  opts.z_values = {5, 20};
  opts.schemes = {LossMode::TaskAware, LossMode::TaskAgnostic};
  opts.seeds = {0, 1};
  opts.threads = 1;
  const MetricsReport a = sweep(spec, opts);
  opts.threads = 4;
  const MetricsReport b = sweep(spec, opts);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].scheme == b.cells[i].scheme);
    CHECK(a.cells[i].metrics.mean_cost == b.cells[i].metrics.mean_cost);
  }
  REQUIRE(a.aggregates.size() == b.aggregates.size());
  for (std::size_t i = 0; i < a.aggregates.size(); ++i)
    CHECK(a.aggregates[i].mean_cost == b.aggregates[i].mean_cost);
}
