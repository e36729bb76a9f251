#ifndef CODESIGN_METRICS_HPP
#define CODESIGN_METRICS_HPP

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "codesign/forecaster.hpp"
#include "codesign/mpc.hpp"
#include "codesign/scenarios.hpp"

namespace codesign {

// pH / Z; the ratio of full-forecast size to transmitted representation size.
double compression_gain(int p, int H, int Z);

// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

// Everything derivable from a set of evaluation rollouts plus the matched
// perfect-forecast baseline rollouts. Costs are already cost-scale adjusted.
struct CellMetrics {
  double mean_cost = 0.0;
  double q10 = 0.0, q50 = 0.0, q90 = 0.0;
  double baseline_mean = 0.0;
  Eigen::VectorXd control_mse;   // per dimension, mean over rollouts and steps
  Eigen::MatrixXd forecast_err;  // p x H, mean squared error by horizon offset
  std::vector<double> costs;     // per-rollout scaled costs (kept for pooling)
  std::vector<double> baseline_costs;
};

CellMetrics compute_metrics(const std::vector<Rollout>& test,
                            const std::vector<Rollout>& baseline, double cost_scale);

struct CellResult {
  std::string scheme;  // "task-aware" | "weighted" | "task-agnostic"
  int Z = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;

  CellMetrics metrics;
  double compression = 0.0;
  Eigen::MatrixXd sample_traj;   // state trajectory of the first test rollout
  std::vector<Rollout> rollouts; // test rollouts (serialized alongside reports)
  std::vector<Rollout> baseline_rollouts;
};

struct AggregateRow {
  std::string scheme;
  int Z = 0;
  double lambda = 0.0;
  int cells = 0;
  double mean_cost = 0.0, q10 = 0.0, q50 = 0.0, q90 = 0.0;
  double baseline_mean = 0.0;
  double ratio = 0.0;  // mean_cost / baseline_mean
};

struct MetricsReport {
  std::string scenario;
  std::vector<CellResult> cells;
  std::vector<AggregateRow> aggregates;  // pooled across seeds
  int failed_cells = 0;
};

// Train (or fit analytically when the scenario allows it) one scheme at one
// (Z, lambda, seed) and evaluate it on held-out series.
CellResult run_experiment(const ScenarioSpec& spec, LossMode scheme, int Z, double lambda,
                          std::uint64_t seed);

struct SweepOptions {
  std::vector<int> z_values;
  std::vector<double> lambdas = {1.0};
  std::vector<LossMode> schemes = {LossMode::TaskAware, LossMode::Weighted,
                                   LossMode::TaskAgnostic};
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir;  // when non-empty, CSV + JSON + SVG artifacts land here
  int threads = 1;
};

// Cross product of schemes x Z x lambda x seeds. Failed cells are recorded
// and the sweep continues.
MetricsReport sweep(const ScenarioSpec& spec, const SweepOptions& opts);

// Smallest swept Z whose pooled mean cost is within `tolerance` of the
// baseline, per scheme; -1 when never reached.
std::map<std::string, int> report_min_z(const MetricsReport& report, double tolerance = 0.05);

// Bit-exact rollout serialization (hexfloat bundle) so every report number
// can be recomputed offline.
void save_rollout(const Rollout& ro, const std::string& path);
Rollout load_rollout(const std::string& path);

void write_report_csv(const MetricsReport& report, const std::string& path);
void write_report_json(const MetricsReport& report, const std::string& path);
void write_report_svg(const MetricsReport& report, const std::string& dir);

}  // namespace codesign

#endif
