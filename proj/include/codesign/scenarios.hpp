#ifndef CODESIGN_SCENARIOS_HPP
#define CODESIGN_SCENARIOS_HPP

#include <limits>
#include <string>
#include <vector>

#include "codesign/config.hpp"
#include "codesign/lqr.hpp"
#include "codesign/mpc.hpp"
#include "codesign/timeseries.hpp"

namespace codesign {

// A complete experiment definition: dataset shape, generator defaults,
// controller parameters, model dimensions, and training defaults. Real data
// can be substituted by pointing data_csv at a directory of series files.
struct ScenarioSpec {
  std::string name;
  int n = 1;  // n = m = p throughout
  int T = 1, W = 1, H = 1;

  MpcKind kind = MpcKind::Linear;
  double level = 0.0;  // setpoint L (replicated across dimensions)
  double gamma_e = 1.0, gamma_s = 1.0, gamma_u = 1.0;
  double u_lo = -std::numeric_limits<double>::infinity();
  double u_hi = std::numeric_limits<double>::infinity();
  Eigen::VectorXd c_diag;  // diagonal of C_s; empty means identity

  // nonlinear streaming
  double gamma_x = 0.25;
  double level_x = 0.5, level_u = 0.2;
  double noise_std_dyn = 0.0;

  bool use_scaling = false;
  ScaleMode scale_mode = ScaleMode::UnitInterval;

  bool analytic = false;     // single-shot LQR over one horizon, no rollout
  double cost_scale = 1.0;   // applied to reported costs only
  bool x0_at_level = true;   // rollout start: setpoint (true) or zero (false)

  int train_series = 15, test_series = 15;
  int epochs = 40;
  double default_lambda = 1.0;

  GeneratorConfig generator;
  std::string data_csv;  // when non-empty, load series instead of generating

  void validate() const;
  MpcProblem problem() const;
  LtiSpec lti() const;  // A = B = I, C = -C_s, identity weights
  Eigen::VectorXd x0() const;

  // Generated (or loaded) series long enough for T enacted steps plus the
  // lookahead needed by the final plan. `offset` decorrelates train and test.
  SeriesBatch make_batch(int count, std::uint64_t seed, std::uint64_t offset = 0) const;

  KeyValueConfig to_config() const;
  static ScenarioSpec from_config(const KeyValueConfig& cfg);
  void save(const std::string& path) const;
  static ScenarioSpec load(const std::string& path);
};

const std::vector<std::string>& builtin_names();
ScenarioSpec builtin(const std::string& name);

}  // namespace codesign

#endif
