#ifndef CODESIGN_TIMESERIES_HPP
#define CODESIGN_TIMESERIES_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "codesign/config.hpp"

namespace codesign {

enum class SignalKind { Log, NegExp, Sine, Square, Sawtooth };

SignalKind signal_kind_from_string(const std::string& s);
std::string to_string(SignalKind k);

// One deterministic base component per signal dimension. When a batch has
// more dimensions than configured components, the list is cycled.
struct ComponentSpec {
  SignalKind kind = SignalKind::Sine;
  double amplitude = 1.0;
  double period = 20.0;  // > 0
  double phase = 0.0;    // radians
};

struct GeneratorConfig {
  std::vector<ComponentSpec> components;
  double noise_std = 0.0;  // std of each Gaussian random-walk increment
  std::uint64_t seed = 0;

  void validate() const;
  static GeneratorConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
};

// N series of p dimensions over time indices -W+1 .. T-1.
// Column c of a series holds time t = c - (W - 1).
struct SeriesBatch {
  std::vector<Eigen::MatrixXd> series;  // each p x (W - 1 + T)
  int p = 0;
  int T = 0;
  int W = 1;

  int count() const { return static_cast<int>(series.size()); }
  int cols() const { return W - 1 + T; }
  int col_of(int t) const { return t + W - 1; }
  void validate() const;
};

enum class ScaleMode { UnitInterval, SymmetricUnit };

ScaleMode scale_mode_from_string(const std::string& s);
std::string to_string(ScaleMode m);

// Per-dimension affine map scaled = gain * x + offset. Constant dimensions
// keep gain = 1 and land on the midpoint of the target range, so the map
// stays invertible.
struct ScaleParams {
  ScaleMode mode = ScaleMode::UnitInterval;
  Eigen::VectorXd gain;
  Eigen::VectorXd offset;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& scaled) const;
};

struct WindowPair {
  Eigen::MatrixXd history;  // p x W, times t-W+1 .. t
  Eigen::MatrixXd future;   // p x H, times t .. t+H-1
  int t = 0;
};

enum class PadMode { None, HoldLast };

SeriesBatch generate(const GeneratorConfig& cfg, int N, int p, int T, int W);

// Column-major (time-major) flattening of a p x H window and its inverse.
Eigen::VectorXd flatten(const Eigen::MatrixXd& m);
Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int rows, int cols);

std::pair<SeriesBatch, ScaleParams> scale(const SeriesBatch& batch, ScaleMode mode);
SeriesBatch apply_scale(const SeriesBatch& batch, const ScaleParams& params);
SeriesBatch invert_scale(const SeriesBatch& batch, const ScaleParams& params);

WindowPair windows(const SeriesBatch& batch, int series_index, int t, int H,
                   PadMode pad = PadMode::None);

// One series per CSV file under `dir`; rows are time steps, columns are
// signal dimensions, and the leading comment row carries p, T, W, N.
void save_csv(const SeriesBatch& batch, const std::string& dir);
SeriesBatch load_csv(const std::string& path);

}  // namespace codesign

#endif
