#ifndef CODESIGN_FORECASTER_HPP
#define CODESIGN_FORECASTER_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "codesign/mpc.hpp"
#include "codesign/tape.hpp"
#include "codesign/timeseries.hpp"

namespace codesign {

enum class LossMode { TaskAgnostic, TaskAware, Weighted };

LossMode loss_mode_from_string(const std::string& s);
std::string to_string(LossMode m);

// Feedforward trunk (2 hidden ReLU layers) producing a full-dimensional
// forecast, followed by a linear bottleneck codec E (Z x pH) and D (pH x Z).
// The mode only selects the training loss; the forward pass is identical.
struct ForecastModel {
  int p = 1, W = 1, H = 1, Z = 1;
  int hidden = 64;
  bool linear_trunk = false;  // identity activations instead of ReLU
  LossMode mode = LossMode::TaskAgnostic;
  double lambda_f = 0.0;

  Eigen::MatrixXd W1, W2, W3;  // hidden x pW, hidden x hidden, pH x hidden
  Eigen::MatrixXd b1, b2, b3;  // column vectors
  Eigen::MatrixXd E, D;

  bool has_scale = false;  // when set, histories are scaled on the way in and
  ScaleParams scale;       // forecasts inverse-scaled on the way out

  static ForecastModel init(int p, int W, int H, int Z, LossMode mode, double lambda_f,
                            std::uint64_t seed, int hidden = 64, bool linear_trunk = false);

  Eigen::VectorXd trunk(const Eigen::VectorXd& hist_flat) const;
  Eigen::VectorXd encode(const Eigen::MatrixXd& history) const;  // Z-vector
  Eigen::MatrixXd decode(const Eigen::VectorXd& phi) const;      // p x H
  Eigen::MatrixXd forecast(const Eigen::MatrixXd& history) const;

  long parameter_count() const;

  // Tape forward pass. Leaves are created once per tape and reused across
  // rollout steps.
  struct Leaves {
    Tape::NodeId W1, b1, W2, b2, W3, b3, E, D;
  };
  Leaves make_leaves(Tape& tape) const;
  // p x H forecast node in the controller's (inverse-scaled) space
  Tape::NodeId forward(Tape& tape, const Leaves& leaves, const Eigen::MatrixXd& history) const;

  // Parameter access in a fixed order (trunk then codec) for the optimizer.
  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<const Eigen::MatrixXd*> parameters() const;
  static std::vector<Tape::NodeId> leaf_ids(const Leaves& l);

  void save(const std::string& path) const;
  static ForecastModel load(const std::string& path);
};

// Rollout forecast source backed by a trained model.
class ModelForecast : public ForecastSource {
 public:
  explicit ModelForecast(const ForecastModel& model) : model_(&model) {}
  Eigen::MatrixXd forecast(const SeriesBatch& batch, int series, int t, int H) const override;

 private:
  const ForecastModel* model_;
};

// (1/T) sum_t ||s_t - s_hat_t||^2 over enacted steps (first forecast column).
double forecast_mse(const std::vector<Eigen::MatrixXd>& s_hat_seq, const Eigen::MatrixXd& s_true);

// Mean squared forecast error per (dimension, horizon offset): p x H.
Eigen::MatrixXd horizon_error(const std::vector<Eigen::MatrixXd>& s_hat_seq,
                              const std::vector<Eigen::MatrixXd>& s_future_seq);

}  // namespace codesign

#endif
