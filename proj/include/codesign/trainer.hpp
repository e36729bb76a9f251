#ifndef CODESIGN_TRAINER_HPP
#define CODESIGN_TRAINER_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "codesign/forecaster.hpp"
#include "codesign/mpc.hpp"
#include "codesign/tape.hpp"
#include "codesign/timeseries.hpp"

namespace codesign {

enum class TrainLoss { Total, Surrogate, Mse };

TrainLoss train_loss_from_string(const std::string& s);
std::string to_string(TrainLoss l);

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<Eigen::MatrixXd> m, v;  // sized lazily on first step
};

// One Adam update in place. grads[i] matches *params[i] in shape.
void adam_step(AdamState& st, const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<Eigen::MatrixXd>& grads, double lr);

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-3;
  double lambda_f = 0.0;
  TrainLoss loss = TrainLoss::Total;
  bool full_unroll = false;   // keep the cross-step state chain on the tape
  bool per_series = false;    // update after every series instead of the full batch
  double grad_clip = 100.0;   // global l2 norm cap; <= 0 disables
  std::string checkpoint_path;  // best-so-far model saved here when non-empty
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double j_pi = 0.0;        // mean (J(u_hat) - J(u_star)) / T over series
  double j_forecast = 0.0;  // mean enacted-step forecast MSE over series
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  double best_loss = 0.0;
  int best_epoch = -1;
  bool diverged = false;  // a non-finite loss rolled the model back
};

// Forward rollout of the model against one series with every step recorded on
// a tape: forecast nodes feed plan nodes through the solved QP's implicit
// Jacobian. With full_unroll the enacted state also stays on the tape, so
// gradients flow from later plans back into earlier forecasts.
DifferentiableRollout record_rollout(const ForecastModel& model, const MpcProblem& problem,
                                     const SeriesBatch& batch, int series,
                                     bool full_unroll = false);

// Adam training loop over all series in the batch, deterministic series order
// and ordered gradient reduction. Non-finite losses restore the last finite
// parameters and stop early.
TrainLog train(ForecastModel& model, const MpcProblem& problem, const SeriesBatch& batch,
               const TrainConfig& cfg);

}  // namespace codesign

#endif
