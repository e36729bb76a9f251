#include "codesign/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "codesign/errors.hpp"

namespace codesign {

TrainLoss train_loss_from_string(const std::string& s) {
  if (s == "total") return TrainLoss::Total;
  if (s == "surrogate") return TrainLoss::Surrogate;
  if (s == "mse") return TrainLoss::Mse;
  throw ConfigError("unknown training loss '" + s + "'");
}

std::string to_string(TrainLoss l) {
  switch (l) {
    case TrainLoss::Total: return "total";
    case TrainLoss::Surrogate: return "surrogate";
    case TrainLoss::Mse: return "mse";
  }
  return "?";
}

void adam_step(AdamState& st, const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<Eigen::MatrixXd>& grads, double lr) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter/gradient count");
  if (st.m.empty()) {
    for (const auto* p : params) {
      st.m.emplace_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      st.v.emplace_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grads[i];
    st.v[i] = st.beta2 * st.v[i].array().matrix() +
              (1.0 - st.beta2) * grads[i].array().square().matrix();
    const Eigen::ArrayXXd mhat = st.m[i].array() / bc1;
    const Eigen::ArrayXXd vhat = st.v[i].array() / bc2;
    params[i]->array() -= lr * mhat / (vhat.sqrt() + st.eps);
  }
}

DifferentiableRollout record_rollout(const ForecastModel& model, const MpcProblem& problem,
                                     const SeriesBatch& batch, int series, bool full_unroll) {
  problem.validate();
  batch.validate();
  if (problem.kind != MpcKind::Linear)
    throw ConfigError("record_rollout: only the linear kind is differentiable");
  if (model.p != batch.p || model.p != problem.n)
    throw DimensionError("record_rollout: model/batch/problem dimension mismatch");
  if (model.W != batch.W) throw DimensionError("record_rollout: history length mismatch");
  if (model.H != problem.H) throw DimensionError("record_rollout: horizon mismatch");

  const int n = problem.n, H = problem.H;
  const int T = batch.T - H + 1;
  if (T < 1) throw DimensionError("record_rollout: series too short for the horizon");

  DifferentiableRollout ro;
  ro.problem = &problem;
  Tape& tape = ro.tape;
  const ForecastModel::Leaves leaves = model.make_leaves(tape);
  ro.param_nodes = ForecastModel::leaf_ids(leaves);

  Rollout& d = ro.data;
  d.x.resize(n, T + 1);
  d.u_hat.resize(n, T);
  d.u_star.resize(n, T);
  d.s_true.resize(n, T);
  d.stage_cost.resize(T);
  d.has_u_star = true;
  d.x.col(0) = problem.L_set;

  Tape::NodeId x_node = full_unroll ? tape.constant(d.x.col(0)) : -1;

  for (int t = 0; t < T; ++t) {
    const WindowPair w = windows(batch, series, t, H);
    const Tape::NodeId s_hat_node = model.forward(tape, leaves, w.history);
    const Eigen::MatrixXd shat = tape.value(s_hat_node);

    PlanResult pr = plan(problem, d.x.col(t), shat);
    const Tape::NodeId u_node = tape.qp_plan(pr.jac, s_hat_node, pr.u_plan, x_node);

    d.u_hat.col(t) = pr.u_plan.col(0);
    d.u_star.col(t) = plan(problem, d.x.col(t), w.future).u_plan.col(0);
    d.s_hat.push_back(shat);
    d.s_future.push_back(w.future);
    d.s_true.col(t) = w.future.col(0);

    d.x.col(t + 1) =
        problem.step(d.x.col(t), d.u_hat.col(t), d.s_true.col(t), Eigen::VectorXd());
    d.stage_cost(t) = problem.state_cost(d.x.col(t)) + problem.control_cost(d.u_hat.col(t));

    if (full_unroll)
      x_node = tape.add(tape.sub(x_node, tape.constant(problem.C_s * d.s_true.col(t))),
                        tape.columns(u_node, 0, 1));

    ro.s_hat_nodes.push_back(s_hat_node);
    ro.u_plan_nodes.push_back(u_node);
  }
  d.total_cost = d.stage_cost.sum() + problem.state_cost(d.x.col(T));
  return ro;
}

namespace {

double reference_cost(const MpcProblem& pb, const Eigen::VectorXd& x0,
                      const Eigen::MatrixXd& u, const Eigen::MatrixXd& s) {
  Eigen::VectorXd x = x0;
  double c = 0.0;
  for (Eigen::Index t = 0; t < u.cols(); ++t) {
    c += pb.state_cost(x) + pb.control_cost(u.col(t));
    x = pb.step(x, u.col(t), s.col(t), Eigen::VectorXd());
  }
  return c + pb.state_cost(x);
}

void clip_global(std::vector<Eigen::MatrixXd>& grads, double cap) {
  if (cap <= 0) return;
  double sq = 0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > cap)
    for (auto& g : grads) g *= cap / norm;
}

}  // namespace

TrainLog train(ForecastModel& model, const MpcProblem& problem, const SeriesBatch& batch,
               const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.lr < 0) throw ConfigError("train: learning rate must be >= 0");

  std::vector<Eigen::MatrixXd*> params = model.parameters();
  AdamState adam;
  TrainLog log;
  log.best_loss = std::numeric_limits<double>::infinity();

  std::vector<Eigen::MatrixXd> last_good;
  for (const auto* p : params) last_good.push_back(*p);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Eigen::MatrixXd> grads;
    for (const auto* p : params) grads.emplace_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));

    double loss_sum = 0, jpi_sum = 0, jf_sum = 0;
    bool blew_up = false;
    try {
    for (int series = 0; series < batch.count(); ++series) {
      DifferentiableRollout ro = record_rollout(model, problem, batch, series, cfg.full_unroll);
      const Tape::NodeId loss_node =
          cfg.loss == TrainLoss::Total      ? loss_total(ro, cfg.lambda_f)
          : cfg.loss == TrainLoss::Surrogate ? loss_surrogate(ro, cfg.lambda_f)
                                             : loss_mse(ro);
      loss_sum += ro.tape.value(loss_node)(0, 0);
      ro.tape.backward(loss_node);

      const int T = static_cast<int>(ro.data.u_hat.cols());
      jpi_sum += (ro.data.total_cost -
                  reference_cost(problem, ro.data.x.col(0), ro.data.u_star, ro.data.s_true)) /
                 T;
      jf_sum += forecast_mse(ro.data.s_hat, ro.data.s_true);

      if (cfg.per_series) {
        std::vector<Eigen::MatrixXd> g;
        for (std::size_t i = 0; i < params.size(); ++i)
          g.push_back(ro.tape.grad(ro.param_nodes[i]));
        clip_global(g, cfg.grad_clip);
        adam_step(adam, params, g, cfg.lr);
      } else {
        for (std::size_t i = 0; i < params.size(); ++i)
          grads[i] += ro.tape.grad(ro.param_nodes[i]);
      }
    }
    } catch (const SolverError&) {
      // a diverging model can break the planner before the loss turns NaN
      blew_up = true;
    }

    EpochStats st;
    st.epoch = epoch;
    st.loss = blew_up ? std::numeric_limits<double>::quiet_NaN() : loss_sum / batch.count();
    st.j_pi = jpi_sum / batch.count();
    st.j_forecast = jf_sum / batch.count();

    if (!std::isfinite(st.loss)) {
      for (std::size_t i = 0; i < params.size(); ++i) *params[i] = last_good[i];
      log.diverged = true;
      st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log.epochs.push_back(st);
      break;
    }

    if (!cfg.per_series) {
      for (auto& g : grads) g /= static_cast<double>(batch.count());
      clip_global(grads, cfg.grad_clip);
      adam_step(adam, params, grads, cfg.lr);
    }

    for (std::size_t i = 0; i < params.size(); ++i) last_good[i] = *params[i];
    if (st.loss < log.best_loss) {
      log.best_loss = st.loss;
      log.best_epoch = epoch;
      if (!cfg.checkpoint_path.empty()) model.save(cfg.checkpoint_path);
    }
    st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(st);
  }
  return log;
}

}  // namespace codesign
