#ifndef CODESIGN_MPC_HPP
#define CODESIGN_MPC_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "codesign/lqr.hpp"
#include "codesign/timeseries.hpp"

namespace codesign {

enum class MpcKind { Linear, NonlinearStreaming };

// Receding-horizon problem with n = m = p.
//
// Linear kind:   x_{t+1} = x_t + u_t - C_s s_t, box bounds on u, cost
//                gamma_e ||[x-L]_+||^2 + gamma_s ||[L-x]_+||^2 + gamma_u ||u||^2.
// Nonlinear streaming kind: x_{t+1} = [x_t - u_t (/) s_t]_+ + L_x + eta_t,
//                cost gamma_x ||x-L_x||^2 + gamma_u ||u-L_u||^2.
struct MpcProblem {
  MpcKind kind = MpcKind::Linear;
  int n = 1;
  int H = 1;
  Eigen::VectorXd L_set;
  double gamma_e = 1.0, gamma_s = 1.0, gamma_u = 1.0;
  Eigen::VectorXd u_min, u_max;  // entries may be +-infinity
  Eigen::MatrixXd C_s;           // n x n gain on s in the linear dynamics

  // nonlinear streaming only
  Eigen::VectorXd L_x, L_u;
  double gamma_x = 0.25;
  double noise_std = 0.0;     // transition noise eta
  double s_floor = 1e-3;      // clamp for the element-wise division
  double softplus_beta = 50;  // hinge smoothing used by the planner only

  void validate() const;
  bool bounded() const;

  // exact dynamics (hinge, not softplus); eta is added for the nonlinear kind
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& s, const Eigen::VectorXd& eta) const;
  double state_cost(const Eigen::VectorXd& x) const;
  double control_cost(const Eigen::VectorXd& u) const;
};

enum class BoundStatus { Free, Lower, Upper };

// Everything needed to differentiate the local affine solution map of a
// solved plan: the active set, sign-pattern weights of the piecewise
// quadratic, and the reduced-Hessian factorization.
struct QpJacobianContext {
  int n = 0, H = 0;
  Eigen::MatrixXd C_s;
  std::vector<BoundStatus> active;     // n*H control coordinates
  Eigen::VectorXd weights;             // n*H state coordinates (k = 1..H)
  std::vector<int> free_idx;
  Eigen::LDLT<Eigen::MatrixXd> reduced_hessian;
  bool degenerate = false;             // some state coordinate sat exactly on L_set
};

struct PlanResult {
  Eigen::MatrixXd u_plan;  // n x H
  Eigen::MatrixXd x_pred;  // n x (H+1), includes the given x_t
  double cost = 0.0;       // horizon cost of the plan under the forecast
  std::vector<BoundStatus> active_set;
  double kkt_residual = 0.0;
  QpJacobianContext jac;   // linear kind only
};

PlanResult plan(const MpcProblem& problem, const Eigen::VectorXd& x_t,
                const Eigen::MatrixXd& s_forecast);

// Vector-Jacobian products of the planned controls at a solved linear plan.
// upstream is n x H (gradient w.r.t. u_plan).
Eigen::MatrixXd qp_plan_vjp(const QpJacobianContext& ctx, const Eigen::MatrixXd& upstream);
Eigen::VectorXd qp_plan_vjp_state(const QpJacobianContext& ctx, const Eigen::MatrixXd& upstream);

// Source of per-step forecasts consumed by rollouts.
class ForecastSource {
 public:
  virtual ~ForecastSource() = default;
  // p x H forecast of s_{t:t+H-1} for one series
  virtual Eigen::MatrixXd forecast(const SeriesBatch& batch, int series, int t, int H) const = 0;
};

class PerfectForecast : public ForecastSource {
 public:
  Eigen::MatrixXd forecast(const SeriesBatch& batch, int series, int t, int H) const override;
};

class ZeroForecast : public ForecastSource {
 public:
  Eigen::MatrixXd forecast(const SeriesBatch& batch, int series, int t, int H) const override;
};

// Passes the true future window through a fitted linear codec.
class CodecForecast : public ForecastSource {
 public:
  explicit CodecForecast(const class LinearCodec& codec);
  Eigen::MatrixXd forecast(const SeriesBatch& batch, int series, int t, int H) const override;

 private:
  const LinearCodec* codec_;
};

struct RolloutOptions {
  int T = 0;                 // steps; 0 means batch.T - H + 1
  Eigen::VectorXd x0;        // empty means L_set (or L_x for streaming)
  bool compute_u_star = true;
  bool keep_plans = false;   // retain PlanResults for differentiation
  std::uint64_t noise_seed = 0;
};

struct Rollout {
  Eigen::MatrixXd x;       // n x (T+1)
  Eigen::MatrixXd u_hat;   // n x T
  Eigen::MatrixXd u_star;  // n x T when computed
  Eigen::MatrixXd s_true;  // p x T (enacted steps)
  std::vector<Eigen::MatrixXd> s_hat;    // per-step p x H forecasts
  std::vector<Eigen::MatrixXd> s_future; // per-step true p x H windows
  Eigen::VectorXd stage_cost;            // per step: state(x_{t}) + control(u_t)
  double total_cost = 0.0;               // includes terminal state term
  bool has_u_star = false;
  std::vector<PlanResult> plans;         // when kept
};

Rollout rollout(const MpcProblem& problem, const ForecastSource& source,
                const SeriesBatch& batch, int series, const RolloutOptions& opts = {});

// Independent re-evaluation of the cost on a stored trajectory.
double evaluate_cost(const MpcProblem& problem, const Eigen::MatrixXd& x,
                     const Eigen::MatrixXd& u);

// First control of the unconstrained closed-form LQR solution; oracle for
// plan() when bounds are infinite and gamma_e = gamma_s.
Eigen::VectorXd lqr_mpc_reference(const LtiSpec& spec, const Eigen::VectorXd& x_t,
                                  const Eigen::MatrixXd& s_forecast);

// The LtiSpec equivalent of a symmetric unbounded linear MpcProblem.
LtiSpec mpc_as_lti(const MpcProblem& problem);

}  // namespace codesign

#endif
