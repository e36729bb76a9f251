#include "codesign/mpc.hpp"

#include <cmath>
#include <random>

#include "codesign/codec.hpp"
#include "codesign/errors.hpp"

namespace codesign {

namespace {

constexpr double kKktTol = 1e-9;
constexpr double kMultiplierTol = 1e-8;

Eigen::VectorXd clamp(const Eigen::VectorXd& u, const Eigen::VectorXd& lo,
                      const Eigen::VectorXd& hi) {
  return u.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

void MpcProblem::validate() const {
  if (n < 1 || H < 1) throw ConfigError("mpc: n and H must be >= 1");
  if (L_set.size() != n) throw DimensionError("mpc: L_set must have n entries");
  if (gamma_e < 0 || gamma_s < 0 || gamma_u < 0)
    throw ConfigError("mpc: weights must be >= 0");
  if (gamma_e + gamma_s + gamma_u <= 0)
    throw ConfigError("mpc: at least one weight must be positive");
  if (u_min.size() != n || u_max.size() != n)
    throw DimensionError("mpc: bounds must have n entries");
  if ((u_min.array() > u_max.array()).any())
    throw ConfigError("mpc: u_min must be <= u_max elementwise");
  if (C_s.rows() != n || C_s.cols() != n) throw DimensionError("mpc: C_s must be n x n");
  if (kind == MpcKind::NonlinearStreaming) {
    if (L_x.size() != n || L_u.size() != n)
      throw DimensionError("mpc: L_x and L_u must have n entries");
    if (noise_std < 0) throw ConfigError("mpc: noise_std must be >= 0");
  }
}

bool MpcProblem::bounded() const {
  return u_min.array().isFinite().any() || u_max.array().isFinite().any();
}

Eigen::VectorXd MpcProblem::step(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& s, const Eigen::VectorXd& eta) const {
  if (kind == MpcKind::Linear) return x + u - C_s * s;
  const Eigen::VectorXd sc = s.cwiseMax(s_floor);
  Eigen::VectorXd next = (x - u.cwiseQuotient(sc)).cwiseMax(0.0) + L_x;
  if (eta.size() > 0) next += eta;
  return next;
}

double MpcProblem::state_cost(const Eigen::VectorXd& x) const {
  if (kind == MpcKind::Linear) {
    const Eigen::VectorXd d = x - L_set;
    return gamma_e * d.cwiseMax(0.0).squaredNorm() + gamma_s * (-d).cwiseMax(0.0).squaredNorm();
  }
  return gamma_x * (x - L_x).squaredNorm();
}

double MpcProblem::control_cost(const Eigen::VectorXd& u) const {
  if (kind == MpcKind::Linear) return gamma_u * u.squaredNorm();
  return gamma_u * (u - L_u).squaredNorm();
}

// ---------------------------------------------------------------------------
// Linear kind: exact QP over the (e, d, u) split. The nonnegative split
// variables are eliminated in closed form, leaving a convex C^1 piecewise
// quadratic in u over a box:
//   f(u) = sum_k w(v_k) v_k^2 + gamma_u ||u||^2,   v = c + G u,
// where v stacks x_k - L_set for k = 1..H, G is block lower-triangular of
// identities, and w is gamma_e on the excess side, gamma_s on the shortage
// side. Solved by a projected active-set Newton iteration with a
// projected-gradient safeguard.

namespace {

struct LinearQp {
  const MpcProblem* pb;
  int n, H, nd;
  Eigen::VectorXd c;        // stacked x_k - L_set forcing, k = 1..H
  Eigen::VectorXd lo, hi;   // stacked bounds

  Eigen::VectorXd states(const Eigen::VectorXd& u) const {
    Eigen::VectorXd v(nd);
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < H; ++k) {
      cum += u.segment(k * n, n);
      v.segment(k * n, n) = c.segment(k * n, n) + cum;
    }
    return v;
  }

  Eigen::VectorXd weights(const Eigen::VectorXd& v) const {
    Eigen::VectorXd w(nd);
    for (int i = 0; i < nd; ++i) w(i) = v(i) >= 0 ? pb->gamma_e : pb->gamma_s;
    return w;
  }

  double value(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd v = states(u);
    double f = pb->gamma_u * u.squaredNorm();
    for (int i = 0; i < nd; ++i) f += (v(i) >= 0 ? pb->gamma_e : pb->gamma_s) * v(i) * v(i);
    return f;
  }

  // G^T y via reverse cumulative sums
  Eigen::VectorXd gt(const Eigen::VectorXd& y) const {
    Eigen::VectorXd out(nd);
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(n);
    for (int j = H - 1; j >= 0; --j) {
      cum += y.segment(j * n, n);
      out.segment(j * n, n) = cum;
    }
    return out;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd v = states(u);
    const Eigen::VectorXd q = 2.0 * weights(v).cwiseProduct(v);
    return 2.0 * pb->gamma_u * u + gt(q);
  }

  // Full Hessian 2 gamma_u I + 2 G^T W G for the given weights.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& w) const {
    // suffix sums sw[j] = sum_{k >= j} w_k per coordinate
    Eigen::MatrixXd sw(n, H + 1);
    sw.col(H).setZero();
    for (int k = H - 1; k >= 0; --k) sw.col(k) = sw.col(k + 1) + w.segment(k * n, n);
    Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(nd, nd);
    for (int j1 = 0; j1 < H; ++j1)
      for (int j2 = 0; j2 < H; ++j2) {
        const int jm = std::max(j1, j2);
        for (int i = 0; i < n; ++i) Hm(j1 * n + i, j2 * n + i) = 2.0 * sw(i, jm);
      }
    Hm.diagonal().array() += 2.0 * pb->gamma_u;
    return Hm;
  }

  // Exact minimizer of f along u + alpha * du for alpha in [0, max_alpha],
  // truncated at the first bound hit. Along a fixed direction f is a convex
  // C^1 piecewise quadratic, so its derivative is piecewise linear and
  // increasing: scan the sign-change breakpoints and solve the active piece.
  double exact_step(const Eigen::VectorXd& u, const Eigen::VectorXd& du,
                    double max_alpha) const {
    double cap = max_alpha;
    for (int i = 0; i < nd; ++i) {
      if (du(i) > 0 && std::isfinite(hi(i))) cap = std::min(cap, (hi(i) - u(i)) / du(i));
      else if (du(i) < 0 && std::isfinite(lo(i))) cap = std::min(cap, (lo(i) - u(i)) / du(i));
    }
    if (!(cap > 0)) return 0.0;

    const Eigen::VectorXd v = states(u);
    // t = G du: the state response to the direction
    Eigen::VectorXd t(nd);
    {
      Eigen::VectorXd cum = Eigen::VectorXd::Zero(n);
      for (int k = 0; k < H; ++k) {
        cum += du.segment(k * n, n);
        t.segment(k * n, n) = cum;
      }
    }

    std::vector<double> brk;
    brk.reserve(nd + 2);
    brk.push_back(0.0);
    for (int i = 0; i < nd; ++i)
      if (t(i) != 0) {
        const double a = -v(i) / t(i);
        if (a > 0 && a < cap) brk.push_back(a);
      }
    brk.push_back(cap);
    std::sort(brk.begin(), brk.end());

    const double qu = 2.0 * pb->gamma_u * du.squaredNorm();
    const double pu = 2.0 * pb->gamma_u * u.dot(du);
    for (std::size_t seg = 0; seg + 1 < brk.size(); ++seg) {
      const double a = brk[seg], b = brk[seg + 1];
      if (b <= a) continue;
      const double mid = 0.5 * (a + b);
      // f'(alpha) = P + Q alpha on this piece
      double P = pu, Q = qu;
      for (int i = 0; i < nd; ++i) {
        const double w = (v(i) + mid * t(i)) >= 0 ? pb->gamma_e : pb->gamma_s;
        P += 2.0 * w * v(i) * t(i);
        Q += 2.0 * w * t(i) * t(i);
      }
      const double da = P + Q * a;
      const double db = P + Q * b;
      if (da >= 0) return a;
      if (db <= 0) continue;
      return Q > 0 ? -P / Q : b;
    }
    return cap;
  }
};

}  // namespace

static PlanResult plan_linear(const MpcProblem& pb, const Eigen::VectorXd& x_t,
                              const Eigen::MatrixXd& s_forecast) {
  const int n = pb.n, H = pb.H, nd = n * H;

  LinearQp qp;
  qp.pb = &pb;
  qp.n = n;
  qp.H = H;
  qp.nd = nd;
  qp.c.resize(nd);
  {
    Eigen::VectorXd acc = x_t - pb.L_set;
    for (int k = 0; k < H; ++k) {
      acc -= pb.C_s * s_forecast.col(k);
      qp.c.segment(k * n, n) = acc;
    }
  }
  qp.lo.resize(nd);
  qp.hi.resize(nd);
  for (int k = 0; k < H; ++k) {
    qp.lo.segment(k * n, n) = pb.u_min;
    qp.hi.segment(k * n, n) = pb.u_max;
  }

  Eigen::VectorXd u = clamp(Eigen::VectorXd::Zero(nd), qp.lo, qp.hi);
  double f = qp.value(u);
  double resid = std::numeric_limits<double>::infinity();

  const int max_iter = 500;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Eigen::VectorXd g = qp.gradient(u);
    resid = (u - clamp(u - g, qp.lo, qp.hi)).lpNorm<Eigen::Infinity>();
    if (resid <= kKktTol) break;

    const Eigen::VectorXd v = qp.states(u);
    const Eigen::VectorXd w = qp.weights(v);

    // working set: coordinates held at a bound by the gradient
    std::vector<int> free;
    free.reserve(nd);
    Eigen::VectorXd target = u;
    for (int i = 0; i < nd; ++i) {
      const bool at_lo = u(i) - qp.lo(i) <= 1e-12 && g(i) > 0;
      const bool at_hi = qp.hi(i) - u(i) <= 1e-12 && g(i) < 0;
      if (at_lo) target(i) = qp.lo(i);
      else if (at_hi) target(i) = qp.hi(i);
      else free.push_back(i);
    }

    Eigen::VectorXd du = target - u;  // active coords snap to the bound
    if (!free.empty()) {
      const Eigen::MatrixXd Hm = qp.hessian(w);
      Eigen::MatrixXd Hff(free.size(), free.size());
      Eigen::VectorXd rhs(free.size());
      for (std::size_t a = 0; a < free.size(); ++a) {
        for (std::size_t b = 0; b < free.size(); ++b) Hff(a, b) = Hm(free[a], free[b]);
        double cross = 0;
        for (int i = 0; i < nd; ++i)
          if (du(i) != 0) cross += Hm(free[a], i) * du(i);
        rhs(a) = -g(free[a]) - cross;
      }
      const Eigen::VectorXd step = Hff.ldlt().solve(rhs);
      for (std::size_t a = 0; a < free.size(); ++a) du(free[a]) = step(a);
    }

    // exact line search along the Newton direction: the objective restricted
    // to a ray is a convex piecewise quadratic, so its minimizer is closed-form
    bool accepted = false;
    {
      const double alpha = qp.exact_step(u, du, 1.0);
      if (alpha > 0) {
        const Eigen::VectorXd cand = clamp(u + alpha * du, qp.lo, qp.hi);
        if ((cand - u).lpNorm<Eigen::Infinity>() > 0) {
          u = cand;
          f = qp.value(u);
          accepted = true;
        }
      }
    }
    if (!accepted) {
      // safeguard: exact search along the projected-gradient direction
      const Eigen::VectorXd d = clamp(u - g, qp.lo, qp.hi) - u;
      const double alpha = qp.exact_step(u, d, 1.0);
      if (alpha > 0 && (alpha * d).lpNorm<Eigen::Infinity>() > 0) {
        u = clamp(u + alpha * d, qp.lo, qp.hi);
        f = qp.value(u);
      } else {
        break;  // stationary to machine precision
      }
    }
  }

  {
    const Eigen::VectorXd g = qp.gradient(u);
    resid = (u - clamp(u - g, qp.lo, qp.hi)).lpNorm<Eigen::Infinity>();
  }
  if (resid > 1e-8)
    throw SolverError("plan: QP did not converge (kkt residual " + std::to_string(resid) + ")");

  PlanResult pr;
  pr.u_plan = unflatten(u, n, H);
  pr.kkt_residual = resid;

  pr.x_pred.resize(n, H + 1);
  pr.x_pred.col(0) = x_t;
  for (int k = 0; k < H; ++k)
    pr.x_pred.col(k + 1) =
        pr.x_pred.col(k) + pr.u_plan.col(k) - pb.C_s * s_forecast.col(k);

  pr.cost = 0.0;
  for (int k = 0; k <= H; ++k) pr.cost += pb.state_cost(pr.x_pred.col(k));
  for (int k = 0; k < H; ++k) pr.cost += pb.control_cost(pr.u_plan.col(k));

  // classification: at a bound with zero multiplier counts as free
  const Eigen::VectorXd g = qp.gradient(u);
  pr.active_set.resize(nd, BoundStatus::Free);
  bool zero_mult_at_bound = false;
  for (int i = 0; i < nd; ++i) {
    const bool at_lo = u(i) - qp.lo(i) <= 1e-9 * std::max(1.0, std::abs(qp.lo(i)));
    const bool at_hi = qp.hi(i) - u(i) <= 1e-9 * std::max(1.0, std::abs(qp.hi(i)));
    if (at_lo && g(i) > kMultiplierTol) pr.active_set[i] = BoundStatus::Lower;
    else if (at_hi && -g(i) > kMultiplierTol) pr.active_set[i] = BoundStatus::Upper;
    else if (at_lo || at_hi) zero_mult_at_bound = true;
  }

  // differentiation context under the final sign pattern and active set
  const Eigen::VectorXd v = qp.states(u);
  QpJacobianContext& ctx = pr.jac;
  ctx.n = n;
  ctx.H = H;
  ctx.C_s = pb.C_s;
  ctx.active = pr.active_set;
  ctx.weights = qp.weights(v);
  ctx.degenerate = zero_mult_at_bound || (v.cwiseAbs().array() < 1e-12).any();
  for (int i = 0; i < nd; ++i)
    if (pr.active_set[i] == BoundStatus::Free) ctx.free_idx.push_back(i);
  if (!ctx.free_idx.empty()) {
    const Eigen::MatrixXd Hm = qp.hessian(ctx.weights);
    Eigen::MatrixXd Hff(ctx.free_idx.size(), ctx.free_idx.size());
    for (std::size_t a = 0; a < ctx.free_idx.size(); ++a)
      for (std::size_t b = 0; b < ctx.free_idx.size(); ++b)
        Hff(a, b) = Hm(ctx.free_idx[a], ctx.free_idx[b]);
    ctx.reduced_hessian.compute(Hff);
  }
  return pr;
}

// ---------------------------------------------------------------------------
// Nonlinear streaming kind: projected gradient shooting on the
// softplus-smoothed dynamics.

static PlanResult plan_streaming(const MpcProblem& pb, const Eigen::VectorXd& x_t,
                                 const Eigen::MatrixXd& s_forecast) {
  const int n = pb.n, H = pb.H;
  const double beta = pb.softplus_beta;

  Eigen::MatrixXd sc = s_forecast.cwiseMax(pb.s_floor);
  auto softplus = [beta](double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-beta * std::abs(z))) / beta;
  };
  auto sigmoid = [beta](double z) { return 1.0 / (1.0 + std::exp(-beta * z)); };

  struct Forward {
    Eigen::MatrixXd x;  // n x (H+1)
    Eigen::MatrixXd z;  // n x H pre-hinge values
    double cost;
  };
  auto forward = [&](const Eigen::MatrixXd& u) {
    Forward fw;
    fw.x.resize(n, H + 1);
    fw.z.resize(n, H);
    fw.x.col(0) = x_t;
    fw.cost = 0;
    for (int k = 0; k < H; ++k) {
      fw.z.col(k) = fw.x.col(k) - u.col(k).cwiseQuotient(sc.col(k));
      for (int i = 0; i < n; ++i) fw.x(i, k + 1) = softplus(fw.z(i, k)) + pb.L_x(i);
      fw.cost += pb.gamma_x * (fw.x.col(k + 1) - pb.L_x).squaredNorm();
      fw.cost += pb.gamma_u * (u.col(k) - pb.L_u).squaredNorm();
    }
    return fw;
  };
  auto gradient = [&](const Eigen::MatrixXd& u, const Forward& fw) {
    Eigen::MatrixXd grad(n, H);
    Eigen::VectorXd lam = 2.0 * pb.gamma_x * (fw.x.col(H) - pb.L_x);
    for (int k = H - 1; k >= 0; --k) {
      Eigen::VectorXd dz(n);
      for (int i = 0; i < n; ++i) dz(i) = lam(i) * sigmoid(fw.z(i, k));
      grad.col(k) = -dz.cwiseQuotient(sc.col(k)) + 2.0 * pb.gamma_u * (u.col(k) - pb.L_u);
      if (k > 0) lam = dz + 2.0 * pb.gamma_x * (fw.x.col(k) - pb.L_x);
    }
    return grad;
  };
  auto project = [&](Eigen::MatrixXd u) {
    for (int k = 0; k < H; ++k) u.col(k) = clamp(u.col(k), pb.u_min, pb.u_max);
    return u;
  };

  Eigen::MatrixXd u = project(pb.L_u.replicate(1, H));
  Forward fw = forward(u);
  double step = 0.1;
  double resid = std::numeric_limits<double>::infinity();
  const int max_iter = 2000;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::MatrixXd g = gradient(u, fw);
    resid = (u - project(u - g)).norm();
    if (resid <= 1e-6) break;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::MatrixXd cand = project(u - step * g);
      const Forward cf = forward(cand);
      if (cf.cost < fw.cost - 1e-16) {
        u = cand;
        fw = cf;
        step *= 1.5;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }

  PlanResult pr;
  pr.u_plan = u;
  pr.x_pred = fw.x;
  pr.cost = fw.cost + pb.gamma_x * (x_t - pb.L_x).squaredNorm();
  pr.kkt_residual = resid;
  pr.active_set.assign(n * H, BoundStatus::Free);
  return pr;
}

PlanResult plan(const MpcProblem& problem, const Eigen::VectorXd& x_t,
                const Eigen::MatrixXd& s_forecast) {
  problem.validate();
  if (x_t.size() != problem.n) throw DimensionError("plan: x_t size mismatch");
  if (s_forecast.rows() != problem.n || s_forecast.cols() != problem.H)
    throw DimensionError("plan: forecast must be p x H");
  if (!s_forecast.allFinite()) throw ConfigError("plan: forecast must be finite");
  return problem.kind == MpcKind::Linear ? plan_linear(problem, x_t, s_forecast)
                                         : plan_streaming(problem, x_t, s_forecast);
}

Eigen::MatrixXd qp_plan_vjp(const QpJacobianContext& ctx, const Eigen::MatrixXd& upstream) {
  const int n = ctx.n, H = ctx.H, nd = n * H;
  if (upstream.rows() != n || upstream.cols() != H)
    throw DimensionError("qp_plan_vjp: upstream must be n x H");
  if (ctx.free_idx.empty()) return Eigen::MatrixXd::Zero(n, H);  // fully saturated plan

  const Eigen::VectorXd ubar = flatten(upstream);
  Eigen::VectorXd yf(ctx.free_idx.size());
  for (std::size_t a = 0; a < ctx.free_idx.size(); ++a) yf(a) = ubar(ctx.free_idx[a]);
  const Eigen::VectorXd sol = ctx.reduced_hessian.solve(yf);

  // du_f/ds = Hff^{-1} 2 G_f^T W G Cbar  =>  vjp = 2 Cbar^T G^T W G_f sol
  Eigen::VectorXd gf_sol = Eigen::VectorXd::Zero(nd);
  for (std::size_t a = 0; a < ctx.free_idx.size(); ++a) gf_sol(ctx.free_idx[a]) = sol(a);

  // t = W G gf_sol over state coordinates
  Eigen::VectorXd t(nd);
  {
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < H; ++k) {
      cum += gf_sol.segment(k * n, n);
      t.segment(k * n, n) = ctx.weights.segment(k * n, n).cwiseProduct(cum);
    }
  }
  // r = G^T t
  Eigen::VectorXd r(nd);
  {
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(n);
    for (int j = H - 1; j >= 0; --j) {
      cum += t.segment(j * n, n);
      r.segment(j * n, n) = cum;
    }
  }
  Eigen::MatrixXd out(n, H);
  for (int j = 0; j < H; ++j) out.col(j) = 2.0 * ctx.C_s.transpose() * r.segment(j * n, n);
  return out;
}

Eigen::VectorXd qp_plan_vjp_state(const QpJacobianContext& ctx, const Eigen::MatrixXd& upstream) {
  const int n = ctx.n, H = ctx.H, nd = n * H;
  if (ctx.free_idx.empty()) return Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd ubar = flatten(upstream);
  Eigen::VectorXd yf(ctx.free_idx.size());
  for (std::size_t a = 0; a < ctx.free_idx.size(); ++a) yf(a) = ubar(ctx.free_idx[a]);
  const Eigen::VectorXd sol = ctx.reduced_hessian.solve(yf);
  Eigen::VectorXd gf_sol = Eigen::VectorXd::Zero(nd);
  for (std::size_t a = 0; a < ctx.free_idx.size(); ++a) gf_sol(ctx.free_idx[a]) = sol(a);
  // du_f/dx_t = -Hff^{-1} 2 G_f^T W E1  =>  vjp = -2 E1^T W G_f sol
  Eigen::VectorXd cum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < H; ++k) {
    cum += gf_sol.segment(k * n, n);
    acc += ctx.weights.segment(k * n, n).cwiseProduct(cum);
  }
  return -2.0 * acc;
}

// ---------------------------------------------------------------------------
// Forecast sources and rollouts

Eigen::MatrixXd PerfectForecast::forecast(const SeriesBatch& batch, int series, int t,
                                          int H) const {
  return windows(batch, series, t, H).future;
}

Eigen::MatrixXd ZeroForecast::forecast(const SeriesBatch& batch, int, int, int H) const {
  return Eigen::MatrixXd::Zero(batch.p, H);
}

CodecForecast::CodecForecast(const LinearCodec& codec) : codec_(&codec) {}

Eigen::MatrixXd CodecForecast::forecast(const SeriesBatch& batch, int series, int t,
                                        int H) const {
  const Eigen::MatrixXd truth = windows(batch, series, t, H).future;
  const Eigen::VectorXd rec = codec_->decode(codec_->encode(flatten(truth)));
  return unflatten(rec, batch.p, H);
}

Rollout rollout(const MpcProblem& problem, const ForecastSource& source,
                const SeriesBatch& batch, int series, const RolloutOptions& opts) {
  problem.validate();
  batch.validate();
  const int n = problem.n, H = problem.H;
  if (batch.p != n) throw DimensionError("rollout: batch dimension must equal p = n");

  const int T = opts.T > 0 ? opts.T : batch.T - (H - 1);
  if (T < 1 || T + H - 1 > batch.T)
    throw DimensionError("rollout: series too short for T + H - 1 steps");

  Eigen::VectorXd x0 = opts.x0.size() ? opts.x0
                       : (problem.kind == MpcKind::Linear ? problem.L_set : problem.L_x);

  std::mt19937_64 rng(opts.noise_seed);
  std::normal_distribution<double> eta_dist(0.0, problem.noise_std);

  Rollout ro;
  ro.x.resize(n, T + 1);
  ro.u_hat.resize(n, T);
  ro.u_star.resize(n, T);
  ro.s_true.resize(n, T);
  ro.stage_cost.resize(T);
  ro.has_u_star = opts.compute_u_star;
  ro.x.col(0) = x0;

  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd truth = windows(batch, series, t, H).future;
    Eigen::MatrixXd shat = source.forecast(batch, series, t, H);
    if (shat.rows() != n || shat.cols() != H)
      throw DimensionError("rollout: forecast source produced wrong shape");

    PlanResult pr = plan(problem, ro.x.col(t), shat);
    ro.u_hat.col(t) = pr.u_plan.col(0);
    if (opts.compute_u_star) {
      PlanResult ps = plan(problem, ro.x.col(t), truth);
      ro.u_star.col(t) = ps.u_plan.col(0);
    }

    ro.s_hat.push_back(shat);
    ro.s_future.push_back(truth);
    if (opts.keep_plans) ro.plans.push_back(std::move(pr));

    ro.s_true.col(t) = truth.col(0);
    Eigen::VectorXd eta;
    if (problem.kind == MpcKind::NonlinearStreaming && problem.noise_std > 0) {
      eta.resize(n);
      for (int i = 0; i < n; ++i) eta(i) = eta_dist(rng);
    }
    ro.x.col(t + 1) = problem.step(ro.x.col(t), ro.u_hat.col(t), ro.s_true.col(t), eta);
    ro.stage_cost(t) = problem.state_cost(ro.x.col(t)) + problem.control_cost(ro.u_hat.col(t));
  }
  ro.total_cost = ro.stage_cost.sum() + problem.state_cost(ro.x.col(T));
  return ro;
}

double evaluate_cost(const MpcProblem& problem, const Eigen::MatrixXd& x,
                     const Eigen::MatrixXd& u) {
  if (x.cols() != u.cols() + 1) throw DimensionError("evaluate_cost: need T+1 states for T controls");
  double cost = 0;
  for (Eigen::Index t = 0; t < x.cols(); ++t) cost += problem.state_cost(x.col(t));
  for (Eigen::Index t = 0; t < u.cols(); ++t) cost += problem.control_cost(u.col(t));
  return cost;
}

Eigen::VectorXd lqr_mpc_reference(const LtiSpec& spec, const Eigen::VectorXd& x_t,
                                  const Eigen::MatrixXd& s_forecast) {
  const CodesignForms forms = build_prediction(spec);
  const Eigen::VectorXd u = optimal_control(forms, x_t, flatten(s_forecast));
  return u.head(spec.m());
}

LtiSpec mpc_as_lti(const MpcProblem& problem) {
  if (problem.kind != MpcKind::Linear)
    throw ConfigError("mpc_as_lti: only the linear kind has an LQR equivalent");
  if (problem.gamma_e != problem.gamma_s)
    throw ConfigError("mpc_as_lti: requires gamma_e == gamma_s");
  LtiSpec spec;
  const int n = problem.n;
  spec.A = Eigen::MatrixXd::Identity(n, n);
  spec.B = Eigen::MatrixXd::Identity(n, n);
  spec.C = -problem.C_s;
  spec.Q = problem.gamma_e * Eigen::MatrixXd::Identity(n, n);
  spec.R = problem.gamma_u * Eigen::MatrixXd::Identity(n, n);
  spec.H = problem.H;
  return spec;
}

}  // namespace codesign
