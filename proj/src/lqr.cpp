#include "codesign/lqr.hpp"

#include <Eigen/Eigenvalues>

#include "codesign/errors.hpp"

namespace codesign {

namespace {

void require_spd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(name) + " must be square");
  if (!m.isApprox(m.transpose(), 1e-10))
    throw DimensionError(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0)
    throw DimensionError(std::string(name) + " must be positive definite");
}

}  // namespace

void LtiSpec::validate() const {
  if (H < 1) throw DimensionError("LtiSpec: H must be >= 1");
  if (A.rows() != A.cols()) throw DimensionError("LtiSpec: A must be square");
  if (B.rows() != A.rows()) throw DimensionError("LtiSpec: B row count must match A");
  if (C.rows() != A.rows()) throw DimensionError("LtiSpec: C row count must match A");
  if (Q.rows() != A.rows()) throw DimensionError("LtiSpec: Q must be n x n");
  if (R.rows() != B.cols()) throw DimensionError("LtiSpec: R must be m x m");
  require_spd(Q, "Q");
  require_spd(R, "R");
}

CodesignForms build_prediction(const LtiSpec& spec) {
  spec.validate();
  const int n = spec.n(), m = spec.m(), p = spec.p(), H = spec.H;

  CodesignForms f;
  f.n = n;
  f.m = m;
  f.p = p;
  f.H = H;
  f.Q = spec.Q;
  f.M.assign(H, Eigen::MatrixXd::Zero(n, m * H));
  f.N.assign(H, Eigen::MatrixXd::Zero(n, p * H));
  f.A_pow.resize(H);

  // A^i B / A^i C blocks shared across rows: row i holds
  // [A^i B, A^(i-1) B, ..., B, 0, ...].
  Eigen::MatrixXd Ai = Eigen::MatrixXd::Identity(n, n);
  std::vector<Eigen::MatrixXd> AiB(H), AiC(H);
  for (int i = 0; i < H; ++i) {
    AiB[i] = Ai * spec.B;
    AiC[i] = Ai * spec.C;
    Ai = spec.A * Ai;
    f.A_pow[i] = Ai;  // A^{i+1}
  }
  for (int i = 0; i < H; ++i)
    for (int j = 0; j <= i; ++j) {
      f.M[i].middleCols(j * m, m) = AiB[i - j];
      f.N[i].middleCols(j * p, p) = AiC[i - j];
    }

  f.K = Eigen::MatrixXd::Zero(m * H, m * H);
  for (int i = 0; i < H; ++i) f.K.block(i * m, i * m, m, m) = spec.R;
  f.L = Eigen::MatrixXd::Zero(m * H, p * H);
  for (int i = 0; i < H; ++i) {
    const Eigen::MatrixXd MtQ = f.M[i].transpose() * spec.Q;
    f.K += MtQ * f.M[i];
    f.L += MtQ * f.N[i];
  }
  f.K = 0.5 * (f.K + f.K.transpose());

  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.K, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0 || hi / lo > 1e12)
      throw SolverError("build_prediction: K is numerically singular (condition " +
                        std::to_string(lo > 0 ? hi / lo : std::numeric_limits<double>::infinity()) +
                        ")");
  }

  f.K_chol.compute(f.K);
  // Psi = W^T W with W = Lchol^-1 L keeps Psi exactly symmetric PSD.
  const Eigen::MatrixXd Wm =
      f.K_chol.matrixL().solve(f.L);
  f.Psi = Wm.transpose() * Wm;
  return f;
}

Eigen::VectorXd optimal_control(const CodesignForms& forms, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& s_flat) {
  if (x0.size() != forms.n) throw DimensionError("optimal_control: x0 size mismatch");
  if (s_flat.size() != forms.p * forms.H)
    throw DimensionError("optimal_control: s size mismatch");
  Eigen::VectorXd k = Eigen::VectorXd::Zero(forms.m * forms.H);
  for (int i = 0; i < forms.H; ++i)
    k += forms.M[i].transpose() * (forms.Q * (forms.A_pow[i] * x0 + forms.N[i] * s_flat));
  return -forms.K_chol.solve(k);
}

Sensitivity control_sensitivity(const CodesignForms& forms, const Eigen::VectorXd& s_hat_flat,
                                const Eigen::VectorXd& s_flat) {
  if (s_hat_flat.size() != forms.p * forms.H || s_flat.size() != forms.p * forms.H)
    throw DimensionError("control_sensitivity: forecast size mismatch");
  const Eigen::VectorXd e = s_hat_flat - s_flat;
  Sensitivity out;
  out.du = -forms.K_chol.solve(forms.L * e);
  out.extra_cost = e.dot(forms.Psi * e);
  if (out.extra_cost < 0) out.extra_cost = 0;  // clamp roundoff
  return out;
}

double total_cost_quadratic(const CodesignForms& forms, double lambda_f,
                            const Eigen::VectorXd& s_hat_flat, const Eigen::VectorXd& s_flat) {
  if (lambda_f < 0) throw ConfigError("total_cost_quadratic: lambda must be >= 0");
  const Eigen::VectorXd e = s_hat_flat - s_flat;
  return (e.dot(forms.Psi * e) + lambda_f * e.squaredNorm()) / forms.H;
}

double lqr_rollout_cost(const LtiSpec& spec, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& u_flat, const Eigen::VectorXd& s_flat) {
  const int n = spec.n(), m = spec.m(), p = spec.p(), H = spec.H;
  if (x0.size() != n || u_flat.size() != m * H || s_flat.size() != p * H)
    throw DimensionError("lqr_rollout_cost: size mismatch");
  Eigen::VectorXd x = x0;
  double cost = x.dot(spec.Q * x);
  for (int t = 0; t < H; ++t) {
    const Eigen::VectorXd u = u_flat.segment(t * m, m);
    const Eigen::VectorXd s = s_flat.segment(t * p, p);
    cost += u.dot(spec.R * u);
    x = spec.A * x + spec.B * u + spec.C * s;
    cost += x.dot(spec.Q * x);
  }
  return cost;
}

MatrixBundle CodesignForms::to_bundle() const {
  MatrixBundle b;
  Eigen::MatrixXd dims(1, 4);
  dims << n, m, p, H;
  b.put("dims", dims);
  b.put("K", K);
  b.put("L", L);
  b.put("Psi", Psi);
  b.put("Q", Q);
  for (int i = 0; i < H; ++i) {
    b.put("M" + std::to_string(i), M[i]);
    b.put("N" + std::to_string(i), N[i]);
    b.put("Apow" + std::to_string(i), A_pow[i]);
  }
  return b;
}

CodesignForms CodesignForms::from_bundle(const MatrixBundle& b) {
  CodesignForms f;
  const Eigen::MatrixXd dims = b.get("dims");
  f.n = static_cast<int>(dims(0, 0));
  f.m = static_cast<int>(dims(0, 1));
  f.p = static_cast<int>(dims(0, 2));
  f.H = static_cast<int>(dims(0, 3));
  f.K = b.get("K");
  f.L = b.get("L");
  f.Psi = b.get("Psi");
  f.Q = b.get("Q");
  f.M.resize(f.H);
  f.N.resize(f.H);
  f.A_pow.resize(f.H);
  for (int i = 0; i < f.H; ++i) {
    f.M[i] = b.get("M" + std::to_string(i));
    f.N[i] = b.get("N" + std::to_string(i));
    f.A_pow[i] = b.get("Apow" + std::to_string(i));
  }
  f.K_chol.compute(f.K);
  return f;
}

}  // namespace codesign
