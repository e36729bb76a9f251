#ifndef CODESIGN_LQR_HPP
#define CODESIGN_LQR_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <vector>

#include "codesign/matrix_bundle.hpp"

namespace codesign {

// Input-driven LQR: x_{t+1} = A x + B u + C s with quadratic state/control
// cost over a finite horizon H.
struct LtiSpec {
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x m
  Eigen::MatrixXd C;  // n x p
  Eigen::MatrixXd Q;  // n x n, symmetric PD
  Eigen::MatrixXd R;  // m x m, symmetric PD
  int H = 1;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.cols()); }
  void validate() const;
};

// Closed forms derived from an LtiSpec. State i+1 is an affine map of the
// stacked control and exogenous vectors: x_{i+1} = A^{i+1} x0 + M[i] u + N[i] s.
// K is the control-cost Hessian, L couples forecast error into controls,
// and Psi = L^T K^-1 L weights forecast errors by their control-cost impact.
struct CodesignForms {
  std::vector<Eigen::MatrixXd> M;       // H entries, n x mH
  std::vector<Eigen::MatrixXd> N;       // H entries, n x pH
  std::vector<Eigen::MatrixXd> A_pow;   // A^1 .. A^H
  Eigen::MatrixXd K;                    // mH x mH, symmetric PD
  Eigen::MatrixXd L;                    // mH x pH
  Eigen::MatrixXd Psi;                  // pH x pH, symmetric PSD
  Eigen::LLT<Eigen::MatrixXd> K_chol;
  Eigen::MatrixXd Q;
  int n = 0, m = 0, p = 0, H = 0;

  MatrixBundle to_bundle() const;
  static CodesignForms from_bundle(const MatrixBundle& b);
};

CodesignForms build_prediction(const LtiSpec& spec);

// u* = -K^-1 k(x0, s), solved through the Cholesky factor of K.
Eigen::VectorXd optimal_control(const CodesignForms& forms, const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& s_flat);

struct Sensitivity {
  Eigen::VectorXd du;  // u_hat - u*
  double extra_cost;   // (s_hat - s)^T Psi (s_hat - s), >= 0
};

Sensitivity control_sensitivity(const CodesignForms& forms, const Eigen::VectorXd& s_hat_flat,
                                const Eigen::VectorXd& s_flat);

// (1/H) (s_hat - s)^T (Psi + lambda I) (s_hat - s)
double total_cost_quadratic(const CodesignForms& forms, double lambda_f,
                            const Eigen::VectorXd& s_hat_flat, const Eigen::VectorXd& s_flat);

// Reference rollout of the quadratic cost for a given stacked control; used
// by tests and by absolute-cost reporting.
double lqr_rollout_cost(const LtiSpec& spec, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& u_flat, const Eigen::VectorXd& s_flat);

}  // namespace codesign

#endif
