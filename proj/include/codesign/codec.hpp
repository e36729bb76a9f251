#ifndef CODESIGN_CODEC_HPP
#define CODESIGN_CODEC_HPP

#include <Eigen/Core>

#include "codesign/matrix_bundle.hpp"

namespace codesign {

// Columns are flattened exogenous windows, time-major: (s_t dims, s_{t+1}
// dims, ...).
struct SampleMatrix {
  Eigen::MatrixXd S;  // pH x N
  int count() const { return static_cast<int>(S.cols()); }
  int dim() const { return static_cast<int>(S.rows()); }
};

// Linear encoder/decoder pair around a Z-dimensional bottleneck.
struct LinearCodec {
  Eigen::MatrixXd E;            // Z x pH
  Eigen::MatrixXd D;            // pH x Z
  int Z = 0;
  Eigen::MatrixXd weight_eigvecs;   // Y, pH x pH orthogonal
  Eigen::VectorXd weight_eigvals;   // Lambda diagonal of Psi + lambda I
  double objective = 0.0;           // achieved weighted fit objective (tail sum)

  Eigen::VectorXd encode(const Eigen::VectorXd& s_flat) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& phi) const;
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& S) const { return D * (E * S); }

  MatrixBundle to_bundle() const;
  static LinearCodec from_bundle(const MatrixBundle& b);
};

// Optimal codec for the weighted objective
//   sum_i (Shat_i - S_i)^T (Psi + lambda I) (Shat_i - S_i)
// via the truncated SVD of Lambda^{1/2} Y^T S. The achieved objective is the
// tail sum of discarded squared singular values.
LinearCodec fit_task_aware(const Eigen::MatrixXd& Psi, double lambda_f, const SampleMatrix& S,
                           int Z);

// Plain truncated SVD of S (uncentered PCA): weight matrix = identity.
LinearCodec fit_task_agnostic(const SampleMatrix& S, int Z);

// Weighted fit objective of an arbitrary codec, for cross-checks.
double weighted_objective(const LinearCodec& codec, const Eigen::MatrixXd& Psi, double lambda_f,
                          const SampleMatrix& S);

// Singular-value spectrum of the weighted sample matrix (all pH values).
Eigen::VectorXd weighted_spectrum(const Eigen::MatrixXd& Psi, double lambda_f,
                                  const SampleMatrix& S);

}  // namespace codesign

#endif
