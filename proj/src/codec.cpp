#include "codesign/codec.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <iostream>

#include "codesign/errors.hpp"

namespace codesign {

namespace {

// Deterministic sign convention: each U column's largest-magnitude entry is
// positive.
void orient_columns(Eigen::MatrixXd& U) {
  for (Eigen::Index c = 0; c < U.cols(); ++c) {
    Eigen::Index imax = 0;
    U.col(c).cwiseAbs().maxCoeff(&imax);
    if (U(imax, c) < 0) U.col(c) = -U.col(c);
  }
}

LinearCodec fit_weighted(const Eigen::MatrixXd& Y, const Eigen::VectorXd& lam,
                         const SampleMatrix& S, int Z) {
  const int d = S.dim();
  if (Z < 1 || Z > d) throw DimensionError("codec fit: Z must be in [1, pH]");
  if (S.count() < 1) throw DimensionError("codec fit: need at least one sample");

  const Eigen::VectorXd sqrt_lam = lam.cwiseSqrt();
  const Eigen::MatrixXd Wt = sqrt_lam.asDiagonal() * Y.transpose();  // Lambda^{1/2} Y^T
  const Eigen::MatrixXd WS = Wt * S.S;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(WS, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd U = svd.matrixU().leftCols(std::min<Eigen::Index>(Z, svd.matrixU().cols()));
  if (U.cols() < Z) {
    // fewer samples than Z: pad with zero directions, objective already 0
    Eigen::MatrixXd Ufull = Eigen::MatrixXd::Zero(d, Z);
    Ufull.leftCols(U.cols()) = U;
    U = Ufull;
  }
  orient_columns(U);

  LinearCodec c;
  c.Z = Z;
  c.weight_eigvecs = Y;
  c.weight_eigvals = lam;
  c.E = U.transpose() * Wt;
  c.D = Y * sqrt_lam.cwiseInverse().asDiagonal() * U;  // (Lambda^{1/2} Y^T)^{-1} U
  c.objective = 0.0;
  for (Eigen::Index j = Z; j < svd.singularValues().size(); ++j)
    c.objective += svd.singularValues()(j) * svd.singularValues()(j);
  return c;
}

}  // namespace

LinearCodec fit_task_aware(const Eigen::MatrixXd& Psi, double lambda_f, const SampleMatrix& S,
                           int Z) {
  if (lambda_f < 0) throw ConfigError("fit_task_aware: lambda must be >= 0");
  if (Psi.rows() != Psi.cols() || Psi.rows() != S.dim())
    throw DimensionError("fit_task_aware: Psi must be pH x pH matching S");

  Eigen::MatrixXd Wmat = Psi + lambda_f * Eigen::MatrixXd::Identity(S.dim(), S.dim());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Wmat);
  Eigen::VectorXd lam = es.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  if (lam.minCoeff() <= 1e-12 * std::max(scale, 1.0)) {
    if (lambda_f > 0)
      throw SolverError("fit_task_aware: Psi + lambda I numerically singular");
    // rank-deficient Psi at lambda = 0: small internal ridge keeps
    // Lambda^{1/2} Y^T invertible
    const double ridge = 1e-10 * Psi.trace() / S.dim();
    std::cerr << "fit_task_aware: Psi is rank deficient at lambda=0, adding ridge "
              << ridge << "\n";
    Wmat += ridge * Eigen::MatrixXd::Identity(S.dim(), S.dim());
    es.compute(Wmat);
    lam = es.eigenvalues();
    if (lam.minCoeff() <= 0)
      throw SolverError("fit_task_aware: Psi singular even after internal ridge");
  }
  return fit_weighted(es.eigenvectors(), lam, S, Z);
}

LinearCodec fit_task_agnostic(const SampleMatrix& S, int Z) {
  const int d = S.dim();
  return fit_weighted(Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Ones(d), S, Z);
}

Eigen::VectorXd LinearCodec::encode(const Eigen::VectorXd& s_flat) const {
  if (s_flat.size() != E.cols()) throw DimensionError("codec encode: input size mismatch");
  return E * s_flat;
}

Eigen::VectorXd LinearCodec::decode(const Eigen::VectorXd& phi) const {
  if (phi.size() != D.cols()) throw DimensionError("codec decode: input size mismatch");
  return D * phi;
}

double weighted_objective(const LinearCodec& codec, const Eigen::MatrixXd& Psi, double lambda_f,
                          const SampleMatrix& S) {
  const Eigen::MatrixXd Wmat =
      Psi + lambda_f * Eigen::MatrixXd::Identity(S.dim(), S.dim());
  const Eigen::MatrixXd R = codec.reconstruct(S.S) - S.S;
  double obj = 0.0;
  for (int i = 0; i < S.count(); ++i) obj += R.col(i).dot(Wmat * R.col(i));
  return obj;
}

Eigen::VectorXd weighted_spectrum(const Eigen::MatrixXd& Psi, double lambda_f,
                                  const SampleMatrix& S) {
  Eigen::MatrixXd Wmat = Psi + lambda_f * Eigen::MatrixXd::Identity(S.dim(), S.dim());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Wmat);
  const Eigen::MatrixXd WS =
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose() * S.S;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(WS);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(S.dim());
  out.head(svd.singularValues().size()) = svd.singularValues();
  return out;
}

MatrixBundle LinearCodec::to_bundle() const {
  MatrixBundle b;
  Eigen::MatrixXd z(1, 1);
  z << Z;
  b.put("Z", z);
  b.put("E", E);
  b.put("D", D);
  b.put("Y", weight_eigvecs);
  b.put("Lambda", weight_eigvals);
  Eigen::MatrixXd obj(1, 1);
  obj << objective;
  b.put("objective", obj);
  return b;
}

LinearCodec LinearCodec::from_bundle(const MatrixBundle& b) {
  LinearCodec c;
  c.Z = static_cast<int>(b.get("Z")(0, 0));
  c.E = b.get("E");
  c.D = b.get("D");
  c.weight_eigvecs = b.get("Y");
  c.weight_eigvals = b.get("Lambda");
  c.objective = b.get("objective")(0, 0);
  return c;
}

}  // namespace codesign
