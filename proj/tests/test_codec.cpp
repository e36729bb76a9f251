#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "codesign/codec.hpp"
#include "codesign/errors.hpp"
#include "codesign/lqr.hpp"

using namespace codesign;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

Eigen::MatrixXd random_psd(std::mt19937_64& rng, int d) {
  const Eigen::MatrixXd g = random_matrix(rng, d, d);
  return g.transpose() * g;
}

SampleMatrix random_samples(std::mt19937_64& rng, int d, int count) {
  SampleMatrix s;
  s.S = random_matrix(rng, d, count);
  return s;
}

double plain_mse(const LinearCodec& codec, const SampleMatrix& S) {
  return (codec.reconstruct(S.S) - S.S).squaredNorm();
}

}  // namespace

TEST_CASE("fit_task_aware: Z = pH reconstructs exactly with zero objective") {
  std::mt19937_64 rng(3);
  const int d = 6;
  const Eigen::MatrixXd Psi = random_psd(rng, d);
  const SampleMatrix S = random_samples(rng, d, 20);
  const LinearCodec codec = fit_task_aware(Psi, 0.5, S, d);
  CHECK((codec.reconstruct(S.S) - S.S).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(codec.objective < 1e-8 * S.S.squaredNorm());
}

TEST_CASE("fit_task_aware: identity weight, axis-aligned samples, Z=1") {
  // Psi + lambda I = I; S columns (2,0) and (0,1): the dominant direction is
  // the first coordinate and the discarded tail is 1^2 = 1.
  const Eigen::MatrixXd Psi = Eigen::MatrixXd::Zero(2, 2);
  SampleMatrix S;
  S.S.resize(2, 2);
  S.S << 2, 0, 0, 1;
  const LinearCodec codec = fit_task_aware(Psi, 1.0, S, 1);
  const Eigen::MatrixXd rec = codec.reconstruct(S.S);
  CHECK(rec(0, 0) == doctest::Approx(2.0));
  CHECK(rec(1, 0) == doctest::Approx(0.0));
  CHECK(rec(0, 1) == doctest::Approx(0.0));
  CHECK(rec(1, 1) == doctest::Approx(0.0));
  CHECK(codec.objective == doctest::Approx(1.0));
}

TEST_CASE("fit_task_aware: objective equals the discarded tail of the weighted spectrum") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 8;
    const Eigen::MatrixXd Psi = random_psd(rng, d);
    const SampleMatrix S = random_samples(rng, d, 30);
    const double lambda = 0.3;
    const Eigen::VectorXd sv = weighted_spectrum(Psi, lambda, S);
    for (int Z : {1, 3, 5, 7}) {
      const LinearCodec codec = fit_task_aware(Psi, lambda, S, Z);
      double tail = 0;
      for (int j = Z; j < d; ++j) tail += sv(j) * sv(j);
      CHECK(std::abs(codec.objective - tail) < 1e-8 * (1.0 + tail));
      // the stored objective agrees with an independent re-evaluation
      const double direct = weighted_objective(codec, Psi, lambda, S);
      CHECK(std::abs(direct - tail) < 1e-8 * (1.0 + tail));
    }
  }
}

TEST_CASE("fit_task_aware: eigenpair bookkeeping is orthogonal and positive") {
  std::mt19937_64 rng(9);
  const int d = 6;
  const LinearCodec codec =
      fit_task_aware(random_psd(rng, d), 0.7, random_samples(rng, d, 15), 3);
  const Eigen::MatrixXd Y = codec.weight_eigvecs;
  CHECK((Y.transpose() * Y - Eigen::MatrixXd::Identity(d, d)).norm() < 1e-10);
  CHECK(codec.weight_eigvals.minCoeff() > 0);
}

TEST_CASE("fit_task_agnostic: equals the identity-weight task-aware fit") {
  std::mt19937_64 rng(11);
  const int d = 6;
  const SampleMatrix S = random_samples(rng, d, 25);
  const LinearCodec agn = fit_task_agnostic(S, 3);
  const LinearCodec aware = fit_task_aware(Eigen::MatrixXd::Zero(d, d), 1.0, S, 3);
  CHECK((agn.reconstruct(S.S) - aware.reconstruct(S.S)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_task_agnostic: rank-1 samples reconstruct exactly at Z=1") {
  std::mt19937_64 rng(13);
  const Eigen::VectorXd dir = random_matrix(rng, 5, 1);
  SampleMatrix S;
  S.S = dir * random_matrix(rng, 1, 12);
  const LinearCodec codec = fit_task_agnostic(S, 1);
  CHECK((codec.reconstruct(S.S) - S.S).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_task_agnostic: beats 100 random rank-Z codecs in reconstruction MSE") {
  std::mt19937_64 rng(17);
  const int d = 6, Z = 2;
  const SampleMatrix S = random_samples(rng, d, 30);
  const LinearCodec best = fit_task_agnostic(S, Z);
  const double best_mse = plain_mse(best, S);
  for (int trial = 0; trial < 100; ++trial) {
    LinearCodec rc;
    rc.Z = Z;
    rc.E = random_matrix(rng, Z, d);
    // least-squares optimal decoder for the random encoder keeps the
    // competitor as strong as possible
    const Eigen::MatrixXd ES = rc.E * S.S;
    rc.D = (S.S * ES.transpose()) * (ES * ES.transpose()).ldlt().solve(
               Eigen::MatrixXd::Identity(Z, Z));
    CHECK(best_mse <= plain_mse(rc, S) + 1e-9);
  }
}

TEST_CASE("encode/decode: linear round trip at full rank") {
  std::mt19937_64 rng(19);
  const int d = 6;
  const Eigen::MatrixXd Psi = random_psd(rng, d);
  const SampleMatrix S = random_samples(rng, d, 20);
  const LinearCodec codec = fit_task_aware(Psi, 0.2, S, d);

  const Eigen::VectorXd s = random_matrix(rng, d, 1);
  CHECK((codec.decode(codec.encode(s)) - s).cwiseAbs().maxCoeff() < 1e-8);

  // linearity: encode(0) = 0 and homogeneity under alpha = 3
  CHECK(codec.encode(Eigen::VectorXd::Zero(d)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK((codec.encode(3.0 * s) - 3.0 * codec.encode(s)).cwiseAbs().maxCoeff() < 1e-10);

  // additivity of the decoder
  const Eigen::VectorXd p1 = random_matrix(rng, d, 1), p2 = random_matrix(rng, d, 1);
  CHECK((codec.decode(p1 + p2) - codec.decode(p1) - codec.decode(p2)).cwiseAbs().maxCoeff() <
        1e-10);

  CHECK_THROWS_AS(codec.encode(Eigen::VectorXd::Zero(d + 1)), DimensionError);
  CHECK_THROWS_AS(codec.decode(Eigen::VectorXd::Zero(d + 1)), DimensionError);
}

TEST_CASE("objective is non-increasing in Z") {
  std::mt19937_64 rng(23);
  const int d = 8;
  const Eigen::MatrixXd Psi = random_psd(rng, d);
  const SampleMatrix S = random_samples(rng, d, 40);
  double prev = std::numeric_limits<double>::infinity();
  for (int Z = 1; Z <= d; ++Z) {
    const LinearCodec codec = fit_task_aware(Psi, 0.4, S, Z);
    CHECK(codec.objective <= prev + 1e-10);
    prev = codec.objective;
  }
}

TEST_CASE("task-aware codec dominates the task-agnostic one in weighted objective") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    const int d = 6;
    const Eigen::MatrixXd Psi = random_psd(rng, d);
    const SampleMatrix S = random_samples(rng, d, 25);
    const double lambda = 0.1;
    for (int Z = 1; Z <= d; ++Z) {
      const LinearCodec aware = fit_task_aware(Psi, lambda, S, Z);
      const LinearCodec agn = fit_task_agnostic(S, Z);
      const double obj_aware = weighted_objective(aware, Psi, lambda, S);
      const double obj_agn = weighted_objective(agn, Psi, lambda, S);
      CHECK(obj_aware <= obj_agn + 1e-10 * (1.0 + obj_agn));
    }
  }
}

TEST_CASE("large lambda drives the task-aware codec toward plain PCA") {
  std::mt19937_64 rng(31);
  const int d = 6, Z = 2;
  const Eigen::MatrixXd Psi = random_psd(rng, d);
  const SampleMatrix S = random_samples(rng, d, 30);
  const double lambda = 1e6 * Psi.norm();
  const LinearCodec aware = fit_task_aware(Psi, lambda, S, Z);
  const LinearCodec agn = fit_task_agnostic(S, Z);
  const double mse_aware = plain_mse(aware, S);
  const double mse_agn = plain_mse(agn, S);
  CHECK(mse_aware <= 1.01 * mse_agn);
  CHECK(mse_aware >= mse_agn - 1e-9);  // PCA is optimal for plain MSE
}

TEST_CASE("reconstruction is a projection: applying the codec twice changes nothing") {
  std::mt19937_64 rng(37);
  const int d = 7, Z = 3;
  const Eigen::MatrixXd Psi = random_psd(rng, d);
  const SampleMatrix S = random_samples(rng, d, 20);
  for (const LinearCodec& codec :
       {fit_task_aware(Psi, 0.6, S, Z), fit_task_agnostic(S, Z)}) {
    const Eigen::MatrixXd once = codec.reconstruct(S.S);
    const Eigen::MatrixXd twice = codec.reconstruct(once);
    CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + once.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("lambda = 0 with a rank-deficient Psi falls back to an internal ridge") {
  std::mt19937_64 rng(41);
  const int d = 5;
  // rank-2 PSD matrix
  const Eigen::MatrixXd G = random_matrix(rng, 2, d);
  const Eigen::MatrixXd Psi = G.transpose() * G;
  const SampleMatrix S = random_samples(rng, d, 15);
  LinearCodec codec;
  CHECK_NOTHROW(codec = fit_task_aware(Psi, 0.0, S, 2));
  CHECK(codec.E.rows() == 2);
  CHECK(codec.weight_eigvals.minCoeff() > 0);
}

TEST_CASE("fit on a genuine co-design matrix: rank-Z weighted error is optimal") {
  // cross-module check against a Psi built from real LQR forms
  std::mt19937_64 rng(43);
  LtiSpec spec;
  const int n = 2, H = 3;
  spec.A = 0.8 * Eigen::MatrixXd::Identity(n, n);
  spec.B = Eigen::MatrixXd::Identity(n, n);
  spec.C = random_matrix(rng, n, n);
  spec.Q = Eigen::MatrixXd::Identity(n, n);
  spec.R = Eigen::MatrixXd::Identity(n, n);
  spec.H = H;
  const CodesignForms forms = build_prediction(spec);
  const SampleMatrix S = random_samples(rng, n * H, 25);

  for (int Z : {1, 2, 4}) {
    const LinearCodec aware = fit_task_aware(forms.Psi, 1.0, S, Z);
    const double obj = weighted_objective(aware, forms.Psi, 1.0, S);
    // random competitors never do better under the weighted objective
    for (int trial = 0; trial < 50; ++trial) {
      LinearCodec rc;
      rc.Z = Z;
      rc.E = random_matrix(rng, Z, n * H);
      rc.D = random_matrix(rng, n * H, Z);
      CHECK(obj <= weighted_objective(rc, forms.Psi, 1.0, S) + 1e-9);
    }
  }
}

TEST_CASE("error paths: invalid Z and mismatched Psi") {
  std::mt19937_64 rng(47);
  const SampleMatrix S = random_samples(rng, 4, 10);
  CHECK_THROWS_AS(fit_task_agnostic(S, 0), DimensionError);
  CHECK_THROWS_AS(fit_task_agnostic(S, 5), DimensionError);
  CHECK_THROWS_AS(fit_task_aware(Eigen::MatrixXd::Identity(3, 3), 1.0, S, 2), DimensionError);
  CHECK_THROWS_AS(fit_task_aware(Eigen::MatrixXd::Identity(4, 4), -1.0, S, 2), ConfigError);
}

TEST_CASE("codec round-trips through the matrix bundle") {
  std::mt19937_64 rng(53);
  const int d = 5;
  const SampleMatrix S = random_samples(rng, d, 12);
  const LinearCodec codec = fit_task_aware(random_psd(rng, d), 0.8, S, 2);
  const LinearCodec back = LinearCodec::from_bundle(codec.to_bundle());
  CHECK(back.Z == codec.Z);
  CHECK(back.E == codec.E);
  CHECK(back.D == codec.D);
  CHECK(back.objective == codec.objective);
}
