#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <random>

#include "codesign/errors.hpp"
#include "codesign/forecaster.hpp"
#include "codesign/timeseries.hpp"

using namespace codesign;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937& rng, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

SeriesBatch tiny_batch(int p, int T, int W, std::uint64_t seed) {
  GeneratorConfig gc;
  gc.components = {{SignalKind::Sine, 1.0, 9.0, 0.2}, {SignalKind::Square, 0.8, 7.0, 0.0}};
  gc.noise_std = 0.02;
  gc.seed = seed;
  return generate(gc, 2, p, T, W);
}

}  // namespace

TEST_CASE("encode produces a deterministic Z-dimensional code") {
  std::mt19937 rng(2);
  const int p = 2, W = 4, H = 3, Z = 3;
  const ForecastModel m = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 7, 16);
  const Eigen::MatrixXd hist = random_matrix(rng, p, W);
  const Eigen::VectorXd phi = m.encode(hist);
  CHECK(phi.size() == Z);
  CHECK((m.encode(hist) - phi).norm() == 0.0);  // identical inputs, identical code
  CHECK_THROWS_AS(m.encode(random_matrix(rng, p, W + 1)), DimensionError);
}

TEST_CASE("zero trunk weights collapse the code to a bias-driven constant") {
  std::mt19937 rng(3);
  const int p = 2, W = 4, H = 3, Z = 2;
  ForecastModel m = ForecastModel::init(p, W, H, Z, LossMode::TaskAgnostic, 0.0, 7, 8);
  m.W1.setZero();
  m.W2.setZero();
  m.W3.setZero();
  const Eigen::VectorXd phi1 = m.encode(random_matrix(rng, p, W));
  const Eigen::VectorXd phi2 = m.encode(random_matrix(rng, p, W));
  CHECK((phi1 - phi2).norm() == 0.0);
  // the constant is E applied to the propagated biases
  const Eigen::VectorXd b =
      m.W3 * (m.W2 * m.b1.col(0).cwiseMax(0.0) + m.b2.col(0)).cwiseMax(0.0) + m.b3.col(0);
  CHECK((phi1 - m.E * b).norm() < 1e-14);
}

TEST_CASE("decode is linear in the code") {
  std::mt19937 rng(5);
  const int p = 2, W = 4, H = 3, Z = 3;
  const ForecastModel m = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 11, 8);
  CHECK(m.decode(Eigen::VectorXd::Zero(Z)).norm() == 0.0);  // bottleneck hard limit
  const Eigen::VectorXd a = random_matrix(rng, Z, 1).col(0);
  const Eigen::VectorXd b = random_matrix(rng, Z, 1).col(0);
  const Eigen::MatrixXd sum = m.decode(a + b);
  CHECK((sum - (m.decode(a) + m.decode(b))).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK_THROWS_AS(m.decode(Eigen::VectorXd::Zero(Z + 1)), DimensionError);
}

TEST_CASE("pseudo-inverse decoder reconstructs the trunk output within rank limits") {
  std::mt19937 rng(13);
  const int p = 2, W = 4, H = 3;
  const Eigen::MatrixXd hist = random_matrix(rng, p, W);

  // full-rank bottleneck: exact round trip of the full forecast
  ForecastModel full = ForecastModel::init(p, W, H, p * H, LossMode::TaskAware, 0.0, 3, 8);
  full.D = full.E.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::VectorXd stilde = full.trunk(flatten(hist));
  CHECK((flatten(full.forecast(hist)) - stilde).lpNorm<Eigen::Infinity>() < 1e-8);

  // narrow bottleneck: round trip lands on the projection onto E's row space
  ForecastModel narrow = ForecastModel::init(p, W, H, 2, LossMode::TaskAware, 0.0, 3, 8);
  narrow.W1 = full.W1;
  narrow.b1 = full.b1;
  narrow.W2 = full.W2;
  narrow.b2 = full.b2;
  narrow.W3 = full.W3;
  narrow.b3 = full.b3;
  narrow.D = narrow.E.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd proj = narrow.D * narrow.E;  // oblique-free: pinv gives P = E^+ E
  CHECK((flatten(narrow.forecast(hist)) - proj * stilde).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("forecast_mse examples and errors") {
  const int p = 3, H = 4, T = 5;
  std::mt19937 rng(17);
  Eigen::MatrixXd s_true = random_matrix(rng, p, T);
  std::vector<Eigen::MatrixXd> shat(T), sfut(T);
  for (int t = 0; t < T; ++t) {
    shat[t] = random_matrix(rng, p, H);
    shat[t].col(0) = s_true.col(t);
    sfut[t] = shat[t];
  }
  CHECK(forecast_mse(shat, s_true) == doctest::Approx(0.0));
  CHECK(horizon_error(shat, sfut).norm() == 0.0);

  const double delta = 0.35;
  for (int t = 0; t < T; ++t) shat[t].array() += delta;
  CHECK(forecast_mse(shat, s_true) == doctest::Approx(p * delta * delta).epsilon(1e-12));
  const Eigen::MatrixXd he = horizon_error(shat, sfut);
  CHECK(he.rows() == p);
  CHECK(he.cols() == H);
  CHECK((he.array() - delta * delta).abs().maxCoeff() < 1e-12);

  shat.pop_back();
  CHECK_THROWS_AS(forecast_mse(shat, s_true), DimensionError);
  CHECK_THROWS_AS(horizon_error(shat, sfut), DimensionError);
  CHECK_THROWS_AS(horizon_error({}, {}), DimensionError);
}

TEST_CASE("checkpoint round trip reproduces the code bit for bit") {
  std::mt19937 rng(19);
  const int p = 2, W = 5, H = 4, Z = 3;
  ForecastModel m = ForecastModel::init(p, W, H, Z, LossMode::Weighted, 2.5, 77, 16);
  m.has_scale = true;
  m.scale.mode = ScaleMode::SymmetricUnit;
  m.scale.gain = Eigen::VectorXd::Constant(p, 0.5);
  m.scale.offset = Eigen::VectorXd::Constant(p, 0.1);

  const std::string path = "forecaster_roundtrip.bundle";
  m.save(path);
  const ForecastModel r = ForecastModel::load(path);
  std::remove(path.c_str());

  CHECK(r.p == p);
  CHECK(r.W == W);
  CHECK(r.H == H);
  CHECK(r.Z == Z);
  CHECK(r.mode == LossMode::Weighted);
  CHECK(r.lambda_f == 2.5);
  CHECK(r.has_scale);
  CHECK(r.scale.mode == ScaleMode::SymmetricUnit);

  const Eigen::MatrixXd hist = random_matrix(rng, p, W);
  const Eigen::VectorXd phi0 = m.encode(hist);
  const Eigen::VectorXd phi1 = r.encode(hist);
  for (int i = 0; i < Z; ++i) CHECK(phi0(i) == phi1(i));  // bit-identical
  CHECK((m.forecast(hist) - r.forecast(hist)).norm() == 0.0);
}

TEST_CASE("parameter count matches the closed-form tally") {
  const int p = 4, W = 15, H = 15, Z = 4, hid = 64;
  const ForecastModel m = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 1, hid);
  const long want = (static_cast<long>(p) * W * hid + hid) + (hid * hid + hid) +
                    (hid * p * H + p * H) + static_cast<long>(Z) * p * H +
                    static_cast<long>(p) * H * Z;
  CHECK(m.parameter_count() == want);
}

TEST_CASE("mode only selects the loss, never the forward pass") {
  std::mt19937 rng(23);
  const int p = 2, W = 4, H = 3, Z = 2;
  const ForecastModel aware = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 9, 8);
  const ForecastModel agn = ForecastModel::init(p, W, H, Z, LossMode::TaskAgnostic, 0.0, 9, 8);
  const ForecastModel wgt = ForecastModel::init(p, W, H, Z, LossMode::Weighted, 3.0, 9, 8);
  const Eigen::MatrixXd hist = random_matrix(rng, p, W);
  CHECK((aware.forecast(hist) - agn.forecast(hist)).norm() == 0.0);
  CHECK((aware.forecast(hist) - wgt.forecast(hist)).norm() == 0.0);
  CHECK(aware.lambda_f == 0.0);  // task-aware pins the forecast weight to zero
}

TEST_CASE("tape forward pass agrees with the plain forecast") {
  std::mt19937 rng(29);
  const int p = 2, W = 4, H = 3, Z = 2;
  for (bool scaled : {false, true}) {
    ForecastModel m = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 31, 8);
    if (scaled) {
      m.has_scale = true;
      m.scale.mode = ScaleMode::UnitInterval;
      m.scale.gain = Eigen::VectorXd::Constant(p, 0.25);
      m.scale.offset = Eigen::VectorXd::Constant(p, 0.4);
    }
    const Eigen::MatrixXd hist = random_matrix(rng, p, W);
    Tape tape;
    const auto leaves = m.make_leaves(tape);
    const auto node = m.forward(tape, leaves, hist);
    CHECK((tape.value(node) - m.forecast(hist)).lpNorm<Eigen::Infinity>() < 1e-12);

    // gradients reach every parameter leaf through the bottleneck
    const auto loss = tape.sum_sq(node);
    tape.backward(loss);
    for (auto id : ForecastModel::leaf_ids(leaves)) CHECK(tape.grad(id).norm() > 0.0);
  }
}

TEST_CASE("model forecast source consumes rolling windows") {
  const int p = 2, T = 10, W = 4, H = 3;
  const SeriesBatch batch = tiny_batch(p, T, W, 5);
  const ForecastModel m = ForecastModel::init(p, W, H, 2, LossMode::TaskAware, 0.0, 13, 8);
  const ModelForecast src(m);
  for (int t : {0, 3, T - H}) {
    const WindowPair w = windows(batch, 1, t, H);
    CHECK((src.forecast(batch, 1, t, H) - m.forecast(w.history)).norm() == 0.0);
  }
  CHECK_THROWS_AS(src.forecast(batch, 0, 0, H + 1), DimensionError);
}

TEST_CASE("init validates its configuration") {
  CHECK_THROWS_AS(ForecastModel::init(0, 4, 3, 1, LossMode::TaskAware, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(ForecastModel::init(2, 4, 3, 0, LossMode::TaskAware, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(ForecastModel::init(2, 4, 3, 7, LossMode::TaskAware, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(ForecastModel::init(2, 4, 3, 2, LossMode::Weighted, -1.0, 1), ConfigError);
  CHECK_THROWS_AS(loss_mode_from_string("bogus"), ConfigError);
  CHECK(loss_mode_from_string(to_string(LossMode::Weighted)) == LossMode::Weighted);
}

TEST_CASE("initialization stays within the fan-in bound and tracks the seed") {
  const int p = 2, W = 4, H = 3, Z = 2;
  const ForecastModel a = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 123, 8);
  const ForecastModel b = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 123, 8);
  const ForecastModel c = ForecastModel::init(p, W, H, Z, LossMode::TaskAware, 0.0, 124, 8);
  CHECK((a.W1 - b.W1).norm() == 0.0);
  CHECK((a.E - b.E).norm() == 0.0);
  CHECK((a.W1 - c.W1).norm() != 0.0);
  CHECK(a.W1.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(static_cast<double>(p * W)));
  CHECK(a.W2.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  CHECK(a.E.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(static_cast<double>(p * H)));
}
