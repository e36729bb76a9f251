#include "codesign/forecaster.hpp"

#include <random>

#include "codesign/errors.hpp"
#include "codesign/matrix_bundle.hpp"

namespace codesign {

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "task-agnostic") return LossMode::TaskAgnostic;
  if (s == "task-aware") return LossMode::TaskAware;
  if (s == "weighted") return LossMode::Weighted;
  throw ConfigError("unknown loss mode '" + s + "'");
}

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::TaskAgnostic: return "task-agnostic";
    case LossMode::TaskAware: return "task-aware";
    case LossMode::Weighted: return "weighted";
  }
  return "?";
}

namespace {

Eigen::MatrixXd uniform_init(int rows, int cols, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

}  // namespace

ForecastModel ForecastModel::init(int p, int W, int H, int Z, LossMode mode, double lambda_f,
                                  std::uint64_t seed, int hidden, bool linear_trunk) {
  if (p < 1 || W < 1 || H < 1 || hidden < 1) throw ConfigError("model: bad dimensions");
  if (Z < 1 || Z > p * H) throw ConfigError("model: Z must be in [1, pH]");
  if (lambda_f < 0) throw ConfigError("model: lambda must be >= 0");

  ForecastModel m;
  m.p = p;
  m.W = W;
  m.H = H;
  m.Z = Z;
  m.hidden = hidden;
  m.linear_trunk = linear_trunk;
  m.mode = mode;
  m.lambda_f = mode == LossMode::Weighted ? lambda_f : (mode == LossMode::TaskAware ? 0.0 : lambda_f);

  std::mt19937_64 rng(seed);
  m.W1 = uniform_init(hidden, p * W, p * W, rng);
  m.b1 = uniform_init(hidden, 1, p * W, rng);
  m.W2 = uniform_init(hidden, hidden, hidden, rng);
  m.b2 = uniform_init(hidden, 1, hidden, rng);
  m.W3 = uniform_init(p * H, hidden, hidden, rng);
  m.b3 = uniform_init(p * H, 1, hidden, rng);
  m.E = uniform_init(Z, p * H, p * H, rng);
  m.D = uniform_init(p * H, Z, Z, rng);
  return m;
}

Eigen::VectorXd ForecastModel::trunk(const Eigen::VectorXd& hist_flat) const {
  if (hist_flat.size() != p * W) throw DimensionError("model trunk: input size mismatch");
  Eigen::VectorXd a1 = W1 * hist_flat + b1;
  if (!linear_trunk) a1 = a1.cwiseMax(0.0);
  Eigen::VectorXd a2 = W2 * a1 + b2;
  if (!linear_trunk) a2 = a2.cwiseMax(0.0);
  return W3 * a2 + b3;
}

Eigen::VectorXd ForecastModel::encode(const Eigen::MatrixXd& history) const {
  if (history.rows() != p || history.cols() != W)
    throw DimensionError("model encode: history must be p x W");
  Eigen::MatrixXd h = has_scale ? scale.apply(history) : history;
  return E * trunk(Eigen::Map<const Eigen::VectorXd>(h.data(), h.size()));
}

Eigen::MatrixXd ForecastModel::decode(const Eigen::VectorXd& phi) const {
  if (phi.size() != Z) throw DimensionError("model decode: phi must have Z entries");
  const Eigen::VectorXd flat = D * phi;
  Eigen::MatrixXd shat = Eigen::Map<const Eigen::MatrixXd>(flat.data(), p, H);
  return has_scale ? scale.invert(shat) : shat;
}

Eigen::MatrixXd ForecastModel::forecast(const Eigen::MatrixXd& history) const {
  return decode(encode(history));
}

long ForecastModel::parameter_count() const {
  long total = 0;
  for (const auto* m : parameters()) total += m->size();
  return total;
}

ForecastModel::Leaves ForecastModel::make_leaves(Tape& tape) const {
  Leaves l;
  l.W1 = tape.leaf(W1);
  l.b1 = tape.leaf(b1);
  l.W2 = tape.leaf(W2);
  l.b2 = tape.leaf(b2);
  l.W3 = tape.leaf(W3);
  l.b3 = tape.leaf(b3);
  l.E = tape.leaf(E);
  l.D = tape.leaf(D);
  return l;
}

Tape::NodeId ForecastModel::forward(Tape& tape, const Leaves& leaves,
                                    const Eigen::MatrixXd& history) const {
  if (history.rows() != p || history.cols() != W)
    throw DimensionError("model forward: history must be p x W");
  Eigen::MatrixXd h = has_scale ? scale.apply(history) : history;
  const Tape::NodeId input =
      tape.constant(Eigen::Map<const Eigen::VectorXd>(h.data(), h.size()));

  Tape::NodeId a1 = tape.add(tape.matmul(leaves.W1, input), leaves.b1);
  if (!linear_trunk) a1 = tape.relu(a1);
  Tape::NodeId a2 = tape.add(tape.matmul(leaves.W2, a1), leaves.b2);
  if (!linear_trunk) a2 = tape.relu(a2);
  const Tape::NodeId stilde = tape.add(tape.matmul(leaves.W3, a2), leaves.b3);
  const Tape::NodeId phi = tape.matmul(leaves.E, stilde);
  Tape::NodeId flat = tape.matmul(leaves.D, phi);

  if (has_scale) {
    // inverse affine map back to the controller's units, per dimension,
    // replicated across the H horizon columns
    Eigen::VectorXd inv_gain(p * H), inv_off(p * H);
    for (int k = 0; k < H; ++k)
      for (int i = 0; i < p; ++i) {
        inv_gain(k * p + i) = 1.0 / scale.gain(i);
        inv_off(k * p + i) = -scale.offset(i) / scale.gain(i);
      }
    flat = tape.add(tape.matmul(tape.constant(inv_gain.asDiagonal()), flat),
                    tape.constant(inv_off));
  }
  return tape.reshape(flat, p, H);
}

std::vector<Eigen::MatrixXd*> ForecastModel::parameters() {
  return {&W1, &b1, &W2, &b2, &W3, &b3, &E, &D};
}

std::vector<const Eigen::MatrixXd*> ForecastModel::parameters() const {
  return {&W1, &b1, &W2, &b2, &W3, &b3, &E, &D};
}

std::vector<Tape::NodeId> ForecastModel::leaf_ids(const Leaves& l) {
  return {l.W1, l.b1, l.W2, l.b2, l.W3, l.b3, l.E, l.D};
}

void ForecastModel::save(const std::string& path) const {
  MatrixBundle b;
  Eigen::MatrixXd meta(1, 9);
  meta << 1 /* version */, p, W, H, Z, hidden, linear_trunk ? 1 : 0,
      static_cast<int>(mode), lambda_f;
  b.put("meta", meta);
  b.put("W1", W1);
  b.put("b1", b1);
  b.put("W2", W2);
  b.put("b2", b2);
  b.put("W3", W3);
  b.put("b3", b3);
  b.put("E", E);
  b.put("D", D);
  if (has_scale) {
    Eigen::MatrixXd smode(1, 1);
    smode << static_cast<int>(scale.mode);
    b.put("scale_mode", smode);
    b.put("scale_gain", scale.gain);
    b.put("scale_offset", scale.offset);
  }
  b.save(path);
}

ForecastModel ForecastModel::load(const std::string& path) {
  const MatrixBundle b = MatrixBundle::load(path);
  const Eigen::MatrixXd meta = b.get("meta");
  if (static_cast<int>(meta(0, 0)) != 1)
    throw ParseError("model checkpoint: unsupported version");
  ForecastModel m;
  m.p = static_cast<int>(meta(0, 1));
  m.W = static_cast<int>(meta(0, 2));
  m.H = static_cast<int>(meta(0, 3));
  m.Z = static_cast<int>(meta(0, 4));
  m.hidden = static_cast<int>(meta(0, 5));
  m.linear_trunk = meta(0, 6) != 0;
  m.mode = static_cast<LossMode>(static_cast<int>(meta(0, 7)));
  m.lambda_f = meta(0, 8);
  m.W1 = b.get("W1");
  m.b1 = b.get("b1");
  m.W2 = b.get("W2");
  m.b2 = b.get("b2");
  m.W3 = b.get("W3");
  m.b3 = b.get("b3");
  m.E = b.get("E");
  m.D = b.get("D");
  if (b.has("scale_mode")) {
    m.has_scale = true;
    m.scale.mode = static_cast<ScaleMode>(static_cast<int>(b.get("scale_mode")(0, 0)));
    m.scale.gain = b.get("scale_gain");
    m.scale.offset = b.get("scale_offset");
  }
  return m;
}

Eigen::MatrixXd ModelForecast::forecast(const SeriesBatch& batch, int series, int t,
                                        int H) const {
  if (H != model_->H) throw DimensionError("model forecast: horizon mismatch");
  const WindowPair w = windows(batch, series, t, H);
  return model_->forecast(w.history);
}

double forecast_mse(const std::vector<Eigen::MatrixXd>& s_hat_seq,
                    const Eigen::MatrixXd& s_true) {
  if (static_cast<Eigen::Index>(s_hat_seq.size()) != s_true.cols())
    throw DimensionError("forecast_mse: length mismatch");
  double acc = 0;
  for (std::size_t t = 0; t < s_hat_seq.size(); ++t)
    acc += (s_hat_seq[t].col(0) - s_true.col(t)).squaredNorm();
  return acc / static_cast<double>(s_hat_seq.size());
}

Eigen::MatrixXd horizon_error(const std::vector<Eigen::MatrixXd>& s_hat_seq,
                              const std::vector<Eigen::MatrixXd>& s_future_seq) {
  if (s_hat_seq.size() != s_future_seq.size() || s_hat_seq.empty())
    throw DimensionError("horizon_error: sequence mismatch");
  Eigen::MatrixXd acc =
      Eigen::MatrixXd::Zero(s_hat_seq[0].rows(), s_hat_seq[0].cols());
  for (std::size_t t = 0; t < s_hat_seq.size(); ++t)
    acc += (s_hat_seq[t] - s_future_seq[t]).array().square().matrix();
  return acc / static_cast<double>(s_hat_seq.size());
}

}  // namespace codesign
