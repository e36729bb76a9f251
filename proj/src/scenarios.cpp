#include "codesign/scenarios.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "codesign/errors.hpp"

namespace codesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Default synthetic generator: one component per dimension with equal
// amplitudes (so plain MSE has no reason to prefer any dimension), mixed
// shapes, and a light random-walk drift.
GeneratorConfig default_generator(int n, double noise_std = 0.02) {
  static const SignalKind kinds[] = {SignalKind::Sine, SignalKind::Square, SignalKind::Sawtooth};
  GeneratorConfig g;
  for (int i = 0; i < n; ++i) {
    ComponentSpec c;
    c.kind = kinds[i % 3];
    c.amplitude = 1.5;
    c.period = 12.0 + 4.0 * (i % 4);
    c.phase = 0.37 * i;
    g.components.push_back(c);
  }
  g.noise_std = noise_std;
  return g;
}

std::string fmt(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ScenarioSpec::validate() const {
  if (n < 1 || T < 1 || W < 1 || H < 1) throw ConfigError("scenario: bad dimensions");
  if (train_series < 1 || test_series < 1) throw ConfigError("scenario: need at least one series");
  if (epochs < 1) throw ConfigError("scenario: epochs must be >= 1");
  if (cost_scale <= 0) throw ConfigError("scenario: cost_scale must be positive");
  if (c_diag.size() != 0 && c_diag.size() != n)
    throw ConfigError("scenario: c_diag must have n entries");
  problem().validate();
  generator.validate();
}

MpcProblem ScenarioSpec::problem() const {
  MpcProblem pb;
  pb.kind = kind;
  pb.n = n;
  pb.H = H;
  pb.L_set = Eigen::VectorXd::Constant(n, level);
  pb.gamma_e = gamma_e;
  pb.gamma_s = gamma_s;
  pb.gamma_u = gamma_u;
  pb.u_min = Eigen::VectorXd::Constant(n, u_lo);
  pb.u_max = Eigen::VectorXd::Constant(n, u_hi);
  pb.C_s = c_diag.size() ? Eigen::MatrixXd(c_diag.asDiagonal())
                         : Eigen::MatrixXd::Identity(n, n);
  if (kind == MpcKind::NonlinearStreaming) {
    pb.L_x = Eigen::VectorXd::Constant(n, level_x);
    pb.L_u = Eigen::VectorXd::Constant(n, level_u);
    pb.gamma_x = gamma_x;
    pb.noise_std = noise_std_dyn;
  }
  return pb;
}

LtiSpec ScenarioSpec::lti() const {
  if (kind != MpcKind::Linear) throw ConfigError("scenario: no LQR form for the nonlinear kind");
  LtiSpec spec;
  spec.A = Eigen::MatrixXd::Identity(n, n);
  spec.B = Eigen::MatrixXd::Identity(n, n);
  spec.C = c_diag.size() ? Eigen::MatrixXd(-Eigen::MatrixXd(c_diag.asDiagonal()))
                         : Eigen::MatrixXd(-Eigen::MatrixXd::Identity(n, n));
  spec.Q = gamma_e * Eigen::MatrixXd::Identity(n, n);
  spec.R = gamma_u * Eigen::MatrixXd::Identity(n, n);
  spec.H = H;
  return spec;
}

Eigen::VectorXd ScenarioSpec::x0() const {
  if (!x0_at_level) return Eigen::VectorXd::Zero(n);
  return kind == MpcKind::NonlinearStreaming ? Eigen::VectorXd::Constant(n, level_x)
                                             : Eigen::VectorXd::Constant(n, level);
}

SeriesBatch ScenarioSpec::make_batch(int count, std::uint64_t seed, std::uint64_t offset) const {
  if (!data_csv.empty()) return load_csv(data_csv);
  GeneratorConfig g = generator;
  g.seed = seed + offset;
  // extend so the last enacted step still sees a full H-step lookahead
  return generate(g, count, n, T + H - 1, W);
}

KeyValueConfig ScenarioSpec::to_config() const {
  KeyValueConfig c;
  c.set("name", name);
  c.set("n", std::to_string(n));
  c.set("T", std::to_string(T));
  c.set("W", std::to_string(W));
  c.set("H", std::to_string(H));
  c.set("kind", kind == MpcKind::Linear ? "linear" : "streaming");
  c.set("level", fmt(level));
  c.set("gamma_e", fmt(gamma_e));
  c.set("gamma_s", fmt(gamma_s));
  c.set("gamma_u", fmt(gamma_u));
  c.set("u_lo", fmt(u_lo));
  c.set("u_hi", fmt(u_hi));
  if (c_diag.size()) {
    std::ostringstream os;
    os.precision(17);
    for (int i = 0; i < c_diag.size(); ++i) os << (i ? "," : "") << c_diag(i);
    c.set("c_diag", os.str());
  }
  c.set("gamma_x", fmt(gamma_x));
  c.set("level_x", fmt(level_x));
  c.set("level_u", fmt(level_u));
  c.set("noise_std_dyn", fmt(noise_std_dyn));
  c.set("use_scaling", use_scaling ? "1" : "0");
  c.set("scale_mode", to_string(scale_mode));
  c.set("analytic", analytic ? "1" : "0");
  c.set("cost_scale", fmt(cost_scale));
  c.set("x0_at_level", x0_at_level ? "1" : "0");
  c.set("train_series", std::to_string(train_series));
  c.set("test_series", std::to_string(test_series));
  c.set("epochs", std::to_string(epochs));
  c.set("default_lambda", fmt(default_lambda));
  if (!data_csv.empty()) c.set("data_csv", data_csv);
  const KeyValueConfig gen = generator.to_config();
  for (const auto& [k, v] : gen.entries()) c.set("gen_" + k, v);
  return c;
}

ScenarioSpec ScenarioSpec::from_config(const KeyValueConfig& c) {
  ScenarioSpec s;
  s.name = c.get_string("name");
  s.n = static_cast<int>(c.get_int("n"));
  s.T = static_cast<int>(c.get_int("T"));
  s.W = static_cast<int>(c.get_int("W"));
  s.H = static_cast<int>(c.get_int("H"));
  const std::string kind = c.get_string("kind", "linear");
  if (kind == "linear")
    s.kind = MpcKind::Linear;
  else if (kind == "streaming")
    s.kind = MpcKind::NonlinearStreaming;
  else
    throw ConfigError("scenario: unknown kind '" + kind + "'");
  s.level = c.get_double("level", 0.0);
  s.gamma_e = c.get_double("gamma_e", 1.0);
  s.gamma_s = c.get_double("gamma_s", 1.0);
  s.gamma_u = c.get_double("gamma_u", 1.0);
  s.u_lo = c.get_double("u_lo", -kInf);
  s.u_hi = c.get_double("u_hi", kInf);
  if (c.has("c_diag")) {
    const std::vector<double> d = c.get_doubles("c_diag");
    s.c_diag = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  }
  s.gamma_x = c.get_double("gamma_x", 0.25);
  s.level_x = c.get_double("level_x", 0.5);
  s.level_u = c.get_double("level_u", 0.2);
  s.noise_std_dyn = c.get_double("noise_std_dyn", 0.0);
  s.use_scaling = c.get_int("use_scaling", 0) != 0;
  s.scale_mode = scale_mode_from_string(c.get_string("scale_mode", "unit-interval"));
  s.analytic = c.get_int("analytic", 0) != 0;
  s.cost_scale = c.get_double("cost_scale", 1.0);
  s.x0_at_level = c.get_int("x0_at_level", 1) != 0;
  s.train_series = static_cast<int>(c.get_int("train_series", 15));
  s.test_series = static_cast<int>(c.get_int("test_series", 15));
  s.epochs = static_cast<int>(c.get_int("epochs", 40));
  s.default_lambda = c.get_double("default_lambda", 1.0);
  s.data_csv = c.get_string("data_csv", "");
  KeyValueConfig gen;
  for (const auto& [k, v] : c.entries())
    if (k.rfind("gen_", 0) == 0) gen.set(k.substr(4), v);
  if (gen.has("components")) s.generator = GeneratorConfig::from_config(gen);
  s.validate();
  return s;
}

void ScenarioSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("scenario: cannot open '" + path + "' for writing");
  out << to_config().to_string();
}

ScenarioSpec ScenarioSpec::load(const std::string& path) {
  return from_config(KeyValueConfig::parse_file(path));
}

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"smart-factory", "taxi",     "battery",
                                                 "streaming",     "lqr-full", "lqr-mpc"};
  return names;
}

ScenarioSpec builtin(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "smart-factory") {
    s.n = 4;
    s.T = 72;
    s.W = s.H = 15;
    s.u_lo = -0.95;
    s.u_hi = 0.95;
    s.level = 0.0;
    s.use_scaling = true;
    s.scale_mode = ScaleMode::SymmetricUnit;
    s.generator = default_generator(s.n);
  } else if (name == "taxi") {
    s.n = 4;
    s.T = 32;
    s.W = s.H = 15;
    s.gamma_s = 100.0;
    s.level = 0.5;
    s.x0_at_level = false;
    s.use_scaling = true;
    s.scale_mode = ScaleMode::UnitInterval;
    s.generator = default_generator(s.n);
  } else if (name == "battery") {
    s.n = 8;
    s.T = 122;
    s.W = s.H = 24;
    s.level = 0.5;
    s.use_scaling = true;
    s.scale_mode = ScaleMode::UnitInterval;
    s.generator = default_generator(s.n);
  } else if (name == "streaming") {
    s.n = 4;
    s.T = 60;
    s.W = s.H = 15;
    s.kind = MpcKind::NonlinearStreaming;
    s.gamma_x = 0.25;
    s.gamma_u = 1.0;
    s.level_x = 0.5;
    s.level_u = 0.2;
    s.u_lo = 0.0;
    s.noise_std_dyn = 0.01;
    // demand stays positive so the rate division is well conditioned
    GeneratorConfig g = default_generator(s.n, 0.01);
    for (auto& comp : g.components) comp.amplitude *= 0.2;
    s.generator = g;
  } else if (name == "lqr-full") {
    s.n = 5;
    s.H = 20;
    s.W = 20;
    s.T = 1;
    s.c_diag = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
    s.analytic = true;
    s.cost_scale = 1e-3;
    s.train_series = 60;
    s.test_series = 30;
    s.generator = default_generator(s.n, 0.05);
  } else if (name == "lqr-mpc") {
    s.n = 5;
    s.T = 100;
    s.W = s.H = 15;
    s.c_diag = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
    s.analytic = true;  // codecs fit in closed form; rollouts evaluate them
    s.train_series = 15;
    s.test_series = 15;
    s.generator = default_generator(s.n, 0.05);
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  s.validate();
  return s;
}

}  // namespace codesign
