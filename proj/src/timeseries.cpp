#include "codesign/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "codesign/errors.hpp"

namespace fs = std::filesystem;

namespace codesign {

SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "log") return SignalKind::Log;
  if (s == "negexp") return SignalKind::NegExp;
  if (s == "sine") return SignalKind::Sine;
  if (s == "square") return SignalKind::Square;
  if (s == "sawtooth") return SignalKind::Sawtooth;
  throw ConfigError("unknown signal kind '" + s + "'");
}

std::string to_string(SignalKind k) {
  switch (k) {
    case SignalKind::Log: return "log";
    case SignalKind::NegExp: return "negexp";
    case SignalKind::Sine: return "sine";
    case SignalKind::Square: return "square";
    case SignalKind::Sawtooth: return "sawtooth";
  }
  return "?";
}

ScaleMode scale_mode_from_string(const std::string& s) {
  if (s == "unit-interval") return ScaleMode::UnitInterval;
  if (s == "symmetric-unit") return ScaleMode::SymmetricUnit;
  throw ConfigError("unknown scale mode '" + s + "'");
}

std::string to_string(ScaleMode m) {
  return m == ScaleMode::UnitInterval ? "unit-interval" : "symmetric-unit";
}

void GeneratorConfig::validate() const {
  if (components.empty()) throw ConfigError("generator: at least one component required");
  for (const auto& c : components)
    if (!(c.period > 0)) throw ConfigError("generator: component period must be > 0");
  if (noise_std < 0) throw ConfigError("generator: noise_std must be >= 0");
}

GeneratorConfig GeneratorConfig::from_config(const KeyValueConfig& cfg) {
  GeneratorConfig g;
  auto kinds = cfg.get_strings("components");
  auto amps = cfg.get_doubles("amplitudes", std::vector<double>(kinds.size(), 1.0));
  auto periods = cfg.get_doubles("periods", std::vector<double>(kinds.size(), 20.0));
  auto phases = cfg.get_doubles("phases", std::vector<double>(kinds.size(), 0.0));
  if (amps.size() != kinds.size() || periods.size() != kinds.size() || phases.size() != kinds.size())
    throw ConfigError("generator: amplitudes/periods/phases must match components length");
  for (std::size_t i = 0; i < kinds.size(); ++i)
    g.components.push_back({signal_kind_from_string(kinds[i]), amps[i], periods[i], phases[i]});
  g.noise_std = cfg.get_double("noise_std", 0.0);
  g.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  g.validate();
  return g;
}

KeyValueConfig GeneratorConfig::to_config() const {
  KeyValueConfig cfg;
  std::ostringstream kinds, amps, periods, phases;
  amps.precision(17);
  periods.precision(17);
  phases.precision(17);
  for (std::size_t i = 0; i < components.size(); ++i) {
    const char* sep = i ? "," : "";
    kinds << sep << to_string(components[i].kind);
    amps << sep << components[i].amplitude;
    periods << sep << components[i].period;
    phases << sep << components[i].phase;
  }
  cfg.set("components", kinds.str());
  cfg.set("amplitudes", amps.str());
  cfg.set("periods", periods.str());
  cfg.set("phases", phases.str());
  std::ostringstream noise;
  noise.precision(17);
  noise << noise_std;
  cfg.set("noise_std", noise.str());
  cfg.set("seed", std::to_string(seed));
  return cfg;
}

void SeriesBatch::validate() const {
  if (p < 1 || T < 1 || W < 1) throw DimensionError("series batch: p, T, W must be >= 1");
  for (const auto& s : series)
    if (s.rows() != p || s.cols() != cols())
      throw DimensionError("series batch: inconsistent series shape");
}

namespace {

double base_value(const ComponentSpec& c, int t, int W) {
  const double two_pi = 2.0 * M_PI;
  switch (c.kind) {
    case SignalKind::Log:
      // shifted so the argument stays positive from t = -W+1 on
      return c.amplitude * std::log(1.0 + (t + W) / c.period);
    case SignalKind::NegExp:
      return c.amplitude * std::exp(-(t + W) / c.period);
    case SignalKind::Sine:
      return c.amplitude * std::sin(two_pi * t / c.period + c.phase);
    case SignalKind::Square:
      return std::sin(two_pi * t / c.period + c.phase) >= 0 ? c.amplitude : -c.amplitude;
    case SignalKind::Sawtooth: {
      double frac = t / c.period + c.phase / two_pi;
      frac -= std::floor(frac);
      return c.amplitude * (2.0 * frac - 1.0);
    }
  }
  return 0.0;
}

}  // namespace

SeriesBatch generate(const GeneratorConfig& cfg, int N, int p, int T, int W) {
  cfg.validate();
  if (N < 1 || p < 1 || T < 1 || W < 1)
    throw ConfigError("generate: N, p, T, W must be >= 1");

  SeriesBatch batch;
  batch.p = p;
  batch.T = T;
  batch.W = W;
  batch.series.reserve(N);
  const int C = batch.cols();

  for (int i = 0; i < N; ++i) {
    // per-series engine so generation order never matters
    std::mt19937_64 rng(cfg.seed ^ static_cast<std::uint64_t>(i));
    std::normal_distribution<double> incr(0.0, cfg.noise_std);
    Eigen::MatrixXd m(p, C);
    for (int d = 0; d < p; ++d) {
      const ComponentSpec& comp = cfg.components[d % cfg.components.size()];
      double walk = 0.0;
      for (int c = 0; c < C; ++c) {
        if (cfg.noise_std > 0) walk += incr(rng);
        m(d, c) = base_value(comp, c - (W - 1), W) + walk;
      }
    }
    batch.series.push_back(std::move(m));
  }
  return batch;
}

std::pair<SeriesBatch, ScaleParams> scale(const SeriesBatch& batch, ScaleMode mode) {
  batch.validate();
  if (batch.series.empty()) throw DimensionError("scale: empty batch");

  Eigen::VectorXd lo = Eigen::VectorXd::Constant(batch.p, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (const auto& s : batch.series) {
    lo = lo.cwiseMin(s.rowwise().minCoeff());
    hi = hi.cwiseMax(s.rowwise().maxCoeff());
  }

  const double tlo = mode == ScaleMode::UnitInterval ? 0.0 : -1.0;
  const double thi = 1.0;
  ScaleParams params;
  params.mode = mode;
  params.gain.resize(batch.p);
  params.offset.resize(batch.p);
  for (int d = 0; d < batch.p; ++d) {
    if (hi(d) > lo(d)) {
      params.gain(d) = (thi - tlo) / (hi(d) - lo(d));
      params.offset(d) = tlo - params.gain(d) * lo(d);
    } else {
      // constant dimension: unit denominator, land on the range midpoint
      params.gain(d) = 1.0;
      params.offset(d) = 0.5 * (tlo + thi) - lo(d);
    }
  }
  return {apply_scale(batch, params), params};
}

Eigen::MatrixXd ScaleParams::apply(const Eigen::MatrixXd& raw) const {
  if (raw.rows() != gain.size()) throw DimensionError("scale params: dimension mismatch");
  return (raw.array().colwise() * gain.array()).colwise() + offset.array();
}

Eigen::MatrixXd ScaleParams::invert(const Eigen::MatrixXd& scaled) const {
  if (scaled.rows() != gain.size()) throw DimensionError("scale params: dimension mismatch");
  return (scaled.array().colwise() - offset.array()).colwise() / gain.array();
}

SeriesBatch apply_scale(const SeriesBatch& batch, const ScaleParams& params) {
  SeriesBatch out = batch;
  for (auto& s : out.series) s = params.apply(s);
  return out;
}

SeriesBatch invert_scale(const SeriesBatch& batch, const ScaleParams& params) {
  SeriesBatch out = batch;
  for (auto& s : out.series) s = params.invert(s);
  return out;
}

WindowPair windows(const SeriesBatch& batch, int series_index, int t, int H, PadMode pad) {
  batch.validate();
  if (series_index < 0 || series_index >= batch.count())
    throw std::out_of_range("windows: series index out of range");
  if (t < 0 || t > batch.T - 1) throw std::out_of_range("windows: t out of [0, T-1]");
  if (H < 1) throw DimensionError("windows: H must be >= 1");

  const Eigen::MatrixXd& s = batch.series[series_index];
  WindowPair w;
  w.t = t;
  w.history = s.middleCols(batch.col_of(t - batch.W + 1), batch.W);

  const int avail = batch.cols() - batch.col_of(t);
  if (H <= avail) {
    w.future = s.middleCols(batch.col_of(t), H);
  } else if (pad == PadMode::HoldLast) {
    w.future.resize(batch.p, H);
    w.future.leftCols(avail) = s.middleCols(batch.col_of(t), avail);
    for (int c = avail; c < H; ++c) w.future.col(c) = s.col(batch.cols() - 1);
  } else {
    throw std::out_of_range("windows: future extends past the series and padding is disabled");
  }
  return w;
}

void save_csv(const SeriesBatch& batch, const std::string& dir) {
  batch.validate();
  fs::create_directories(dir);
  char name[32];
  for (int i = 0; i < batch.count(); ++i) {
    std::snprintf(name, sizeof(name), "series_%04d.csv", i);
    std::ofstream os(fs::path(dir) / name);
    if (!os) throw ParseError("save_csv: cannot write '" + (fs::path(dir) / name).string() + "'");
    os << "# p=" << batch.p << " T=" << batch.T << " W=" << batch.W
       << " N=" << batch.count() << "\n";
    char buf[64];
    const Eigen::MatrixXd& s = batch.series[i];
    for (int c = 0; c < batch.cols(); ++c) {
      for (int d = 0; d < batch.p; ++d) {
        std::snprintf(buf, sizeof(buf), "%.17g", s(d, c));
        os << (d ? "," : "") << buf;
      }
      os << "\n";
    }
  }
}

namespace {

Eigen::MatrixXd load_one_csv(const std::string& path, int* p, int* T, int* W, int* N) {
  std::ifstream is(path);
  if (!is) throw ParseError("load_csv: cannot open '" + path + "'");
  std::string line;
  int row = 0;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const int val = std::atoi(tok.c_str() + eq + 1);
        if (key == "p") *p = val;
        else if (key == "T") *T = val;
        else if (key == "W") *W = val;
        else if (key == "N") *N = val;
      }
      header_seen = true;
      continue;
    }
    std::vector<double> vals;
    std::stringstream ls(line);
    std::string cell;
    int col = 0;
    while (std::getline(ls, cell, ',')) {
      ++col;
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      while (end && *end == ' ') ++end;
      if (end == cell.c_str() || (end && *end != '\0'))
        throw ParseError("load_csv: non-numeric cell at row " + std::to_string(row) +
                         ", column " + std::to_string(col) + " in '" + path + "'");
      vals.push_back(v);
    }
    if (!rows.empty() && vals.size() != rows.front().size())
      throw ParseError("load_csv: ragged row " + std::to_string(row) + " in '" + path +
                       "' (expected " + std::to_string(rows.front().size()) + " columns, got " +
                       std::to_string(vals.size()) + ")");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("load_csv: empty dataset in '" + path + "'");
  if (!header_seen) {
    *p = static_cast<int>(rows.front().size());
    *W = 1;
    *T = static_cast<int>(rows.size());
    *N = 1;
  }
  Eigen::MatrixXd m(rows.front().size(), rows.size());
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (std::size_t d = 0; d < rows[c].size(); ++d) m(d, c) = rows[c][d];
  return m;
}

}  // namespace

SeriesBatch load_csv(const std::string& path) {
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".csv") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ParseError("load_csv: empty dataset (no .csv files in '" + path + "')");
  } else {
    files.push_back(path);
  }

  SeriesBatch batch;
  int p = 0, T = 0, W = 1, N = 0;
  for (const auto& f : files) {
    Eigen::MatrixXd m = load_one_csv(f, &p, &T, &W, &N);
    if (batch.series.empty()) {
      batch.p = p;
      batch.T = T;
      batch.W = W;
    }
    if (m.rows() != batch.p)
      throw ParseError("load_csv: dimension mismatch across files ('" + f + "')");
    if (m.cols() != batch.W - 1 + batch.T)
      throw ParseError("load_csv: '" + f + "' has " + std::to_string(m.cols()) +
                       " rows, expected " + std::to_string(batch.W - 1 + batch.T));
    batch.series.push_back(std::move(m));
  }
  batch.validate();
  return batch;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols)
    throw DimensionError("unflatten: element count mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace codesign
