#include "codesign/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "codesign/codec.hpp"
#include "codesign/errors.hpp"
#include "codesign/trainer.hpp"

namespace codesign {

namespace fs = std::filesystem;
using nlohmann::json;

double compression_gain(int p, int H, int Z) {
  if (p < 1 || H < 1 || Z < 1) throw ConfigError("compression_gain: bad dimensions");
  return static_cast<double>(p) * H / Z;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DimensionError("quantile: empty sample");
  if (q < 0 || q > 1) throw ConfigError("quantile: q must be in [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - lo;
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

CellMetrics compute_metrics(const std::vector<Rollout>& test,
                            const std::vector<Rollout>& baseline, double cost_scale) {
  if (test.empty()) throw DimensionError("compute_metrics: no rollouts");
  CellMetrics m;
  for (const auto& ro : test) m.costs.push_back(ro.total_cost * cost_scale);
  for (const auto& ro : baseline) m.baseline_costs.push_back(ro.total_cost * cost_scale);

  double acc = 0;
  for (double c : m.costs) acc += c;
  m.mean_cost = acc / m.costs.size();
  m.q10 = quantile(m.costs, 0.10);
  m.q50 = quantile(m.costs, 0.50);
  m.q90 = quantile(m.costs, 0.90);
  if (!m.baseline_costs.empty()) {
    acc = 0;
    for (double c : m.baseline_costs) acc += c;
    m.baseline_mean = acc / m.baseline_costs.size();
  }

  const int n = static_cast<int>(test[0].u_hat.rows());
  bool all_star = true;
  for (const auto& ro : test) all_star = all_star && ro.has_u_star;
  if (all_star) {
    m.control_mse = Eigen::VectorXd::Zero(n);
    long steps = 0;
    for (const auto& ro : test) {
      m.control_mse += (ro.u_hat - ro.u_star).array().square().matrix().rowwise().sum();
      steps += ro.u_hat.cols();
    }
    m.control_mse /= static_cast<double>(steps);
  }

  if (!test[0].s_hat.empty()) {
    m.forecast_err = Eigen::MatrixXd::Zero(test[0].s_hat[0].rows(), test[0].s_hat[0].cols());
    for (const auto& ro : test) m.forecast_err += horizon_error(ro.s_hat, ro.s_future);
    m.forecast_err /= static_cast<double>(test.size());
  }
  return m;
}

namespace {

SampleMatrix collect_samples(const SeriesBatch& batch, int H) {
  const int last_t = batch.T - H;
  if (last_t < 0) throw DimensionError("collect_samples: series too short");
  SampleMatrix S;
  S.S.resize(batch.p * H, static_cast<Eigen::Index>(batch.count()) * (last_t + 1));
  Eigen::Index col = 0;
  for (int i = 0; i < batch.count(); ++i)
    for (int t = 0; t <= last_t; ++t)
      S.S.col(col++) = flatten(windows(batch, i, t, H).future);
  return S;
}

// One-shot open-loop evaluation for the full-horizon quadratic scenario: the
// whole H-step control sequence is computed from a single (possibly
// reconstructed) window and never re-planned.
Rollout open_loop_rollout(const LtiSpec& lti, const Eigen::VectorXd& x0,
                          const Eigen::MatrixXd& s_hat, const Eigen::MatrixXd& s_true) {
  const CodesignForms forms = build_prediction(lti);
  const int n = lti.n(), H = lti.H;
  Rollout ro;
  ro.u_hat = unflatten(optimal_control(forms, x0, flatten(s_hat)), n, H);
  ro.u_star = unflatten(optimal_control(forms, x0, flatten(s_true)), n, H);
  ro.has_u_star = true;
  ro.s_true = s_true;
  ro.s_hat = {s_hat};
  ro.s_future = {s_true};
  ro.x.resize(n, H + 1);
  ro.x.col(0) = x0;
  ro.stage_cost.resize(H);
  for (int k = 0; k < H; ++k) {
    ro.stage_cost(k) = ro.x.col(k).dot(lti.Q * ro.x.col(k)) +
                       ro.u_hat.col(k).dot(lti.R * ro.u_hat.col(k));
    ro.x.col(k + 1) = lti.A * ro.x.col(k) + lti.B * ro.u_hat.col(k) + lti.C * s_true.col(k);
  }
  ro.total_cost = ro.stage_cost.sum() + ro.x.col(H).dot(lti.Q * ro.x.col(H));
  return ro;
}

struct Dataset {
  SeriesBatch train, test;
};

Dataset make_dataset(const ScenarioSpec& spec, std::uint64_t seed) {
  Dataset d;
  d.train = spec.make_batch(spec.train_series, seed);
  d.test = spec.make_batch(spec.test_series, seed, 0x9e3779b9ULL);
  if (spec.use_scaling) {
    auto [scaled, params] = scale(d.train, spec.scale_mode);
    d.train = scaled;
    d.test = apply_scale(d.test, params);
  }
  return d;
}

}  // namespace

CellResult run_experiment(const ScenarioSpec& spec, LossMode scheme, int Z, double lambda,
                          std::uint64_t seed) {
  spec.validate();
  const int pH = spec.n * spec.H;
  if (Z < 1 || Z > pH) throw ConfigError("run_experiment: Z out of range");
  if (lambda < 0) throw ConfigError("run_experiment: lambda must be >= 0");

  CellResult cell;
  cell.scheme = to_string(scheme);
  cell.Z = Z;
  cell.lambda = lambda;
  cell.seed = seed;
  cell.compression = compression_gain(spec.n, spec.H, Z);

  const Dataset data = make_dataset(spec, seed);
  const MpcProblem pb = spec.problem();

  if (spec.analytic && spec.kind == MpcKind::Linear && spec.T == 1) {
    // full-horizon quadratic scenario: analytic codec, open-loop evaluation
    const LtiSpec lti = spec.lti();
    const CodesignForms forms = build_prediction(lti);
    const SampleMatrix S = collect_samples(data.train, spec.H);
    const LinearCodec codec =
        scheme == LossMode::TaskAware    ? fit_task_aware(forms.Psi, 0.0, S, Z)
        : scheme == LossMode::Weighted   ? fit_task_aware(forms.Psi, lambda, S, Z)
                                         : fit_task_agnostic(S, Z);
    const Eigen::VectorXd x0 = spec.x0();
    for (int i = 0; i < data.test.count(); ++i) {
      const Eigen::MatrixXd s = windows(data.test, i, 0, spec.H).future;
      const Eigen::MatrixXd s_hat =
          unflatten(codec.decode(codec.encode(flatten(s))), spec.n, spec.H);
      cell.rollouts.push_back(open_loop_rollout(lti, x0, s_hat, s));
      cell.baseline_rollouts.push_back(open_loop_rollout(lti, x0, s, s));
    }
  } else {
    std::unique_ptr<ForecastSource> source;
    LinearCodec codec;
    ForecastModel model;
    if (spec.analytic && spec.kind == MpcKind::Linear) {
      const CodesignForms forms = build_prediction(spec.lti());
      const SampleMatrix S = collect_samples(data.train, spec.H);
      codec = scheme == LossMode::TaskAware  ? fit_task_aware(forms.Psi, 0.0, S, Z)
              : scheme == LossMode::Weighted ? fit_task_aware(forms.Psi, lambda, S, Z)
                                             : fit_task_agnostic(S, Z);
      source = std::make_unique<CodecForecast>(codec);
    } else if (spec.kind == MpcKind::NonlinearStreaming) {
      // no quadratic co-design form exists here; all schemes share the
      // mean-square-optimal codec
      const SampleMatrix S = collect_samples(data.train, spec.H);
      codec = fit_task_agnostic(S, Z);
      source = std::make_unique<CodecForecast>(codec);
    } else {
      model = ForecastModel::init(spec.n, spec.W, spec.H, Z, scheme,
                                  scheme == LossMode::Weighted ? lambda : 0.0, seed);
      TrainConfig tc;
      tc.epochs = spec.epochs;
      tc.lambda_f = scheme == LossMode::Weighted ? lambda : 0.0;
      tc.loss = scheme == LossMode::TaskAgnostic ? TrainLoss::Mse : TrainLoss::Total;
      train(model, pb, data.train, tc);
      source = std::make_unique<ModelForecast>(model);
    }

    const PerfectForecast perfect;
    for (int i = 0; i < data.test.count(); ++i) {
      RolloutOptions opts;
      opts.x0 = spec.x0();
      opts.compute_u_star = spec.kind == MpcKind::Linear;
      opts.noise_seed = seed * 7919 + i;
      cell.rollouts.push_back(rollout(pb, *source, data.test, i, opts));
      cell.baseline_rollouts.push_back(rollout(pb, perfect, data.test, i, opts));
    }
  }

  cell.metrics = compute_metrics(cell.rollouts, cell.baseline_rollouts, spec.cost_scale);
  cell.sample_traj = cell.rollouts.front().x;
  cell.ok = true;
  return cell;
}

namespace {

struct CellSpec {
  LossMode scheme;
  int Z;
  double lambda;
  std::uint64_t seed;
};

}  // namespace

MetricsReport sweep(const ScenarioSpec& spec, const SweepOptions& opts) {
  if (opts.z_values.empty()) throw ConfigError("sweep: no Z values");
  if (opts.schemes.empty() || opts.seeds.empty() || opts.lambdas.empty())
    throw ConfigError("sweep: empty axis");

  std::vector<CellSpec> plan;
  for (const LossMode scheme : opts.schemes)
    for (const int z : opts.z_values)
      for (const double lam : opts.lambdas)
        for (const std::uint64_t seed : opts.seeds) plan.push_back({scheme, z, lam, seed});

  MetricsReport rep;
  rep.scenario = spec.name;
  rep.cells.resize(plan.size());

  const int workers = std::max(1, std::min<int>(opts.threads, static_cast<int>(plan.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.size()) return;
      const CellSpec& c = plan[i];
      try {
        rep.cells[i] = run_experiment(spec, c.scheme, c.Z, c.lambda, c.seed);
      } catch (const std::exception& e) {
        CellResult& cr = rep.cells[i];
        cr.scheme = to_string(c.scheme);
        cr.Z = c.Z;
        cr.lambda = c.lambda;
        cr.seed = c.seed;
        cr.ok = false;
        cr.error = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  for (const auto& c : rep.cells)
    if (!c.ok) ++rep.failed_cells;

  // pool across seeds per (scheme, Z, lambda), keeping the plan's ordering
  for (const LossMode scheme : opts.schemes)
    for (const int z : opts.z_values)
      for (const double lam : opts.lambdas) {
        AggregateRow row;
        row.scheme = to_string(scheme);
        row.Z = z;
        row.lambda = lam;
        std::vector<double> costs, bcosts;
        for (const auto& c : rep.cells)
          if (c.ok && c.scheme == row.scheme && c.Z == z && c.lambda == lam) {
            ++row.cells;
            costs.insert(costs.end(), c.metrics.costs.begin(), c.metrics.costs.end());
            bcosts.insert(bcosts.end(), c.metrics.baseline_costs.begin(),
                          c.metrics.baseline_costs.end());
          }
        if (row.cells == 0) continue;
        double acc = 0;
        for (double v : costs) acc += v;
        row.mean_cost = acc / costs.size();
        row.q10 = quantile(costs, 0.10);
        row.q50 = quantile(costs, 0.50);
        row.q90 = quantile(costs, 0.90);
        acc = 0;
        for (double v : bcosts) acc += v;
        row.baseline_mean = bcosts.empty() ? 0.0 : acc / bcosts.size();
        row.ratio = row.baseline_mean > 0 ? row.mean_cost / row.baseline_mean : 0.0;
        rep.aggregates.push_back(row);
      }

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_report_csv(rep, (fs::path(opts.out_dir) / "report.csv").string());
    write_report_json(rep, (fs::path(opts.out_dir) / "report.json").string());
    write_report_svg(rep, opts.out_dir);
    const fs::path rdir = fs::path(opts.out_dir) / "rollouts";
    fs::create_directories(rdir);
    for (std::size_t i = 0; i < rep.cells.size(); ++i) {
      const CellResult& c = rep.cells[i];
      if (!c.ok) continue;
      for (std::size_t r = 0; r < c.rollouts.size(); ++r) {
        char name[128];
        std::snprintf(name, sizeof name, "cell%03zu_%s_z%02d_s%llu_r%02zu.bundle", i,
                      c.scheme.c_str(), c.Z, static_cast<unsigned long long>(c.seed), r);
        save_rollout(c.rollouts[r], (rdir / name).string());
      }
    }
  }
  return rep;
}

std::map<std::string, int> report_min_z(const MetricsReport& report, double tolerance) {
  std::map<std::string, int> best;  // scheme -> min Z (or -1)
  // best mean cost over lambdas per (scheme, Z)
  std::map<std::pair<std::string, int>, std::pair<double, double>> cost_by_z;
  for (const auto& row : report.aggregates) {
    auto key = std::make_pair(row.scheme, row.Z);
    auto it = cost_by_z.find(key);
    if (it == cost_by_z.end() || row.mean_cost < it->second.first)
      cost_by_z[key] = {row.mean_cost, row.baseline_mean};
    if (!best.count(row.scheme)) best[row.scheme] = -1;
  }
  for (const auto& [key, cb] : cost_by_z) {
    const auto& [scheme, z] = key;
    if (cb.first <= (1.0 + tolerance) * cb.second && (best[scheme] < 0 || z < best[scheme]))
      best[scheme] = z;
  }
  return best;
}

void save_rollout(const Rollout& ro, const std::string& path) {
  MatrixBundle b;
  b.put("x", ro.x);
  b.put("u_hat", ro.u_hat);
  if (ro.has_u_star) b.put("u_star", ro.u_star);
  b.put("s_true", ro.s_true);
  b.put("stage_cost", ro.stage_cost);
  Eigen::MatrixXd total(1, 1);
  total << ro.total_cost;
  b.put("total_cost", total);
  if (!ro.s_hat.empty()) {
    const int pH = static_cast<int>(ro.s_hat[0].size());
    Eigen::MatrixXd sh(pH, ro.s_hat.size()), sf(pH, ro.s_future.size());
    for (std::size_t t = 0; t < ro.s_hat.size(); ++t) {
      sh.col(t) = flatten(ro.s_hat[t]);
      sf.col(t) = flatten(ro.s_future[t]);
    }
    b.put("s_hat", sh);
    b.put("s_future", sf);
    Eigen::MatrixXd dims(1, 2);
    dims << ro.s_hat[0].rows(), ro.s_hat[0].cols();
    b.put("window_dims", dims);
  }
  b.save(path);
}

Rollout load_rollout(const std::string& path) {
  const MatrixBundle b = MatrixBundle::load(path);
  Rollout ro;
  ro.x = b.get("x");
  ro.u_hat = b.get("u_hat");
  if (b.has("u_star")) {
    ro.u_star = b.get("u_star");
    ro.has_u_star = true;
  }
  ro.s_true = b.get("s_true");
  ro.stage_cost = b.get("stage_cost");
  ro.total_cost = b.get("total_cost")(0, 0);
  if (b.has("s_hat")) {
    const Eigen::MatrixXd dims = b.get("window_dims");
    const int p = static_cast<int>(dims(0, 0)), H = static_cast<int>(dims(0, 1));
    const Eigen::MatrixXd sh = b.get("s_hat"), sf = b.get("s_future");
    for (Eigen::Index t = 0; t < sh.cols(); ++t) {
      ro.s_hat.push_back(unflatten(sh.col(t), p, H));
      ro.s_future.push_back(unflatten(sf.col(t), p, H));
    }
  }
  return ro;
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void atomic_write(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot open '" + tmp + "' for writing");
    out << text;
  }
  fs::rename(tmp, path);
}

}  // namespace

void write_report_csv(const MetricsReport& report, const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  out << "scheme,Z,lambda,seed,ok,mean_cost,q10,q50,q90,baseline_mean,ratio,compression\n";
  for (const auto& c : report.cells) {
    out << c.scheme << ',' << c.Z << ',' << c.lambda << ',' << c.seed << ',' << (c.ok ? 1 : 0)
        << ',';
    if (c.ok) {
      const CellMetrics& m = c.metrics;
      out << m.mean_cost << ',' << m.q10 << ',' << m.q50 << ',' << m.q90 << ','
          << m.baseline_mean << ','
          << (m.baseline_mean > 0 ? m.mean_cost / m.baseline_mean : 0.0) << ','
          << c.compression << '\n';
    } else {
      out << ",,,,,," << '\n';
    }
  }
  atomic_write(path, out.str());
}

void write_report_json(const MetricsReport& report, const std::string& path) {
  json j;
  j["schema_version"] = 1;
  j["scenario"] = report.scenario;
  j["failed_cells"] = report.failed_cells;
  j["cells"] = json::array();
  for (const auto& c : report.cells) {
    json jc;
    jc["scheme"] = c.scheme;
    jc["Z"] = c.Z;
    jc["lambda"] = c.lambda;
    jc["seed"] = c.seed;
    jc["ok"] = c.ok;
    if (!c.ok) {
      jc["error"] = c.error;
    } else {
      const CellMetrics& m = c.metrics;
      jc["compression_gain"] = c.compression;
      jc["mean_cost"] = m.mean_cost;
      jc["q10"] = m.q10;
      jc["q50"] = m.q50;
      jc["q90"] = m.q90;
      jc["baseline_mean"] = m.baseline_mean;
      jc["cost_ratio"] = m.baseline_mean > 0 ? m.mean_cost / m.baseline_mean : 0.0;
      jc["costs"] = m.costs;
      jc["baseline_costs"] = m.baseline_costs;
      if (m.control_mse.size()) {
        std::vector<double> cm(m.control_mse.data(), m.control_mse.data() + m.control_mse.size());
        jc["control_mse"] = cm;
      }
      if (m.forecast_err.size()) {
        json fe = json::array();
        for (Eigen::Index r = 0; r < m.forecast_err.rows(); ++r) {
          std::vector<double> row(m.forecast_err.cols());
          for (Eigen::Index cidx = 0; cidx < m.forecast_err.cols(); ++cidx)
            row[cidx] = m.forecast_err(r, cidx);
          fe.push_back(row);
        }
        jc["forecast_error"] = fe;
      }
    }
    j["cells"].push_back(jc);
  }
  j["aggregates"] = json::array();
  for (const auto& a : report.aggregates) {
    json ja;
    ja["scheme"] = a.scheme;
    ja["Z"] = a.Z;
    ja["lambda"] = a.lambda;
    ja["cells"] = a.cells;
    ja["mean_cost"] = a.mean_cost;
    ja["q10"] = a.q10;
    ja["q50"] = a.q50;
    ja["q90"] = a.q90;
    ja["baseline_mean"] = a.baseline_mean;
    ja["cost_ratio"] = a.ratio;
    j["aggregates"].push_back(ja);
  }
  json mz;
  for (const auto& [scheme, z] : report_min_z(report))
    mz[scheme] = z < 0 ? json("not reached") : json(z);
  j["min_z"] = mz;
  atomic_write(path, j.dump(2) + "\n");
}

namespace {

// minimal hand-rolled SVG helpers -----------------------------------------

constexpr int kWidth = 640, kHeight = 420, kMargin = 60;

double map_x(double v, double lo, double hi) {
  if (hi <= lo) hi = lo + 1;
  return kMargin + (v - lo) / (hi - lo) * (kWidth - 2 * kMargin);
}

double map_y(double v, double lo, double hi) {
  if (hi <= lo) hi = lo + 1;
  return kHeight - kMargin - (v - lo) / (hi - lo) * (kHeight - 2 * kMargin);
}

const char* scheme_color(const std::string& scheme) {
  if (scheme == "task-aware") return "#1f77b4";
  if (scheme == "weighted") return "#2ca02c";
  if (scheme == "task-agnostic") return "#d62728";
  return "#7f7f7f";
}

void svg_header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
}

}  // namespace

void write_report_svg(const MetricsReport& report, const std::string& dir) {
  // cost vs Z per scheme (best lambda per point) plus the baseline line
  {
    std::map<std::string, std::map<int, double>> curves;
    double baseline = 0;
    int nb = 0;
    for (const auto& a : report.aggregates) {
      auto& pt = curves[a.scheme];
      if (!pt.count(a.Z) || a.mean_cost < pt[a.Z]) pt[a.Z] = a.mean_cost;
      baseline += a.baseline_mean;
      ++nb;
    }
    if (nb) baseline /= nb;

    double lo = baseline, hi = baseline, zlo = 1e9, zhi = -1e9;
    for (const auto& [scheme, pts] : curves)
      for (const auto& [z, c] : pts) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        zlo = std::min<double>(zlo, z);
        zhi = std::max<double>(zhi, z);
      }

    std::ostringstream out;
    svg_header(out, "control cost vs bottleneck Z (" + report.scenario + ")");
    out << "<line x1=\"" << map_x(zlo, zlo, zhi) << "\" y1=\"" << map_y(baseline, lo, hi)
        << "\" x2=\"" << map_x(zhi, zlo, zhi) << "\" y2=\"" << map_y(baseline, lo, hi)
        << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    int legend = 0;
    for (const auto& [scheme, pts] : curves) {
      out << "<polyline fill=\"none\" stroke=\"" << scheme_color(scheme)
          << "\" stroke-width=\"2\" points=\"";
      for (const auto& [z, c] : pts) out << map_x(z, zlo, zhi) << ',' << map_y(c, lo, hi) << ' ';
      out << "\"/>\n";
      out << "<text x=\"" << kWidth - kMargin - 150 << "\" y=\"" << 50 + 18 * legend
          << "\" fill=\"" << scheme_color(scheme) << "\" font-size=\"13\">" << scheme
          << "</text>\n";
      ++legend;
    }
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16
        << "\" text-anchor=\"middle\" font-size=\"13\">Z</text>\n</svg>\n";
    atomic_write((fs::path(dir) / "cost_vs_z.svg").string(), out.str());
  }

  // per-dimension control error bars, first successful cell per scheme
  {
    std::ostringstream out;
    svg_header(out, "per-dimension control error (" + report.scenario + ")");
    std::map<std::string, Eigen::VectorXd> bars;
    for (const auto& c : report.cells)
      if (c.ok && c.metrics.control_mse.size() && !bars.count(c.scheme))
        bars[c.scheme] = c.metrics.control_mse;
    double hi = 1e-300;
    for (const auto& [s, v] : bars) hi = std::max(hi, v.maxCoeff());
    const int groups = bars.empty() ? 1 : static_cast<int>(bars.begin()->second.size());
    const double bw = (kWidth - 2.0 * kMargin) / std::max(1, groups) / (bars.size() + 1.0);
    int si = 0;
    for (const auto& [scheme, v] : bars) {
      for (int d = 0; d < v.size(); ++d) {
        const double x = kMargin + d * (kWidth - 2.0 * kMargin) / groups + si * bw;
        const double h = v(d) / hi * (kHeight - 2.0 * kMargin);
        out << "<rect x=\"" << x << "\" y=\"" << kHeight - kMargin - h << "\" width=\"" << bw * 0.9
            << "\" height=\"" << h << "\" fill=\"" << scheme_color(scheme) << "\"/>\n";
      }
      out << "<text x=\"" << kWidth - kMargin - 150 << "\" y=\"" << 50 + 18 * si << "\" fill=\""
          << scheme_color(scheme) << "\" font-size=\"13\">" << scheme << "</text>\n";
      ++si;
    }
    out << "</svg>\n";
    atomic_write((fs::path(dir) / "control_error.svg").string(), out.str());
  }

  // forecast-error heatmap (dimension x horizon) of the first successful cell
  {
    const CellResult* chosen = nullptr;
    for (const auto& c : report.cells)
      if (c.ok && c.metrics.forecast_err.size()) {
        chosen = &c;
        break;
      }
    std::ostringstream out;
    svg_header(out, chosen ? "forecast error by horizon (" + chosen->scheme + ")"
                           : "forecast error by horizon");
    if (chosen) {
      const Eigen::MatrixXd& fe = chosen->metrics.forecast_err;
      const double hi = std::max(fe.maxCoeff(), 1e-300);
      const double cw = (kWidth - 2.0 * kMargin) / fe.cols();
      const double ch = (kHeight - 2.0 * kMargin) / fe.rows();
      for (Eigen::Index r = 0; r < fe.rows(); ++r)
        for (Eigen::Index cidx = 0; cidx < fe.cols(); ++cidx) {
          const int shade = 255 - static_cast<int>(std::round(fe(r, cidx) / hi * 255));
          out << "<rect x=\"" << kMargin + cidx * cw << "\" y=\"" << kMargin + r * ch
              << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"rgb(255," << shade
              << ',' << shade << ")\"/>\n";
        }
    }
    out << "</svg>\n";
    atomic_write((fs::path(dir) / "forecast_error.svg").string(), out.str());
  }
}

}  // namespace codesign
