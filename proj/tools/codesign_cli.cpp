// Command-line harness: dataset generation, analytic codec fitting, model
// training, evaluation, and Z/lambda sweeps with plot-ready outputs.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 partial sweep failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "codesign/codec.hpp"
#include "codesign/errors.hpp"
#include "codesign/metrics.hpp"
#include "codesign/scenarios.hpp"
#include "codesign/trainer.hpp"

namespace fs = std::filesystem;
using namespace codesign;
using nlohmann::json;

namespace {

struct GlobalArgs {
  std::string scenario = "lqr-mpc";
  std::string scheme = "task-aware";
  std::vector<int> z = {4};
  std::vector<double> lambda = {1.0};
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "out";
  std::string config;  // scenario config file; overrides --scenario
};

ScenarioSpec resolve_scenario(const GlobalArgs& g) {
  if (!g.config.empty()) return ScenarioSpec::load(g.config);
  return builtin(g.scenario);
}

std::vector<LossMode> parse_schemes(const std::string& list) {
  std::vector<LossMode> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(loss_mode_from_string(item));
  if (out.empty()) throw ConfigError("no schemes given");
  return out;
}

void write_cell_json(const CellResult& cell, const std::string& path) {
  json j;
  j["schema_version"] = 1;
  j["scheme"] = cell.scheme;
  j["Z"] = cell.Z;
  j["lambda"] = cell.lambda;
  j["seed"] = cell.seed;
  j["compression_gain"] = cell.compression;
  j["mean_cost"] = cell.metrics.mean_cost;
  j["q10"] = cell.metrics.q10;
  j["q50"] = cell.metrics.q50;
  j["q90"] = cell.metrics.q90;
  j["baseline_mean"] = cell.metrics.baseline_mean;
  j["cost_ratio"] = cell.metrics.baseline_mean > 0
                        ? cell.metrics.mean_cost / cell.metrics.baseline_mean
                        : 0.0;
  j["costs"] = cell.metrics.costs;
  j["baseline_costs"] = cell.metrics.baseline_costs;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "'");
  out << j.dump(2) << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"task-aware timeseries compression for downstream control"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--scenario", g.scenario, "builtin scenario name");
  app.add_option("--scheme", g.scheme, "task-aware | weighted | task-agnostic");
  app.add_option("--z", g.z, "bottleneck dimension(s)");
  app.add_option("--lambda", g.lambda, "forecast-loss weight(s)");
  app.add_option("--seed", g.seeds, "random seed(s)");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--config", g.config, "scenario config file (overrides --scenario)");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset as CSV");
  int gen_count = 15;
  gen->add_option("--count", gen_count, "number of series");

  auto* fit = app.add_subcommand("fit-analytic", "fit a linear codec in closed form");
  auto* train_cmd = app.add_subcommand("train", "train the forecaster end to end");
  int epochs_override = 0;
  train_cmd->add_option("--epochs", epochs_override, "override scenario epochs");
  auto* eval_cmd = app.add_subcommand("eval", "run one experiment cell and report metrics");
  auto* sweep_cmd = app.add_subcommand("sweep", "cross product of schemes x Z x lambda x seeds");
  std::string sweep_schemes = "task-aware,weighted,task-agnostic";
  int sweep_threads = 1;
  sweep_cmd->add_option("--schemes", sweep_schemes, "comma-separated scheme list");
  sweep_cmd->add_option("--threads", sweep_threads, "worker pool size");
  auto* report_cmd = app.add_subcommand("report", "summarize a sweep report.json");
  std::string report_path;
  double report_tol = 0.05;
  report_cmd->add_option("--input", report_path, "path to report.json")->required();
  report_cmd->add_option("--tolerance", report_tol, "min-Z cost tolerance");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    const ScenarioSpec spec = resolve_scenario(g);
    const SeriesBatch batch = spec.make_batch(gen_count, g.seeds.front());
    fs::create_directories(g.out_dir);
    save_csv(batch, g.out_dir);
    std::cout << "wrote " << batch.count() << " series (p=" << batch.p << ", T=" << batch.T
              << ") to " << g.out_dir << "\n";
    return 0;
  }

  if (fit->parsed()) {
    const ScenarioSpec spec = resolve_scenario(g);
    const LossMode scheme = loss_mode_from_string(g.scheme);
    const SeriesBatch batch = spec.make_batch(spec.train_series, g.seeds.front());
    SampleMatrix S;
    const int last_t = batch.T - spec.H;
    S.S.resize(batch.p * spec.H, static_cast<Eigen::Index>(batch.count()) * (last_t + 1));
    Eigen::Index col = 0;
    for (int i = 0; i < batch.count(); ++i)
      for (int t = 0; t <= last_t; ++t)
        S.S.col(col++) = flatten(windows(batch, i, t, spec.H).future);

    const CodesignForms forms = build_prediction(spec.lti());
    const int Z = g.z.front();
    const LinearCodec codec =
        scheme == LossMode::TaskAware  ? fit_task_aware(forms.Psi, 0.0, S, Z)
        : scheme == LossMode::Weighted ? fit_task_aware(forms.Psi, g.lambda.front(), S, Z)
                                       : fit_task_agnostic(S, Z);
    fs::create_directories(g.out_dir);
    const std::string path = (fs::path(g.out_dir) / "codec.bundle").string();
    codec.to_bundle().save(path);
    std::cout << "codec Z=" << Z << " objective=" << codec.objective << " -> " << path << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    ScenarioSpec spec = resolve_scenario(g);
    if (epochs_override > 0) spec.epochs = epochs_override;
    const LossMode scheme = loss_mode_from_string(g.scheme);
    SeriesBatch batch = spec.make_batch(spec.train_series, g.seeds.front());
    if (spec.use_scaling) batch = scale(batch, spec.scale_mode).first;

    ForecastModel model =
        ForecastModel::init(spec.n, spec.W, spec.H, g.z.front(), scheme,
                            scheme == LossMode::Weighted ? g.lambda.front() : 0.0,
                            g.seeds.front());
    TrainConfig tc;
    tc.epochs = spec.epochs;
    tc.lambda_f = scheme == LossMode::Weighted ? g.lambda.front() : 0.0;
    tc.loss = scheme == LossMode::TaskAgnostic ? TrainLoss::Mse : TrainLoss::Total;
    fs::create_directories(g.out_dir);
    tc.checkpoint_path = (fs::path(g.out_dir) / "model.bundle").string();

    const TrainLog log = train(model, spec.problem(), batch, tc);
    std::ofstream csv((fs::path(g.out_dir) / "train_log.csv").string());
    csv << "epoch,loss,j_pi,j_forecast,wall_seconds\n";
    csv.precision(17);
    for (const auto& e : log.epochs)
      csv << e.epoch << ',' << e.loss << ',' << e.j_pi << ',' << e.j_forecast << ','
          << e.wall_seconds << '\n';
    std::cout << "best loss " << log.best_loss << " at epoch " << log.best_epoch << " -> "
              << tc.checkpoint_path << (log.diverged ? " (diverged, rolled back)" : "") << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    const ScenarioSpec spec = resolve_scenario(g);
    const CellResult cell = run_experiment(spec, loss_mode_from_string(g.scheme), g.z.front(),
                                           g.lambda.front(), g.seeds.front());
    fs::create_directories(g.out_dir);
    write_cell_json(cell, (fs::path(g.out_dir) / "eval.json").string());
    std::cout << "mean cost " << cell.metrics.mean_cost << " (baseline "
              << cell.metrics.baseline_mean << ", gain " << cell.compression << "x)\n";
    return 0;
  }

  if (sweep_cmd->parsed()) {
    const ScenarioSpec spec = resolve_scenario(g);
    SweepOptions opts;
    opts.z_values = g.z;
    opts.lambdas = g.lambda;
    opts.schemes = parse_schemes(sweep_schemes);
    opts.seeds = g.seeds;
    opts.out_dir = g.out_dir;
    opts.threads = sweep_threads;
    const MetricsReport rep = sweep(spec, opts);
    std::cout << rep.cells.size() - rep.failed_cells << "/" << rep.cells.size()
              << " cells ok -> " << g.out_dir << "\n";
    for (const auto& [scheme, z] : report_min_z(rep))
      std::cout << "min-Z " << scheme << ": " << (z < 0 ? std::string("not reached")
                                                        : std::to_string(z))
                << "\n";
    return rep.failed_cells > 0 ? 4 : 0;
  }

  if (report_cmd->parsed()) {
    std::ifstream in(report_path);
    if (!in) throw ConfigError("cannot open '" + report_path + "'");
    json j;
    in >> j;
    std::cout << "scenario: " << j.value("scenario", std::string("?")) << "\n";
    std::cout << "failed cells: " << j.value("failed_cells", 0) << "\n";
    // recompute min-Z from the aggregate rows at the requested tolerance
    std::map<std::string, int> best;
    for (const auto& a : j["aggregates"]) {
      const std::string scheme = a["scheme"];
      if (!best.count(scheme)) best[scheme] = -1;
      const double mean = a["mean_cost"], base = a["baseline_mean"];
      const int z = a["Z"];
      if (mean <= (1.0 + report_tol) * base && (best[scheme] < 0 || z < best[scheme]))
        best[scheme] = z;
    }
    for (const auto& [scheme, z] : best)
      std::cout << "min-Z " << scheme << ": "
                << (z < 0 ? std::string("not reached") : std::to_string(z)) << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
