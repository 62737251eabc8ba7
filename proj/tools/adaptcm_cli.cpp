// adaptcm: data generation, training, verification and closed-loop simulation.

#include "adaptcm/config.hpp"
#include "adaptcm/cstr.hpp"
#include "adaptcm/io.hpp"
#include "adaptcm/scenario.hpp"
#include "adaptcm/trainer.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace adaptcm;

namespace {

struct Common {
  std::string config_path = "configs/cstr.toml";
  std::vector<std::string> overrides;
};

ScenarioConfig load_scenario(const Common& c) {
  Config cfg = Config::load(c.config_path);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  return ScenarioConfig::from_config(cfg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

Vec parse_state(const std::string& text) {
  const auto parts = split(text, ',');
  Vec v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(parts[i]);
  return v;
}

int cmd_gen_data(const ScenarioConfig& s, const std::string& out_path) {
  const CstrModel model(s.model);
  const auto data = generate_dataset(model, s.trainer);
  auto out = open_out(out_path.empty() ? s.dataset_path : out_path);
  write_dataset(out, data);
  std::cout << "wrote " << data.size() << " samples\n";
  return 0;
}

int cmd_train(const ScenarioConfig& s, const std::string& data_path, const std::string& history_path) {
  const CstrModel model(s.model);
  TrainResult res = [&] {
    if (data_path.empty()) return train(model, s.trainer);
    std::ifstream in(data_path);
    if (!in) throw std::runtime_error("cannot read '" + data_path + "'");
    const auto data = read_dataset(in, model.state_dim(), model.input_dim(), model.param_dim());
    auto init = NetworkWeights::initialize(
        NetworkDims{model.state_dim(), model.input_dim(), model.param_dim()}, s.trainer.hidden,
        model.state_box(), model.param_box(), s.trainer.seed);
    return train(model, s.trainer, data, std::move(init));
  }();
  save_weights(res.weights, s.weights_path);
  if (!history_path.empty()) {
    auto out = open_out(history_path);
    out << "step,loss\n";
    for (std::size_t i = 0; i < res.loss_history.size(); ++i)
      out << i << ',' << format_double(res.loss_history[i]) << '\n';
  }
  std::cout << "steps " << res.steps << " final loss " << format_double(res.loss_history.back())
            << (res.converged ? " (converged)" : "") << "\n";
  return 0;
}

int cmd_verify(const ScenarioConfig& s, const std::string& csv_path) {
  const CstrModel model(s.model);
  const auto w = load_weights(s.weights_path);
  const auto report = verify(w, model, s.trainer, VerifyMesh::refined(s.trainer));
  auto out = open_out(s.report_path);
  write_report_text(out, report);
  write_report_text(std::cout, report);
  if (!csv_path.empty()) {
    auto csv = open_out(csv_path);
    write_report_csv(csv, report);
  }
  return 0;
}

int cmd_simulate(ScenarioConfig s, bool no_estimator) {
  if (no_estimator) s.estimator_enabled = false;
  const auto w = load_weights(s.weights_path);
  TrajectoryLog log;
  int status = 0;
  try {
    log = run(s, w);
  } catch (const SimulationError& e) {
    std::cerr << "simulation aborted: " << e.what() << "\n";
    log = e.partial();
    status = 1;
  }
  {
    auto out = open_out(s.trajectory_path);
    write_trajectory_csv(out, log);
  }
  const RunSummary summary = summarize(s, log);
  auto out = open_out(s.summary_path);
  write_summary(out, summary);
  write_summary(std::cout, summary);
  return status;
}

int cmd_geodesic_dump(const ScenarioConfig& s, const std::string& state) {
  const auto w = load_weights(s.weights_path);
  auto out = open_out(s.geodesic_path);
  out << "row,node,x1,x2\n";
  auto dump = [&](int row, const GeodesicPath& p) {
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      out << row << ',' << i << ',' << format_double(p.nodes[i][0]) << ',' << format_double(p.nodes[i][1])
          << '\n';
    }
  };
  if (!state.empty()) {
    const CstrModel model(s.model);
    const Vec r = model.param_box().clip(s.initial_estimate);
    const auto ref = generate_reference(model, r, s.schedule.entries().front().setpoint);
    GeodesicOptions opts = s.geodesic;
    const auto p = geodesic(w, parse_state(state), ref.x_star, r, opts);
    dump(0, p);
    std::cout << "length " << format_double(p.length) << "\n";
    return 0;
  }
  const auto log = run(s, w, true);
  for (std::size_t k = 0; k < log.paths.size(); ++k) dump(static_cast<int>(k), log.paths[k]);
  std::cout << "wrote " << log.paths.size() << " geodesics\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive contraction-metric control of an uncertain CSTR"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_path, "configuration file")->capture_default_str();
  app.add_option("--set", common.overrides, "override a key, e.g. --set trainer.max_iterations=50");

  std::string out_path, data_path, history_path, csv_path, state;
  bool no_estimator = false;
  auto* gen = app.add_subcommand("gen-data", "write the training mesh and linearisations");
  gen->add_option("-o,--out", out_path, "dataset file (default paths.dataset)");
  auto* tr = app.add_subcommand("train", "train the metric and gain network");
  tr->add_option("--data", data_path, "train on a dataset file instead of a fresh mesh");
  tr->add_option("--history", history_path, "write the loss history as CSV");
  auto* ver = app.add_subcommand("verify", "check the contraction condition on a refined mesh");
  ver->add_option("--csv", csv_path, "write per-cell results as CSV");
  auto* sim = app.add_subcommand("simulate", "run the closed-loop scenario");
  sim->add_flag("--no-estimator", no_estimator, "keep the initial parameter estimate");
  auto* geo = app.add_subcommand("geodesic-dump", "write geodesic nodes as CSV");
  geo->add_option("--state", state, "single geodesic from the first reference to x1,x2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    const ScenarioConfig s = load_scenario(common);
    if (*gen) return cmd_gen_data(s, out_path);
    if (*tr) return cmd_train(s, data_path, history_path);
    if (*ver) return cmd_verify(s, csv_path);
    if (*sim) return cmd_simulate(s, no_estimator);
    if (*geo) return cmd_geodesic_dump(s, state);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
