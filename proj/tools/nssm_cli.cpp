// Command-line front end over the experiment harness: dataset generation,
// training, checkpoint evaluation, the ablation grid, hyperparameter search,
// and spectrum export. All file formats are the harness's (JSON configs,
// JSONL loss logs, CSV traces and spectra).

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>

#include "nssm/harness.hpp"

using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return json::parse(is);
}

// Channel counts and sampling interval are fixed per system.
nssm::Trajectory load_for_system(const std::string& system, const std::string& path) {
  if (system == "cstr") return nssm::load_dataset(path, 1, 2, 0.1);
  if (system == "twotank") return nssm::load_dataset(path, 2, 2, 1.0);
  if (system == "aero") return nssm::load_aero(path);
  throw std::invalid_argument("unknown system '" + system + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block-structured neural state space model workbench"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Generate an emulator dataset");
  std::string sim_system;
  uint64_t sim_seed = 1;
  int sim_steps = 10000;
  double sim_dt = 0.0;
  std::string sim_out;
  sim->add_option("--system", sim_system, "cstr | twotank")->required();
  sim->add_option("--seed", sim_seed, "excitation seed");
  sim->add_option("--steps", sim_steps, "samples to generate");
  sim->add_option("--dt", sim_dt, "integrator step (default per system)");
  sim->add_option("--out", sim_out, "output text file")->required();

  auto* tr = app.add_subcommand("train", "Train one configuration");
  std::string tr_config, tr_data, tr_out = "runs/latest";
  tr->add_option("--config", tr_config, "experiment config JSON")->required();
  tr->add_option("--data", tr_data, "dataset text file")->required();
  tr->add_option("--out", tr_out, "output directory");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_system, ev_out;
  int ev_horizon = 0;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint prefix (no extension)")->required();
  ev->add_option("--data", ev_data, "dataset text file")->required();
  ev->add_option("--system", ev_system, "cstr | twotank | aero")->required();
  ev->add_option("--horizon", ev_horizon, "also report N-step MSE for this N");
  ev->add_option("--out", ev_out, "directory for open-loop trace CSVs");

  auto* ab = app.add_subcommand("ablate", "Run the constraint ablation grid");
  std::string ab_plan, ab_data, ab_out = "ablation.json";
  ab->add_option("--plan", ab_plan, "plan JSON: {\"base\": config, \"seeds\": n}")->required();
  ab->add_option("--data", ab_data, "dataset text file")->required();
  ab->add_option("--out", ab_out, "per-cell table JSON");

  auto* gr = app.add_subcommand("grid", "Small hyperparameter grid search");
  std::string gr_template, gr_spec, gr_data, gr_out = "leaderboard.json";
  gr->add_option("--template", gr_template, "base experiment config JSON")->required();
  gr->add_option("--grid", gr_spec, "axes JSON: {\"lr\": [...], ...}")->required();
  gr->add_option("--data", gr_data, "dataset text file")->required();
  gr->add_option("--out", gr_out, "leaderboard JSON");

  auto* eg = app.add_subcommand("eigen", "Export state-transition spectra");
  std::string eg_ckpt, eg_out = "spectra.csv";
  eg->add_option("--checkpoint", eg_ckpt, "checkpoint prefix (no extension)")->required();
  eg->add_option("--out", eg_out, "CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      nssm::Trajectory traj;
      if (sim_system == "cstr")
        traj = nssm::generate_cstr_dataset(sim_seed, sim_steps, sim_dt > 0.0 ? sim_dt : 0.1);
      else if (sim_system == "twotank")
        traj = nssm::generate_twotank_dataset(sim_seed, sim_steps, sim_dt > 0.0 ? sim_dt : 1.0);
      else
        throw std::invalid_argument("simulate covers the emulated systems: cstr | twotank");
      nssm::save_dataset(sim_out, traj);
      std::cout << "wrote " << sim_out << " (" << traj.y.rows() << " samples)\n";
    } else if (tr->parsed()) {
      nssm::ExperimentConfig cfg = nssm::experiment_config_from_json(read_json(tr_config));
      nssm::Trajectory traj = load_for_system(cfg.system, tr_data);
      nssm::DataSplits data = nssm::prepare_splits(cfg, traj);
      nssm::TrainOutcome out = nssm::train(cfg, data, tr_out);
      std::cout << to_json(out.result).dump(2) << "\n";
    } else if (ev->parsed()) {
      std::unique_ptr<nssm::BlockSsm> model = nssm::load_checkpoint(ev_ckpt);
      nssm::Trajectory traj = load_for_system(ev_system, ev_data);
      nssm::DataSplits data = nssm::split_and_window(
          traj, ev_horizon > 0 ? ev_horizon : 1, model->lookback());
      nssm::OpenLoopResult dev = model->open_loop_eval(data.dev);
      nssm::OpenLoopResult test = model->open_loop_eval(data.test);
      json out{{"open_loop_mse_dev", dev.mse}, {"open_loop_mse_test", test.mse}};
      if (ev_horizon > 0) {
        out["nstep_mse_dev"] = nssm::nstep_mse(*model, data.dev.windows);
        out["nstep_mse_test"] = nssm::nstep_mse(*model, data.test.windows);
        out["horizon"] = ev_horizon;
      }
      if (!ev_out.empty()) {
        std::filesystem::create_directories(ev_out);
        nssm::write_trace_csv(ev_out + "/dev_trace.csv", data.dev, dev.trajectory,
                              data.lookback, data.dt);
        nssm::write_trace_csv(ev_out + "/test_trace.csv", data.test, test.trajectory,
                              data.lookback, data.dt);
      }
      std::cout << out.dump(2) << "\n";
    } else if (ab->parsed()) {
      nssm::AblationPlan plan = nssm::ablation_plan_from_json(read_json(ab_plan));
      nssm::Trajectory traj = load_for_system(plan.base.system, ab_data);
      nssm::DataSplits data = nssm::prepare_splits(plan.base, traj);
      std::vector<nssm::AblationCell> cells = nssm::run_ablation(plan, data, ab_out);
      for (const nssm::AblationCell& c : cells)
        std::printf("%-28s median %.6g  spread [%.6g, %.6g]\n", c.name.c_str(), c.median, c.lo,
                    c.hi);
      std::cout << "wrote " << ab_out << "\n";
    } else if (gr->parsed()) {
      nssm::ExperimentConfig tmpl = nssm::experiment_config_from_json(read_json(gr_template));
      std::vector<nssm::GridAxis> axes = nssm::grid_axes_from_json(read_json(gr_spec));
      nssm::Trajectory traj = load_for_system(tmpl.system, gr_data);
      std::vector<nssm::GridEntry> entries = nssm::grid_search(tmpl, axes, traj, gr_out);
      for (size_t i = 0; i < entries.size(); ++i)
        std::printf("#%-2zu dev %.6g  test %.6g  lr %g\n", i + 1,
                    entries[i].result.open_loop_mse_dev, entries[i].result.open_loop_mse_test,
                    entries[i].config.lr);
      std::cout << "wrote " << gr_out << "\n";
    } else if (eg->parsed()) {
      std::unique_ptr<nssm::BlockSsm> model = nssm::load_checkpoint(eg_ckpt);
      nssm::export_eigenvalues(*model, eg_out);
      std::cout << "wrote " << eg_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
