#pragma once

// Experiment orchestration: JSON experiment configs, the training loop with
// dev-selected checkpointing, the constraint ablation runner, state-transition
// spectrum export, and a small hyperparameter grid. Ablation and grid cells
// run on a worker pool sized by the NSSM_WORKERS env var (default 1); each
// worker trains one model at a time and shares no mutable state.

#include <complex>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "nssm/objective.hpp"
#include "nssm/ssm.hpp"

namespace nssm {

struct ExperimentConfig {
  std::string system = "twotank";  // cstr | twotank | aero
  ModelConfig model;
  LossWeights weights;

  double bounds_widen = 0.05;  // y bounds: train-split range widened per side
  double fu_limit = 1.0;       // f_u influence bounds: +-limit per state channel

  double lr = 1e-3;
  double weight_decay = 0.0;
  int horizon = 64;  // N, rollout length per objective evaluation
  int stride = 1;
  int batch = 0;  // 0: one full-batch gradient per step; >0: seeded minibatches
  int64_t max_steps = 10000;
  int eval_every = 100;  // dev open-loop cadence; init and final always run
  uint64_t seed = 1;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

// FNV-1a over the canonical (key-sorted) JSON dump.
uint64_t config_hash(const ExperimentConfig& cfg);

// Eigenvalues of one square effective map.
struct Spectrum {
  std::string map;
  std::vector<std::complex<double>> eigenvalues;
};

struct RunResult {
  double nstep_mse_dev = 0.0;
  double nstep_mse_test = 0.0;
  double open_loop_mse_dev = 0.0;
  double open_loop_mse_test = 0.0;
  std::vector<LossReport> loss_curve;  // one entry per optimizer step
  std::vector<Spectrum> spectra;       // square state-transition maps
  double wall_seconds = 0.0;
  int64_t best_step = 0;  // step whose dev open-loop MSE selected the weights
  uint64_t config_hash = 0;
};

// Metrics, hash, and spectra; the full loss curve stays in the JSONL log.
nlohmann::json to_json(const RunResult& r);

// Windows for cfg.horizon / cfg.model.lookback / cfg.stride.
DataSplits prepare_splits(const ExperimentConfig& cfg, const Trajectory& traj);

// Mean squared N-step prediction error over a window batch (no gradients).
double nstep_mse(BlockSsm& model, const WindowBatch& windows);

// CSV rows "t, y_true..., y_pred..." for an open-loop trajectory; predictions
// start at row `lookback` of the split.
void write_trace_csv(const std::string& path, const SplitData& split, const Matrix& predictions,
                     int lookback, double dt);

struct TrainOutcome {
  RunResult result;
  std::unique_ptr<BlockSsm> model;  // weights restored to the selected step
};

// rollout -> weighted losses -> backward -> AdamW step, repeated max_steps
// times on the train windows (full batch unless cfg.batch > 0). Checkpoint
// selection reads the dev split only; test metrics are computed once, on the
// selected weights. Throws NumericError when the total loss turns non-finite
// or exceeds 1e6. A nonempty out_dir receives losses.jsonl, run.json, the
// best checkpoint, spectra.csv, and open-loop trace CSVs for dev and test.
TrainOutcome train(const ExperimentConfig& cfg, const DataSplits& data,
                   const std::string& out_dir = "");

struct AblationPlan {
  ExperimentConfig base;
  int seeds_per_cell = 10;
};

AblationPlan ablation_plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AblationPlan& plan);

struct AblationCell {
  std::string name;
  ExperimentConfig config;  // differs from base only in the ablated knobs
  uint64_t base_hash = 0;   // shared lineage: hash of the unmodified base
  std::vector<double> test_open_loop;  // per seed, seed = base.seed + index
  std::vector<RunResult> runs;         // full per-seed results, same order
  double median = 0.0;
  double lo = 0.0, hi = 0.0;  // spread over seeds
};

// Cells: all, no_q_con_y, no_q_dx, no_q_con_fu, no_lm_prior (dense maps),
// no_constraints (penalties off, dense maps), unstructured_unconstrained.
// A nonempty out_path receives the per-cell table as JSON.
std::vector<AblationCell> run_ablation(const AblationPlan& plan, const DataSplits& data,
                                       const std::string& out_path = "");

// Eigenvalues of every square effective map inside the state transition
// (f_x or f_xu), recurrent maps included. Rectangular entry/exit layers have
// no spectrum and are skipped.
std::vector<Spectrum> state_spectra(BlockSsm& model);

// CSV rows "map,re,im", one per eigenvalue.
void export_eigenvalues(BlockSsm& model, const std::string& csv_path);

struct GridAxis {
  std::string key;  // config knob: lr, nodes, q_dx, linmap, horizon, ...
  std::vector<nlohmann::json> values;
};

// Accepts {"axes": {...}} or a bare object of key -> value-list; axes come
// out in the canonical key-sorted order.
std::vector<GridAxis> grid_axes_from_json(const nlohmann::json& j);

// One knob applied onto a config; throws on unknown keys.
ExperimentConfig apply_knob(const ExperimentConfig& cfg, const std::string& key,
                            const nlohmann::json& value);

struct GridEntry {
  ExperimentConfig config;
  RunResult result;
};

// Cartesian product of the axes (capped at 24 cells), each cell trained on
// windows built for its own horizon/lookback; returned ranked ascending by
// dev open-loop MSE. A nonempty out_path receives the leaderboard JSON.
std::vector<GridEntry> grid_search(const ExperimentConfig& tmpl,
                                   const std::vector<GridAxis>& axes, const Trajectory& traj,
                                   const std::string& out_path = "");

}  // namespace nssm
