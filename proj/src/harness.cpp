#include "nssm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace nssm {

namespace {

constexpr double kDivergenceGuard = 1e6;

uint64_t fnv1a_string(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::vector<Val> as_constants(Tape& t, const std::vector<Matrix>& ms) {
  std::vector<Val> out;
  out.reserve(ms.size());
  for (const Matrix& m : ms) out.push_back(t.constant(m));
  return out;
}

WindowBatch gather_columns(const WindowBatch& full, const std::vector<int>& idx) {
  auto take = [&](const std::vector<Matrix>& src) {
    std::vector<Matrix> dst;
    dst.reserve(src.size());
    for (const Matrix& m : src) {
      Matrix g(m.rows(), static_cast<int>(idx.size()));
      for (size_t j = 0; j < idx.size(); ++j)
        for (int i = 0; i < m.rows(); ++i) g(i, static_cast<int>(j)) = m(i, idx[j]);
      dst.push_back(std::move(g));
    }
    return dst;
  };
  WindowBatch out;
  out.y_history = take(full.y_history);
  out.u_future = take(full.u_future);
  out.y_future = take(full.y_future);
  return out;
}

// Seeded epoch shuffling; batches never straddle an epoch boundary.
class BatchSchedule {
 public:
  BatchSchedule(int total, int batch, uint64_t seed)
      : total_(total), batch_(std::min(batch, total)), rng_(seed), order_(total) {
    for (int i = 0; i < total_; ++i) order_[i] = i;
    reshuffle();
  }

  std::vector<int> next() {
    if (cursor_ + batch_ > total_) reshuffle();
    std::vector<int> idx(order_.begin() + cursor_, order_.begin() + cursor_ + batch_);
    cursor_ += batch_;
    return idx;
  }

 private:
  void reshuffle() {
    for (int i = total_ - 1; i > 0; --i) {
      const int j = static_cast<int>(rng_.uniform_int(0, i));
      std::swap(order_[i], order_[j]);
    }
    cursor_ = 0;
  }

  int total_;
  int batch_;
  Rng rng_;
  std::vector<int> order_;
  int cursor_ = 0;
};

void channel_extrema(const Matrix& series, Matrix& lo, Matrix& hi) {
  lo = Matrix(series.cols(), 1);
  hi = Matrix(series.cols(), 1);
  for (int j = 0; j < series.cols(); ++j) {
    double a = series(0, j), b = series(0, j);
    for (int i = 1; i < series.rows(); ++i) {
      a = std::min(a, series(i, j));
      b = std::max(b, series(i, j));
    }
    lo(j, 0) = a;
    hi(j, 0) = b;
  }
}

int worker_count() {
  const char* env = std::getenv("NSSM_WORKERS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

// Runs fn(0..count-1) on the worker pool; results land in caller-owned
// slots, so merge order never depends on scheduling.
void run_tasks(int count, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (std::thread& th : pool) th.join();
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.system = j.value("system", c.system);
  if (c.system != "cstr" && c.system != "twotank" && c.system != "aero")
    throw std::invalid_argument("experiment config: unknown system '" + c.system + "'");
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("weights")) {
    const nlohmann::json& w = j.at("weights");
    c.weights.q_y = w.value("q_y", c.weights.q_y);
    c.weights.q_reg = w.value("q_reg", c.weights.q_reg);
    c.weights.q_dx = w.value("q_dx", c.weights.q_dx);
    c.weights.q_con_y = w.value("q_con_y", c.weights.q_con_y);
    c.weights.q_con_fu = w.value("q_con_fu", c.weights.q_con_fu);
  }
  c.bounds_widen = j.value("bounds_widen", c.bounds_widen);
  c.fu_limit = j.value("fu_limit", c.fu_limit);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.horizon = j.value("horizon", c.horizon);
  c.stride = j.value("stride", c.stride);
  c.batch = j.value("batch", c.batch);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return nlohmann::json{{"system", c.system},
                        {"model", to_json(c.model)},
                        {"weights",
                         {{"q_y", c.weights.q_y},
                          {"q_reg", c.weights.q_reg},
                          {"q_dx", c.weights.q_dx},
                          {"q_con_y", c.weights.q_con_y},
                          {"q_con_fu", c.weights.q_con_fu}}},
                        {"bounds_widen", c.bounds_widen},
                        {"fu_limit", c.fu_limit},
                        {"lr", c.lr},
                        {"weight_decay", c.weight_decay},
                        {"horizon", c.horizon},
                        {"stride", c.stride},
                        {"batch", c.batch},
                        {"max_steps", c.max_steps},
                        {"eval_every", c.eval_every},
                        {"seed", c.seed}};
}

uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a_string(to_json(cfg).dump()); }

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json spectra = nlohmann::json::array();
  for (const Spectrum& s : r.spectra) {
    nlohmann::json re = nlohmann::json::array();
    nlohmann::json im = nlohmann::json::array();
    for (const std::complex<double>& z : s.eigenvalues) {
      re.push_back(z.real());
      im.push_back(z.imag());
    }
    spectra.push_back({{"map", s.map}, {"re", re}, {"im", im}});
  }
  nlohmann::json j{{"nstep_mse_dev", r.nstep_mse_dev},
                   {"nstep_mse_test", r.nstep_mse_test},
                   {"open_loop_mse_dev", r.open_loop_mse_dev},
                   {"open_loop_mse_test", r.open_loop_mse_test},
                   {"steps", r.loss_curve.size()},
                   {"best_step", r.best_step},
                   {"wall_seconds", r.wall_seconds},
                   {"config_hash", hash_hex(r.config_hash)},
                   {"spectra", spectra}};
  j["final_total_loss"] =
      r.loss_curve.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.loss_curve.back().total);
  return j;
}

DataSplits prepare_splits(const ExperimentConfig& cfg, const Trajectory& traj) {
  return split_and_window(traj, cfg.horizon, cfg.model.lookback, cfg.stride);
}

double nstep_mse(BlockSsm& model, const WindowBatch& windows) {
  Tape t;
  Rollout ro =
      model.rollout(t, as_constants(t, windows.y_history), as_constants(t, windows.u_future));
  return loss_y(t, ro.predictions, as_constants(t, windows.y_future)).scalar();
}

void write_trace_csv(const std::string& path, const SplitData& split, const Matrix& predictions,
                     int lookback, double dt) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  const int n_y = split.y.cols();
  os << "t";
  for (int j = 0; j < n_y; ++j) os << ",y" << j << "_true";
  for (int j = 0; j < n_y; ++j) os << ",y" << j << "_pred";
  os << "\n";
  for (int k = 0; k < predictions.rows(); ++k) {
    os << (lookback + k) * dt;
    for (int j = 0; j < n_y; ++j) os << "," << split.y(lookback + k, j);
    for (int j = 0; j < n_y; ++j) os << "," << predictions(k, j);
    os << "\n";
  }
}

TrainOutcome train(const ExperimentConfig& cfg, const DataSplits& data,
                   const std::string& out_dir) {
  const auto t_start = std::chrono::steady_clock::now();

  if (cfg.horizon != data.horizon)
    throw ShapeError("train: config horizon " + std::to_string(cfg.horizon) +
                     " but windows were built for " + std::to_string(data.horizon));
  if (cfg.model.lookback != data.lookback)
    throw ShapeError("train: config lookback " + std::to_string(cfg.model.lookback) +
                     " but windows were built for " + std::to_string(data.lookback));
  if (cfg.max_steps < 0) throw std::invalid_argument("train: max_steps must be >= 0");
  if (cfg.batch < 0) throw std::invalid_argument("train: batch must be >= 0");
  if (cfg.lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
  if (cfg.weights.q_con_fu != 0.0 && cfg.model.model_class == ModelClass::Unstructured)
    throw ShapeError("train: q_con_fu needs a separate input path; unstructured models have none");

  ExperimentConfig run = cfg;
  run.model.n_u = data.n_u;
  run.model.n_y = data.n_y;

  TrainOutcome out;
  out.result.config_hash = config_hash(cfg);

  Rng rng(run.seed);
  out.model = std::make_unique<BlockSsm>(run.model, rng);
  BlockSsm& model = *out.model;

  Matrix y_lo, y_hi;
  channel_extrema(data.train.y, y_lo, y_hi);
  const Bounds bounds =
      make_default_bounds(y_lo, y_hi, model.n_x(), run.bounds_widen, run.fu_limit);

  AdamWConfig ocfg;
  ocfg.lr = run.lr;
  ocfg.weight_decay = run.weight_decay;
  AdamW opt(model.params(), ocfg);

  std::ofstream jsonl;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    jsonl.open(out_dir + "/losses.jsonl");
    if (!jsonl) throw std::runtime_error("cannot write " + out_dir + "/losses.jsonl");
  }

  // Dev-selected checkpoint; the initialized model is candidate step 0.
  std::vector<Param*> params = model.params();
  std::vector<Matrix> best_params;
  double best_dev = std::numeric_limits<double>::infinity();
  int64_t best_step = 0;
  auto consider = [&](int64_t step) {
    const double dev = model.open_loop_eval(data.dev).mse;
    if (dev < best_dev) {
      best_dev = dev;
      best_step = step;
      best_params.clear();
      best_params.reserve(params.size());
      for (Param* p : params) best_params.push_back(p->value);
    }
  };
  consider(0);

  std::unique_ptr<BatchSchedule> schedule;
  if (run.batch > 0 && run.batch < data.train.windows.count())
    schedule = std::make_unique<BatchSchedule>(data.train.windows.count(), run.batch,
                                               run.seed ^ 0x9e3779b97f4a7c15ull);

  for (int64_t step = 1; step <= run.max_steps; ++step) {
    WindowBatch mini;
    if (schedule) mini = gather_columns(data.train.windows, schedule->next());
    const WindowBatch& wb = schedule ? mini : data.train.windows;

    LossReport rep;
    rep.step = step;
    try {
      Tape t;
      Rollout ro =
          model.rollout(t, as_constants(t, wb.y_history), as_constants(t, wb.u_future));
      LossTerms terms;
      terms.y = loss_y(t, ro.predictions, as_constants(t, wb.y_future));
      if (run.weights.q_reg != 0.0 && model.has_reg()) terms.reg = model.reg_penalty(t);
      if (run.weights.q_dx != 0.0 && ro.states.size() >= 2) terms.dx = loss_dx(t, ro.states);
      if (run.weights.q_con_y != 0.0) terms.con_y = con_y(t, ro.predictions, bounds);
      if (run.weights.q_con_fu != 0.0) terms.con_fu = con_fu(t, ro.fu_contributions, bounds);
      Val total = total_loss(t, terms, run.weights, rep);
      if (!std::isfinite(rep.total) || rep.total > kDivergenceGuard)
        throw NumericError("total loss " + std::to_string(rep.total) +
                           " breached the 1e6 guard");
      opt.zero_grad();
      t.backward(total);
      opt.step();
      clamp_values(model.beta_params(), -1.0, 1.0);
    } catch (const NumericError& e) {
      throw NumericError("train: diverged at step " + std::to_string(step) + ": " + e.what());
    }
    out.result.loss_curve.push_back(rep);
    if (jsonl.is_open()) jsonl << rep.to_jsonl() << "\n";
    if ((run.eval_every > 0 && step % run.eval_every == 0) || step == run.max_steps)
      consider(step);
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  out.result.best_step = best_step;
  out.result.open_loop_mse_dev = best_dev;

  const OpenLoopResult ol_test = model.open_loop_eval(data.test);
  out.result.open_loop_mse_test = ol_test.mse;
  out.result.nstep_mse_dev = nstep_mse(model, data.dev.windows);
  out.result.nstep_mse_test = nstep_mse(model, data.test.windows);
  out.result.spectra = state_spectra(model);
  out.result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  if (!out_dir.empty()) {
    save_checkpoint(model, out_dir + "/best");
    export_eigenvalues(model, out_dir + "/spectra.csv");
    write_trace_csv(out_dir + "/dev_trace.csv", data.dev, model.open_loop_eval(data.dev).trajectory,
                    data.lookback, data.dt);
    write_trace_csv(out_dir + "/test_trace.csv", data.test, ol_test.trajectory, data.lookback,
                    data.dt);
    nlohmann::json j = to_json(out.result);
    j["config"] = to_json(cfg);
    std::ofstream os(out_dir + "/run.json");
    if (!os) throw std::runtime_error("cannot write " + out_dir + "/run.json");
    os << j.dump(2) << "\n";
  }
  return out;
}

AblationPlan ablation_plan_from_json(const nlohmann::json& j) {
  if (!j.contains("base")) throw std::invalid_argument("ablation plan: missing base config");
  AblationPlan p;
  p.base = experiment_config_from_json(j.at("base"));
  p.seeds_per_cell = j.value("seeds", 10);
  if (p.seeds_per_cell < 1) throw std::invalid_argument("ablation plan: seeds must be >= 1");
  return p;
}

nlohmann::json to_json(const AblationPlan& plan) {
  return nlohmann::json{{"base", to_json(plan.base)}, {"seeds", plan.seeds_per_cell}};
}

namespace {

std::vector<AblationCell> build_cells(const ExperimentConfig& base) {
  const uint64_t bh = config_hash(base);
  std::vector<AblationCell> cells;
  auto add = [&](const std::string& name, const std::function<void(ExperimentConfig&)>& ablate) {
    AblationCell c;
    c.name = name;
    c.config = base;
    ablate(c.config);
    c.base_hash = bh;
    cells.push_back(std::move(c));
  };
  add("all", [](ExperimentConfig&) {});
  add("no_q_con_y", [](ExperimentConfig& c) { c.weights.q_con_y = 0.0; });
  add("no_q_dx", [](ExperimentConfig& c) { c.weights.q_dx = 0.0; });
  add("no_q_con_fu", [](ExperimentConfig& c) { c.weights.q_con_fu = 0.0; });
  add("no_lm_prior", [](ExperimentConfig& c) {
    c.model.linmap = LinmapKind::Dense;
    c.weights.q_reg = 0.0;
  });
  add("no_constraints", [](ExperimentConfig& c) {
    c.weights.q_con_y = c.weights.q_dx = c.weights.q_con_fu = c.weights.q_reg = 0.0;
    c.model.linmap = LinmapKind::Dense;
  });
  add("unstructured_unconstrained", [](ExperimentConfig& c) {
    c.weights.q_con_y = c.weights.q_dx = c.weights.q_con_fu = c.weights.q_reg = 0.0;
    c.model.linmap = LinmapKind::Dense;
    c.model.model_class = ModelClass::Unstructured;
  });
  return cells;
}

}  // namespace

std::vector<AblationCell> run_ablation(const AblationPlan& plan, const DataSplits& data,
                                       const std::string& out_path) {
  std::vector<AblationCell> cells = build_cells(plan.base);
  const int seeds = plan.seeds_per_cell;
  const int n_tasks = static_cast<int>(cells.size()) * seeds;
  std::vector<RunResult> results(n_tasks);
  run_tasks(n_tasks, [&](int task) {
    const int ci = task / seeds;
    const int si = task % seeds;
    ExperimentConfig cfg = cells[ci].config;
    cfg.seed = plan.base.seed + static_cast<uint64_t>(si);
    results[task] = train(cfg, data).result;
  });
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    AblationCell& c = cells[ci];
    c.runs.assign(std::make_move_iterator(results.begin() + ci * seeds),
                  std::make_move_iterator(results.begin() + (ci + 1) * seeds));
    c.test_open_loop.clear();
    for (const RunResult& r : c.runs) c.test_open_loop.push_back(r.open_loop_mse_test);
    c.median = median_of(c.test_open_loop);
    c.lo = *std::min_element(c.test_open_loop.begin(), c.test_open_loop.end());
    c.hi = *std::max_element(c.test_open_loop.begin(), c.test_open_loop.end());
  }
  if (!out_path.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const AblationCell& c : cells)
      rows.push_back({{"cell", c.name},
                      {"config_hash", hash_hex(config_hash(c.config))},
                      {"median", c.median},
                      {"lo", c.lo},
                      {"hi", c.hi},
                      {"per_seed", c.test_open_loop},
                      {"config", to_json(c.config)}});
    nlohmann::json table{{"base_hash", hash_hex(config_hash(plan.base))},
                         {"seeds", seeds},
                         {"cells", rows}};
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    os << table.dump(2) << "\n";
  }
  return cells;
}

std::vector<Spectrum> state_spectra(BlockSsm& model) {
  std::vector<Spectrum> out;
  for (auto&& [name, map] : model.state_transition_maps()) {
    if (map->out_dim() != map->in_dim()) continue;
    out.push_back({name, map->eigenvalues()});
  }
  return out;
}

void export_eigenvalues(BlockSsm& model, const std::string& csv_path) {
  std::ofstream os(csv_path);
  if (!os) throw std::runtime_error("cannot write " + csv_path);
  os.precision(17);
  os << "map,re,im\n";
  for (const Spectrum& s : state_spectra(model))
    for (const std::complex<double>& z : s.eigenvalues)
      os << s.map << "," << z.real() << "," << z.imag() << "\n";
}

std::vector<GridAxis> grid_axes_from_json(const nlohmann::json& j) {
  const nlohmann::json& axes = j.contains("axes") ? j.at("axes") : j;
  if (!axes.is_object())
    throw std::invalid_argument("grid spec: expected an object of key -> value list");
  std::vector<GridAxis> out;
  for (auto it = axes.begin(); it != axes.end(); ++it) {
    if (!it.value().is_array() || it.value().empty())
      throw std::invalid_argument("grid spec: axis '" + it.key() + "' must be a nonempty array");
    GridAxis a;
    a.key = it.key();
    for (const nlohmann::json& v : it.value()) a.values.push_back(v);
    out.push_back(std::move(a));
  }
  return out;
}

ExperimentConfig apply_knob(const ExperimentConfig& cfg, const std::string& key,
                            const nlohmann::json& value) {
  static const std::set<std::string> model_keys = {
      "class",  "block",      "observer",   "layers",          "nodes",
      "observer_layers", "observer_nodes", "activation", "linmap", "lambda_min",
      "lambda_max", "lookback", "n_x"};
  static const std::set<std::string> weight_keys = {"q_y", "q_reg", "q_dx", "q_con_y",
                                                    "q_con_fu"};
  static const std::set<std::string> top_keys = {
      "system", "lr",        "weight_decay", "horizon",     "stride",   "batch",
      "max_steps", "eval_every", "seed",     "bounds_widen", "fu_limit"};
  nlohmann::json j = to_json(cfg);
  if (model_keys.count(key) != 0)
    j["model"][key] = value;
  else if (weight_keys.count(key) != 0)
    j["weights"][key] = value;
  else if (top_keys.count(key) != 0)
    j[key] = value;
  else
    throw std::invalid_argument("grid axis targets unknown config key '" + key + "'");
  return experiment_config_from_json(j);
}

std::vector<GridEntry> grid_search(const ExperimentConfig& tmpl,
                                   const std::vector<GridAxis>& axes, const Trajectory& traj,
                                   const std::string& out_path) {
  size_t cell_count = 1;
  for (const GridAxis& a : axes) cell_count *= a.values.size();
  if (cell_count > 24)
    throw std::invalid_argument("grid_search: " + std::to_string(cell_count) +
                                " cells exceeds the 24-cell cap");

  // Odometer enumeration, last axis fastest.
  std::vector<GridEntry> entries(cell_count);
  for (size_t cell = 0; cell < cell_count; ++cell) {
    ExperimentConfig cfg = tmpl;
    size_t rem = cell;
    for (size_t ax = axes.size(); ax-- > 0;) {
      const GridAxis& a = axes[ax];
      cfg = apply_knob(cfg, a.key, a.values[rem % a.values.size()]);
      rem /= a.values.size();
    }
    entries[cell].config = cfg;
  }

  // One windowing per distinct (horizon, lookback, stride); built up front
  // so workers only read.
  std::map<std::tuple<int, int, int>, std::shared_ptr<DataSplits>> splits;
  auto key_of = [](const ExperimentConfig& c) {
    return std::make_tuple(c.horizon, c.model.lookback, c.stride);
  };
  for (const GridEntry& e : entries)
    if (splits.count(key_of(e.config)) == 0)
      splits[key_of(e.config)] = std::make_shared<DataSplits>(prepare_splits(e.config, traj));

  run_tasks(static_cast<int>(entries.size()), [&](int i) {
    entries[i].result = train(entries[i].config, *splits.at(key_of(entries[i].config))).result;
  });

  std::stable_sort(entries.begin(), entries.end(), [](const GridEntry& a, const GridEntry& b) {
    return a.result.open_loop_mse_dev < b.result.open_loop_mse_dev;
  });

  if (!out_path.empty()) {
    nlohmann::json board = nlohmann::json::array();
    for (size_t i = 0; i < entries.size(); ++i) {
      nlohmann::json row = to_json(entries[i].result);
      row["rank"] = i + 1;
      row["config"] = to_json(entries[i].config);
      row.erase("spectra");
      board.push_back(std::move(row));
    }
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    os << board.dump(2) << "\n";
  }
  return entries;
}

}  // namespace nssm
