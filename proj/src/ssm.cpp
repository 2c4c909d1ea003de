#include "nssm/ssm.hpp"

#include <fstream>
#include <stdexcept>

namespace nssm {

ModelClass model_class_from_string(const std::string& s) {
  if (s == "unstructured") return ModelClass::Unstructured;
  if (s == "block_nonlinear") return ModelClass::BlockNonlinear;
  if (s == "hammerstein") return ModelClass::Hammerstein;
  if (s == "hammerstein_wiener") return ModelClass::HammersteinWiener;
  if (s == "wiener") return ModelClass::Wiener;
  if (s == "linear") return ModelClass::Linear;
  throw std::invalid_argument("unknown model class: " + s);
}

std::string to_string(ModelClass c) {
  switch (c) {
    case ModelClass::Unstructured: return "unstructured";
    case ModelClass::BlockNonlinear: return "block_nonlinear";
    case ModelClass::Hammerstein: return "hammerstein";
    case ModelClass::HammersteinWiener: return "hammerstein_wiener";
    case ModelClass::Wiener: return "wiener";
    case ModelClass::Linear: return "linear";
  }
  return "?";
}

bool fx_linear(ModelClass c) {
  return c != ModelClass::Unstructured && c != ModelClass::BlockNonlinear;
}

bool fu_linear(ModelClass c) { return c == ModelClass::Wiener || c == ModelClass::Linear; }

bool fy_linear(ModelClass c) {
  return c == ModelClass::BlockNonlinear || c == ModelClass::Hammerstein ||
         c == ModelClass::Linear;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.model_class = model_class_from_string(j.value("class", std::string("block_nonlinear")));
  c.n_u = j.value("n_u", 1);
  c.n_y = j.value("n_y", 1);
  c.n_x = j.value("n_x", 0);
  c.lookback = j.value("lookback", 1);
  c.block_kind = block_kind_from_string(j.value("block", std::string("rmlp")));
  c.layers = j.value("layers", 2);
  c.nodes = j.value("nodes", 20);
  c.activation = activation_from_string(j.value("activation", std::string("gelu")));
  c.linmap = linmap_kind_from_string(j.value("linmap", std::string("dense")));
  c.bounds = SpectralBounds(j.value("lambda_min", 0.0), j.value("lambda_max", 1.0));
  c.observer_kind = block_kind_from_string(j.value("observer", std::string("rmlp")));
  c.observer_layers = j.value("observer_layers", 0);
  c.observer_nodes = j.value("observer_nodes", 0);
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"class", to_string(c.model_class)},
                        {"n_u", c.n_u},
                        {"n_y", c.n_y},
                        {"n_x", c.n_x},
                        {"lookback", c.lookback},
                        {"block", to_string(c.block_kind)},
                        {"layers", c.layers},
                        {"nodes", c.nodes},
                        {"activation", to_string(c.activation)},
                        {"linmap", to_string(c.linmap)},
                        {"lambda_min", c.bounds.lambda_min},
                        {"lambda_max", c.bounds.lambda_max},
                        {"observer", to_string(c.observer_kind)},
                        {"observer_layers", c.observer_layers},
                        {"observer_nodes", c.observer_nodes}};
}

Component::Component(std::unique_ptr<Block> b) : block_(std::move(b)) {}

Component::Component(std::unique_ptr<LinearMap> m, std::string name)
    : map_(std::move(m)), name_(std::move(name)) {}

int Component::in_dim() const { return block_ ? block_->in_dim() : map_->in_dim(); }

int Component::out_dim() const { return block_ ? block_->out_dim() : map_->out_dim(); }

Val Component::forward(Tape& t, Val x) {
  return block_ ? block_->forward(t, x) : map_->apply(t, x);
}

void Component::reset_state() {
  if (block_) block_->reset_state();
}

std::vector<Param*> Component::params() {
  return block_ ? block_->params() : map_->params();
}

std::vector<Param*> Component::beta_params() {
  return block_ ? block_->beta_params() : std::vector<Param*>{};
}

bool Component::has_reg() const { return block_ ? block_->has_reg() : map_->has_reg(); }

Val Component::reg_penalty(Tape& t) {
  return block_ ? block_->reg_penalty(t) : map_->reg_penalty(t);
}

std::vector<std::pair<std::string, LinearMap*>> Component::named_maps() {
  if (block_) return block_->named_maps();
  return {{name_, map_.get()}};
}

namespace {

// Bare linear components keep the configured parametrization where the shape
// allows; the row-sum bound needs a square matrix, so rectangular input and
// output maps fall back to dense.
std::unique_ptr<LinearMap> bare_map(LinmapKind kind, int out, int in, SpectralBounds bounds,
                                    Rng& rng) {
  if (kind == LinmapKind::PerronFrobenius && out != in)
    return make_linmap(LinmapKind::Dense, out, in, bounds, rng);
  return make_linmap(kind, out, in, bounds, rng);
}

std::unique_ptr<Component> make_component(bool linear, BlockKind kind, int in, int out,
                                          const BlockConfig& bc, SpectralBounds bounds, Rng& rng,
                                          const std::string& name) {
  if (linear) return std::make_unique<Component>(bare_map(bc.linmap, out, in, bounds, rng), name);
  return std::make_unique<Component>(std::make_unique<Block>(kind, in, out, bc, rng, name));
}

}  // namespace

BlockSsm::BlockSsm(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.n_u < 1 || cfg.n_y < 1) throw std::invalid_argument("BlockSsm: dims must be positive");
  if (cfg.lookback < 1) throw std::invalid_argument("BlockSsm: lookback must be positive");
  const int nx = cfg.state_dim();

  BlockConfig bc;
  bc.layers = cfg.layers;
  bc.nodes = cfg.nodes;
  bc.activation = cfg.activation;
  bc.linmap = cfg.linmap;
  bc.bounds = cfg.bounds;

  if (cfg.model_class == ModelClass::Unstructured) {
    f_xu_ = make_component(false, cfg.block_kind, nx + cfg.n_u, nx, bc, cfg.bounds, rng, "f_xu");
  } else {
    f_x_ = make_component(fx_linear(cfg.model_class), cfg.block_kind, nx, nx, bc, cfg.bounds,
                          rng, "f_x");
    f_u_ = make_component(fu_linear(cfg.model_class), cfg.block_kind, cfg.n_u, nx, bc,
                          cfg.bounds, rng, "f_u");
  }
  const bool fy_lin = cfg.model_class == ModelClass::Unstructured
                          ? false
                          : fy_linear(cfg.model_class);
  f_y_ = make_component(fy_lin, cfg.block_kind, nx, cfg.n_y, bc, cfg.bounds, rng, "f_y");

  BlockConfig oc = bc;
  if (cfg.observer_layers > 0) oc.layers = cfg.observer_layers;
  if (cfg.observer_nodes > 0) oc.nodes = cfg.observer_nodes;
  const int obs_in = cfg.observer_kind == BlockKind::Rnn ? cfg.n_y : cfg.lookback * cfg.n_y;
  f_o_ = std::make_unique<Block>(cfg.observer_kind, obs_in, nx, oc, rng, "f_o");
}

void BlockSsm::reset_state() {
  if (f_x_) f_x_->reset_state();
  if (f_u_) f_u_->reset_state();
  if (f_xu_) f_xu_->reset_state();
  f_y_->reset_state();
  f_o_->reset_state();
}

Val BlockSsm::observe_initial_state(Tape& t, const std::vector<Val>& y_history) {
  if (static_cast<int>(y_history.size()) != cfg_.lookback)
    throw std::invalid_argument("observe_initial_state: expected " +
                                std::to_string(cfg_.lookback) + " history entries, got " +
                                std::to_string(y_history.size()));
  for (const Val& v : y_history)
    if (v.rows() != cfg_.n_y)
      throw ShapeError("observe_initial_state: history entry has " + std::to_string(v.rows()) +
                       " rows, expected " + std::to_string(cfg_.n_y));
  if (cfg_.observer_kind == BlockKind::Rnn) return f_o_->forward_sequence(t, y_history).back();
  return f_o_->forward(t, y_history.size() == 1 ? y_history.front() : t.concat_rows(y_history));
}

std::tuple<Val, Val, Val> BlockSsm::step_impl(Tape& t, Val x, Val u) {
  Val x_next, fu{};
  if (cfg_.model_class == ModelClass::Unstructured) {
    x_next = f_xu_->forward(t, t.concat_rows({x, u}));
  } else {
    Val fx = f_x_->forward(t, x);
    fu = f_u_->forward(t, u);
    x_next = t.add(fx, fu);
  }
  Val y = f_y_->forward(t, x_next);
  return {x_next, y, fu};
}

std::pair<Val, Val> BlockSsm::step(Tape& t, Val x, Val u) {
  if (x.rows() != n_x()) throw ShapeError("step: state has " + std::to_string(x.rows()) +
                                          " rows, expected " + std::to_string(n_x()));
  if (u.rows() != cfg_.n_u) throw ShapeError("step: input has " + std::to_string(u.rows()) +
                                             " rows, expected " + std::to_string(cfg_.n_u));
  if (x.cols() != u.cols()) throw ShapeError("step: state and input batch sizes differ");
  auto [xn, y, fu] = step_impl(t, x, u);
  return {xn, y};
}

Rollout BlockSsm::rollout(Tape& t, const std::vector<Val>& y_history,
                          const std::vector<Val>& u_future) {
  if (u_future.empty()) throw std::invalid_argument("rollout: need at least one input step");
  reset_state();
  Val x = observe_initial_state(t, y_history);
  Rollout r;
  r.states.reserve(u_future.size());
  r.predictions.reserve(u_future.size());
  for (const Val& u : u_future) {
    auto [xn, y, fu] = step_impl(t, x, u);
    r.states.push_back(xn);
    r.predictions.push_back(y);
    if (fu.valid()) r.fu_contributions.push_back(fu);
    x = xn;
  }
  return r;
}

OpenLoopResult BlockSsm::open_loop_eval(const SplitData& split) {
  const Matrix& u = split.u;
  const Matrix& y = split.y;
  const int T = y.rows();
  const int np = cfg_.lookback;
  if (u.rows() != T) throw ShapeError("open_loop_eval: input/output lengths differ");
  if (T <= np)
    throw std::invalid_argument("open_loop_eval: split of length " + std::to_string(T) +
                                " is no longer than the lookback " + std::to_string(np));
  Tape t;
  auto row_val = [&t](const Matrix& m, int r) {
    Matrix col(m.cols(), 1);
    for (int j = 0; j < m.cols(); ++j) col(j, 0) = m(r, j);
    return t.constant(col);
  };
  std::vector<Val> hist;
  hist.reserve(np);
  for (int r = 0; r < np; ++r) hist.push_back(row_val(y, r));
  std::vector<Val> us;
  us.reserve(T - np);
  for (int r = np; r < T; ++r) us.push_back(row_val(u, r));

  Rollout ro = rollout(t, hist, us);

  OpenLoopResult res;
  res.per_output = Matrix(cfg_.n_y, 1);
  res.trajectory = Matrix(T - np, cfg_.n_y);
  for (int k = 0; k < T - np; ++k) {
    const Matrix& pred = ro.predictions[k].value();
    for (int j = 0; j < cfg_.n_y; ++j) {
      const double e = pred(j, 0) - y(np + k, j);
      res.per_output(j, 0) += e * e;
      res.trajectory(k, j) = pred(j, 0);
    }
  }
  double total = 0.0;
  for (int j = 0; j < cfg_.n_y; ++j) {
    total += res.per_output(j, 0);
    res.per_output(j, 0) /= T - np;
  }
  res.mse = total / (static_cast<double>(T - np) * cfg_.n_y);
  return res;
}

std::vector<Param*> BlockSsm::params() {
  std::vector<Param*> out;
  auto take = [&out](std::vector<Param*> v) { out.insert(out.end(), v.begin(), v.end()); };
  if (f_xu_) take(f_xu_->params());
  if (f_x_) take(f_x_->params());
  if (f_u_) take(f_u_->params());
  take(f_y_->params());
  take(f_o_->params());
  return out;
}

std::vector<Param*> BlockSsm::beta_params() {
  std::vector<Param*> out;
  auto take = [&out](std::vector<Param*> v) { out.insert(out.end(), v.begin(), v.end()); };
  if (f_xu_) take(f_xu_->beta_params());
  if (f_x_) take(f_x_->beta_params());
  if (f_u_) take(f_u_->beta_params());
  take(f_y_->beta_params());
  take(f_o_->beta_params());
  return out;
}

bool BlockSsm::has_reg() const {
  bool reg = f_y_->has_reg() || f_o_->has_reg();
  if (f_xu_) reg = reg || f_xu_->has_reg();
  if (f_x_) reg = reg || f_x_->has_reg();
  if (f_u_) reg = reg || f_u_->has_reg();
  return reg;
}

Val BlockSsm::reg_penalty(Tape& t) {
  Val sum = t.constant_scalar(0.0);
  auto add = [&](Component& c) {
    if (c.has_reg()) sum = t.add(sum, c.reg_penalty(t));
  };
  if (f_xu_) add(*f_xu_);
  if (f_x_) add(*f_x_);
  if (f_u_) add(*f_u_);
  add(*f_y_);
  if (f_o_->has_reg()) sum = t.add(sum, f_o_->reg_penalty(t));
  return sum;
}

std::vector<std::pair<std::string, LinearMap*>> BlockSsm::state_transition_maps() {
  return f_xu_ ? f_xu_->named_maps() : f_x_->named_maps();
}

std::vector<std::pair<std::string, LinearMap*>> BlockSsm::all_named_maps() {
  std::vector<std::pair<std::string, LinearMap*>> out;
  auto take = [&out](std::vector<std::pair<std::string, LinearMap*>> v) {
    out.insert(out.end(), v.begin(), v.end());
  };
  if (f_xu_) take(f_xu_->named_maps());
  if (f_x_) take(f_x_->named_maps());
  if (f_u_) take(f_u_->named_maps());
  take(f_y_->named_maps());
  take(f_o_->named_maps());
  return out;
}

void save_checkpoint(BlockSsm& model, const std::string& prefix) {
  std::vector<Param*> ps = model.params();
  size_t count = 0;
  for (Param* p : ps) count += p->value.size();

  nlohmann::json manifest{{"format", "nssm-checkpoint"},
                          {"version", 1},
                          {"model", to_json(model.config())},
                          {"param_count", count}};
  std::ofstream mj(prefix + ".json");
  if (!mj) throw std::runtime_error("cannot write " + prefix + ".json");
  mj << manifest.dump(2) << "\n";

  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + prefix + ".bin");
  for (Param* p : ps)
    bin.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
}

std::unique_ptr<BlockSsm> load_checkpoint(const std::string& prefix) {
  std::ifstream mj(prefix + ".json");
  if (!mj) throw std::runtime_error("cannot read " + prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(mj);
  if (manifest.value("format", std::string()) != "nssm-checkpoint")
    throw std::runtime_error(prefix + ".json: not a checkpoint manifest");
  if (manifest.value("version", 0) != 1)
    throw std::runtime_error(prefix + ".json: unsupported checkpoint version");

  Rng rng(1);  // initialization is overwritten below
  auto model = std::make_unique<BlockSsm>(model_config_from_json(manifest.at("model")), rng);

  std::vector<Param*> ps = model->params();
  size_t count = 0;
  for (Param* p : ps) count += p->value.size();
  if (manifest.value("param_count", size_t{0}) != count)
    throw std::runtime_error(prefix + ".json: parameter count does not match the model");

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + prefix + ".bin");
  for (Param* p : ps) {
    bin.read(reinterpret_cast<char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!bin) throw std::runtime_error(prefix + ".bin: truncated parameter data");
  }
  char extra;
  if (bin.read(&extra, 1)) throw std::runtime_error(prefix + ".bin: trailing data");
  for (Param* p : ps)
    if (!p->value.all_finite())
      throw NumericError(prefix + ".bin: non-finite parameter " + p->name);
  return model;
}

}  // namespace nssm
