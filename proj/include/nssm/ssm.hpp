#pragma once

// State-space model assembly: six model classes differing in which of
// f_x, f_u, f_y are bare linear maps and which are neural blocks, a learned
// observer producing x_0 from output history, and N-step open-loop rollout.
//
//   structured:   x_{t+1} = f_x(x_t) + f_u(u_t)
//   unstructured: x_{t+1} = f_xu([x_t; u_t])
//   always:       y^_{t+1} = f_y(x_{t+1}),  x_0 = f_o(y_{1-Np} ... y_0)

#include <complex>
#include <json.hpp>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nssm/blocks.hpp"
#include "nssm/systems.hpp"

namespace nssm {

enum class ModelClass {
  Unstructured,
  BlockNonlinear,
  Hammerstein,
  HammersteinWiener,
  Wiener,
  Linear,
};

ModelClass model_class_from_string(const std::string& s);
std::string to_string(ModelClass c);

// Which components are bare linear maps for each class. Unstructured has a
// joint f_xu block instead of f_x/f_u and a block f_y.
bool fx_linear(ModelClass c);
bool fu_linear(ModelClass c);
bool fy_linear(ModelClass c);

struct ModelConfig {
  ModelClass model_class = ModelClass::BlockNonlinear;
  int n_u = 1;
  int n_y = 1;
  int n_x = 0;       // 0: defaults to n_y
  int lookback = 1;  // history length consumed by the observer

  BlockKind block_kind = BlockKind::ResMlp;
  int layers = 2;
  int nodes = 20;
  ActivationKind activation = ActivationKind::Gelu;
  LinmapKind linmap = LinmapKind::Dense;
  SpectralBounds bounds{0.0, 1.0};

  BlockKind observer_kind = BlockKind::ResMlp;
  int observer_layers = 0;  // 0: same as layers
  int observer_nodes = 0;   // 0: same as nodes

  int state_dim() const { return n_x > 0 ? n_x : n_y; }
};

ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& cfg);

// A model component: either a neural block or a bare linear map (the
// Table I "linear" case, weight only, no bias).
class Component {
 public:
  explicit Component(std::unique_ptr<Block> b);
  Component(std::unique_ptr<LinearMap> m, std::string name);

  bool is_block() const { return block_ != nullptr; }
  int in_dim() const;
  int out_dim() const;

  Val forward(Tape& t, Val x);
  void reset_state();

  std::vector<Param*> params();
  std::vector<Param*> beta_params();
  bool has_reg() const;
  Val reg_penalty(Tape& t);
  std::vector<std::pair<std::string, LinearMap*>> named_maps();

  Block* block() { return block_.get(); }
  LinearMap* map() { return map_.get(); }

 private:
  std::unique_ptr<Block> block_;
  std::unique_ptr<LinearMap> map_;
  std::string name_;
};

struct Rollout {
  std::vector<Val> states;            // x_1 .. x_N, each n_x x B
  std::vector<Val> predictions;       // y^_1 .. y^_N, each n_y x B
  std::vector<Val> fu_contributions;  // f_u(u_t) per step; empty for unstructured
};

struct OpenLoopResult {
  double mse = 0.0;   // mean over every predicted step and channel
  Matrix per_output;  // n_y x 1 per-channel MSE
  Matrix trajectory;  // (T - lookback) x n_y predictions
};

class BlockSsm {
 public:
  BlockSsm(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  ModelClass model_class() const { return cfg_.model_class; }
  int n_x() const { return cfg_.state_dim(); }
  int n_u() const { return cfg_.n_u; }
  int n_y() const { return cfg_.n_y; }
  int lookback() const { return cfg_.lookback; }

  // Drops recurrent hidden state in every component; rollout calls it.
  void reset_state();

  // y_history: exactly lookback entries, oldest first, each n_y x B.
  Val observe_initial_state(Tape& t, const std::vector<Val>& y_history);

  std::pair<Val, Val> step(Tape& t, Val x, Val u);

  Rollout rollout(Tape& t, const std::vector<Val>& y_history,
                  const std::vector<Val>& u_future);

  // Single rollout across the whole split from its first observation
  // window; MSE in the split's (normalized) units.
  OpenLoopResult open_loop_eval(const SplitData& split);

  std::vector<Param*> params();
  std::vector<Param*> beta_params();
  bool has_reg() const;
  Val reg_penalty(Tape& t);

  // Maps inside the state transition (f_x or f_xu), recurrent maps included;
  // the eigenvalue export reads these.
  std::vector<std::pair<std::string, LinearMap*>> state_transition_maps();
  std::vector<std::pair<std::string, LinearMap*>> all_named_maps();

  Component* f_x() { return f_x_.get(); }
  Component* f_u() { return f_u_.get(); }
  Component* f_xu() { return f_xu_.get(); }
  Component* f_y() { return f_y_.get(); }
  Block* f_o() { return f_o_.get(); }

 private:
  std::tuple<Val, Val, Val> step_impl(Tape& t, Val x, Val u);

  ModelConfig cfg_;
  std::unique_ptr<Component> f_x_, f_u_, f_xu_, f_y_;
  std::unique_ptr<Block> f_o_;
};

// Checkpoint: <prefix>.json manifest + <prefix>.bin raw doubles in params()
// declaration order, version-tagged.
void save_checkpoint(BlockSsm& model, const std::string& prefix);
std::unique_ptr<BlockSsm> load_checkpoint(const std::string& prefix);

}  // namespace nssm
