#pragma once

// Neural building blocks. One concrete Block class covers the three
// architectures; columns of the input matrix are independent batch samples.
//
//   mlp:  h_k = g(W_k h_{k-1} + b_k)
//   rmlp: h_k = g(W_k h_{k-1} + b_k + h_{k-1})   shortcut from layer 2 on,
//         added only where widths match (a projection end layer is plain)
//   rnn:  h_k(t) = g(W_k h_{k-1}(t) + R_k h_k(t-1) + b_k), zero initial state
//
// g applies on every layer. BLU carries one trainable slope per layer,
// clamped to [-1,1] by the optimizer's projection step.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nssm/diffcore.hpp"
#include "nssm/linmaps.hpp"
#include "nssm/rng.hpp"

namespace nssm {

enum class ActivationKind { Identity, Relu, Gelu, Blu };
enum class BlockKind { Mlp, ResMlp, Rnn };

ActivationKind activation_from_string(const std::string& s);
std::string to_string(ActivationKind a);
BlockKind block_kind_from_string(const std::string& s);
std::string to_string(BlockKind k);

struct BlockConfig {
  int layers = 1;
  int nodes = 1;
  ActivationKind activation = ActivationKind::Identity;
  LinmapKind linmap = LinmapKind::Dense;
  SpectralBounds bounds{};
};

class Block {
 public:
  Block(BlockKind kind, int in, int out, const BlockConfig& cfg, Rng& rng,
        std::string name = "block");

  BlockKind kind() const { return kind_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  bool recurrent() const { return kind_ == BlockKind::Rnn; }

  // Drops any recurrent hidden state; call between rollouts. State is also
  // invalidated automatically when a different tape is used.
  void reset_state();

  Val forward(Tape& t, Val x);
  std::vector<Val> forward_sequence(Tape& t, const std::vector<Val>& xs);

  std::vector<Param*> params();
  std::vector<Param*> beta_params();
  bool has_reg() const;
  Val reg_penalty(Tape& t);
  // (label, map) pairs for spectrum export; includes recurrent maps.
  std::vector<std::pair<std::string, LinearMap*>> named_maps();

 private:
  struct Layer {
    std::unique_ptr<LinearMap> map;
    Param bias;
    Param beta;                       // BLU slope
    std::unique_ptr<LinearMap> rec;   // rnn only
  };

  Val activate(Tape& t, Val z, Layer& l);

  BlockKind kind_;
  int in_dim_;
  int out_dim_;
  ActivationKind act_;
  std::string name_;
  std::vector<Layer> layers_;

  std::vector<Val> prev_;    // rnn: per-layer outputs from the previous step
  uint64_t state_gen_ = 0;
};

}  // namespace nssm
