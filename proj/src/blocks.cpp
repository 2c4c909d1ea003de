#include "nssm/blocks.hpp"

#include <stdexcept>

namespace nssm {

ActivationKind activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return ActivationKind::Identity;
  if (s == "relu") return ActivationKind::Relu;
  if (s == "gelu") return ActivationKind::Gelu;
  if (s == "blu") return ActivationKind::Blu;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(ActivationKind a) {
  switch (a) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Gelu: return "gelu";
    case ActivationKind::Blu: return "blu";
  }
  return "?";
}

BlockKind block_kind_from_string(const std::string& s) {
  if (s == "mlp") return BlockKind::Mlp;
  if (s == "rmlp" || s == "residual_mlp") return BlockKind::ResMlp;
  if (s == "rnn") return BlockKind::Rnn;
  throw std::invalid_argument("unknown block kind: " + s);
}

std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::Mlp: return "mlp";
    case BlockKind::ResMlp: return "rmlp";
    case BlockKind::Rnn: return "rnn";
  }
  return "?";
}

Block::Block(BlockKind kind, int in, int out, const BlockConfig& cfg, Rng& rng, std::string name)
    : kind_(kind), in_dim_(in), out_dim_(out), act_(cfg.activation), name_(std::move(name)) {
  if (in < 1 || out < 1) throw std::invalid_argument("Block: dims must be positive");
  if (cfg.layers < 1 || cfg.nodes < 1)
    throw std::invalid_argument("Block: layers and nodes must be positive");
  layers_.reserve(cfg.layers);
  for (int k = 0; k < cfg.layers; ++k) {
    const int wi = (k == 0) ? in : cfg.nodes;
    const int wo = (k == cfg.layers - 1) ? out : cfg.nodes;
    Layer l;
    // The row-sum bound is defined for square matrices only; rectangular
    // entry/exit layers of a row-sum-constrained block stay dense.
    const LinmapKind lk =
        (cfg.linmap == LinmapKind::PerronFrobenius && wo != wi) ? LinmapKind::Dense : cfg.linmap;
    l.map = make_linmap(lk, wo, wi, cfg.bounds, rng);
    l.bias = Param(Matrix(wo, 1), name_ + ".b" + std::to_string(k));
    if (act_ == ActivationKind::Blu)
      l.beta = Param(Matrix(1, 1), name_ + ".beta" + std::to_string(k));
    if (kind_ == BlockKind::Rnn) l.rec = make_linmap(cfg.linmap, wo, wo, cfg.bounds, rng);
    layers_.push_back(std::move(l));
  }
}

void Block::reset_state() {
  prev_.clear();
  state_gen_ = 0;
}

Val Block::activate(Tape& t, Val z, Layer& l) {
  switch (act_) {
    case ActivationKind::Identity:
      return z;
    case ActivationKind::Relu:
      return t.relu(z);
    case ActivationKind::Gelu:
      return t.gelu(z);
    case ActivationKind::Blu: {
      Val bend = t.add_scalar(t.sqrt(t.add_scalar(t.hadamard(z, z), 1.0)), -1.0);
      return t.add(t.scalar_mul(t.param(l.beta), bend), z);
    }
  }
  throw std::logic_error("unreachable activation");
}

Val Block::forward(Tape& t, Val x) {
  if (x.value().rows() != in_dim_)
    throw ShapeError(name_ + ": input has " + std::to_string(x.value().rows()) +
                     " rows, expected " + std::to_string(in_dim_));
  const bool carry = kind_ == BlockKind::Rnn && state_gen_ == t.generation() && !prev_.empty();
  std::vector<Val> outs;
  outs.reserve(layers_.size());
  Val h = x;
  for (size_t k = 0; k < layers_.size(); ++k) {
    Layer& l = layers_[k];
    Val z = l.map->apply(t, h);
    if (carry) z = t.add(z, l.rec->apply(t, prev_[k]));
    z = t.add_col(z, t.param(l.bias));
    if (kind_ == BlockKind::ResMlp && k >= 1 && l.map->in_dim() == l.map->out_dim())
      z = t.add(z, h);
    h = activate(t, z, l);
    outs.push_back(h);
  }
  if (kind_ == BlockKind::Rnn) {
    prev_ = std::move(outs);
    state_gen_ = t.generation();
  }
  return h;
}

std::vector<Val> Block::forward_sequence(Tape& t, const std::vector<Val>& xs) {
  if (xs.empty()) throw std::invalid_argument(name_ + ": empty sequence");
  reset_state();
  std::vector<Val> ys;
  ys.reserve(xs.size());
  for (Val x : xs) ys.push_back(forward(t, x));
  return ys;
}

std::vector<Param*> Block::params() {
  std::vector<Param*> out;
  for (Layer& l : layers_) {
    for (Param* p : l.map->params()) out.push_back(p);
    out.push_back(&l.bias);
    if (act_ == ActivationKind::Blu) out.push_back(&l.beta);
    if (l.rec)
      for (Param* p : l.rec->params()) out.push_back(p);
  }
  return out;
}

std::vector<Param*> Block::beta_params() {
  std::vector<Param*> out;
  if (act_ != ActivationKind::Blu) return out;
  for (Layer& l : layers_) out.push_back(&l.beta);
  return out;
}

bool Block::has_reg() const {
  for (const Layer& l : layers_) {
    if (l.map->has_reg()) return true;
    if (l.rec && l.rec->has_reg()) return true;
  }
  return false;
}

Val Block::reg_penalty(Tape& t) {
  Val s = t.constant_scalar(0.0);
  for (Layer& l : layers_) {
    if (l.map->has_reg()) s = t.add(s, l.map->reg_penalty(t));
    if (l.rec && l.rec->has_reg()) s = t.add(s, l.rec->reg_penalty(t));
  }
  return s;
}

std::vector<std::pair<std::string, LinearMap*>> Block::named_maps() {
  std::vector<std::pair<std::string, LinearMap*>> out;
  for (size_t k = 0; k < layers_.size(); ++k) {
    out.emplace_back(name_ + ".L" + std::to_string(k) + ".w", layers_[k].map.get());
    if (layers_[k].rec)
      out.emplace_back(name_ + ".L" + std::to_string(k) + ".wr", layers_[k].rec.get());
  }
  return out;
}

}  // namespace nssm
