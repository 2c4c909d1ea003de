#pragma once

// Loss terms, constraint penalties, and the AdamW optimizer. All losses are
// means over every element involved (batch columns, rollout steps, channels)
// so magnitudes are invariant to horizon and batch size.

#include <string>
#include <vector>

#include "nssm/diffcore.hpp"

namespace nssm {

struct Bounds {
  Matrix y_lower, y_upper;    // n_y x 1
  Matrix fu_lower, fu_upper;  // n_x x 1

  Bounds() = default;
  Bounds(Matrix y_lo, Matrix y_hi, Matrix fu_lo, Matrix fu_hi);
};

// Training-split channel ranges widened by `widen` of the range on each
// side; f_u influence bounds symmetric +-fu_limit on the normalized scale.
Bounds make_default_bounds(const Matrix& y_min, const Matrix& y_max, int n_x,
                           double widen = 0.05, double fu_limit = 1.0);

struct LossWeights {
  double q_y = 1.0;
  double q_reg = 0.0;
  double q_dx = 0.0;
  double q_con_y = 0.0;
  double q_con_fu = 0.0;
};

struct LossReport {
  int64_t step = 0;
  double loss_y = 0.0;
  double loss_reg = 0.0;
  double loss_dx = 0.0;
  double loss_con_y = 0.0;
  double loss_con_fu = 0.0;
  double total = 0.0;

  std::string to_jsonl() const;
};

// Mean squared error over steps x batch x channels.
Val loss_y(Tape& t, const std::vector<Val>& predictions, const std::vector<Val>& targets);

// Mean slack magnitude outside [y_lower, y_upper].
Val con_y(Tape& t, const std::vector<Val>& predictions, const Bounds& b);

// Same slack construction on f_u contributions; rejects an empty list
// (unstructured models have no separate input path - a config error).
Val con_fu(Tape& t, const std::vector<Val>& fu_contributions, const Bounds& b);

// Mean squared difference between successive states; needs N >= 2.
Val loss_dx(Tape& t, const std::vector<Val>& states);

struct LossTerms {
  Val y{};
  Val reg{};
  Val dx{};
  Val con_y{};
  Val con_fu{};
};

// Weighted sum of whichever terms are present (invalid Vals count as zero);
// fills `report` with the detached per-term values.
Val total_loss(Tape& t, const LossTerms& terms, const LossWeights& w, LossReport& report);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay: theta -= lr * (mhat/(sqrt(vhat)+eps) + wd*theta).
class AdamW {
 public:
  AdamW(std::vector<Param*> params, AdamWConfig cfg);

  // Consumes current grads. Throws NumericError on non-finite gradients
  // before touching any parameter.
  void step();
  void zero_grad();
  int64_t step_count() const { return t_; }

 private:
  struct Slot {
    Matrix m, v;
  };
  std::vector<Param*> params_;
  std::vector<Slot> slots_;
  AdamWConfig cfg_;
  int64_t t_ = 0;
};

// Post-step projection (BLU slopes live in [-1, 1]).
void clamp_values(const std::vector<Param*>& params, double lo, double hi);

}  // namespace nssm
