#include "nssm/objective.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nssm {

namespace {

void require_vector_pair(const Matrix& lo, const Matrix& hi, const char* what) {
  if (lo.cols() != 1 || hi.cols() != 1 || !lo.same_shape(hi))
    throw ShapeError(std::string(what) + ": bounds must be equal-length column vectors");
  for (int i = 0; i < lo.rows(); ++i)
    if (!(lo(i, 0) < hi(i, 0)))
      throw std::invalid_argument(std::string(what) + ": lower must be < upper elementwise");
}

// Total slack mass of `vals` outside [lo, hi], plus the element count.
std::pair<Val, int64_t> slack_sum(Tape& t, const std::vector<Val>& vals, const Matrix& lo,
                                  const Matrix& hi) {
  Matrix neg_hi(hi.rows(), 1), pos_lo = lo;
  for (int i = 0; i < hi.rows(); ++i) neg_hi(i, 0) = -hi(i, 0);
  Val acc = t.constant_scalar(0.0);
  int64_t count = 0;
  for (Val v : vals) {
    if (v.rows() != lo.rows())
      throw ShapeError("constraint: values have " + std::to_string(v.rows()) +
                       " channels, bounds have " + std::to_string(lo.rows()));
    Val over = t.relu(t.add_col(v, t.constant(neg_hi)));           // max(0, v - hi)
    Val under = t.relu(t.add_col(t.scale(v, -1.0), t.constant(pos_lo)));  // max(0, lo - v)
    acc = t.add(acc, t.add(t.sum(over), t.sum(under)));
    count += static_cast<int64_t>(v.rows()) * v.cols();
  }
  return {acc, count};
}

}  // namespace

Bounds::Bounds(Matrix y_lo, Matrix y_hi, Matrix fu_lo, Matrix fu_hi)
    : y_lower(std::move(y_lo)), y_upper(std::move(y_hi)), fu_lower(std::move(fu_lo)),
      fu_upper(std::move(fu_hi)) {
  require_vector_pair(y_lower, y_upper, "y bounds");
  require_vector_pair(fu_lower, fu_upper, "fu bounds");
}

Bounds make_default_bounds(const Matrix& y_min, const Matrix& y_max, int n_x, double widen,
                           double fu_limit) {
  if (y_min.cols() != 1 || !y_min.same_shape(y_max))
    throw ShapeError("make_default_bounds: channel extrema must be column vectors");
  const int n_y = y_min.rows();
  Matrix lo(n_y, 1), hi(n_y, 1);
  for (int i = 0; i < n_y; ++i) {
    const double range = std::max(y_max(i, 0) - y_min(i, 0), 1e-6);
    lo(i, 0) = y_min(i, 0) - widen * range;
    hi(i, 0) = y_max(i, 0) + widen * range;
  }
  return Bounds(lo, hi, Matrix::constant(n_x, 1, -fu_limit), Matrix::constant(n_x, 1, fu_limit));
}

std::string LossReport::to_jsonl() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"step\":" << step << ",\"L_y\":" << loss_y << ",\"L_reg\":" << loss_reg
     << ",\"L_dx\":" << loss_dx << ",\"L_con_y\":" << loss_con_y
     << ",\"L_con_fu\":" << loss_con_fu << ",\"total\":" << total << "}";
  return os.str();
}

Val loss_y(Tape& t, const std::vector<Val>& predictions, const std::vector<Val>& targets) {
  if (predictions.empty() || predictions.size() != targets.size())
    throw ShapeError("loss_y: prediction/target step counts differ");
  Val acc = t.constant_scalar(0.0);
  int64_t count = 0;
  for (size_t s = 0; s < predictions.size(); ++s) {
    const Matrix& p = predictions[s].value();
    const Matrix& y = targets[s].value();
    if (!p.same_shape(y))
      throw ShapeError("loss_y: step " + std::to_string(s) + " shapes " + p.shape_str() +
                       " vs " + y.shape_str());
    Val e = t.sub(predictions[s], targets[s]);
    acc = t.add(acc, t.sum(t.hadamard(e, e)));
    count += static_cast<int64_t>(p.rows()) * p.cols();
  }
  return t.scale(acc, 1.0 / static_cast<double>(count));
}

Val con_y(Tape& t, const std::vector<Val>& predictions, const Bounds& b) {
  if (predictions.empty()) throw std::invalid_argument("con_y: no predictions");
  auto [acc, count] = slack_sum(t, predictions, b.y_lower, b.y_upper);
  return t.scale(acc, 1.0 / static_cast<double>(count));
}

Val con_fu(Tape& t, const std::vector<Val>& fu_contributions, const Bounds& b) {
  if (fu_contributions.empty())
    throw std::invalid_argument(
        "con_fu: no input contributions (unstructured models have no f_u term)");
  auto [acc, count] = slack_sum(t, fu_contributions, b.fu_lower, b.fu_upper);
  return t.scale(acc, 1.0 / static_cast<double>(count));
}

Val loss_dx(Tape& t, const std::vector<Val>& states) {
  if (states.size() < 2) throw std::invalid_argument("loss_dx: needs at least two states");
  Val acc = t.constant_scalar(0.0);
  int64_t count = 0;
  for (size_t s = 0; s + 1 < states.size(); ++s) {
    Val d = t.sub(states[s], states[s + 1]);
    acc = t.add(acc, t.sum(t.hadamard(d, d)));
    count += static_cast<int64_t>(states[s].rows()) * states[s].cols();
  }
  return t.scale(acc, 1.0 / static_cast<double>(count));
}

Val total_loss(Tape& t, const LossTerms& terms, const LossWeights& w, LossReport& report) {
  Val total = t.constant_scalar(0.0);
  auto take = [&](Val v, double q, double& slot) {
    if (!v.valid()) {
      slot = 0.0;
      return;
    }
    slot = v.scalar();
    total = t.add(total, t.scale(v, q));
  };
  take(terms.y, w.q_y, report.loss_y);
  take(terms.reg, w.q_reg, report.loss_reg);
  take(terms.dx, w.q_dx, report.loss_dx);
  take(terms.con_y, w.q_con_y, report.loss_con_y);
  take(terms.con_fu, w.q_con_fu, report.loss_con_fu);
  report.total = total.scalar();
  return total;
}

AdamW::AdamW(std::vector<Param*> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  slots_.reserve(params_.size());
  for (Param* p : params_)
    slots_.push_back({Matrix(p->value.rows(), p->value.cols()),
                      Matrix(p->value.rows(), p->value.cols())});
}

void AdamW::step() {
  for (Param* p : params_)
    if (!p->grad.all_finite())
      throw NumericError("adamw: non-finite gradient in '" + p->name + "', step aborted");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Slot& s = slots_[i];
    for (size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data()[k];
      double& m = s.m.data()[k];
      double& v = s.v.data()[k];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      double& th = p.value.data()[k];
      th -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * th);
    }
  }
}

void AdamW::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

void clamp_values(const std::vector<Param*>& params, double lo, double hi) {
  for (Param* p : params)
    for (size_t k = 0; k < p->value.size(); ++k) {
      double& v = p->value.data()[k];
      if (v < lo) v = lo;
      if (v > hi) v = hi;
    }
}

}  // namespace nssm
