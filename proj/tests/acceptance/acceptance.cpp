// Acceptance gate. Each criterion prints exactly one PASS/FAIL line with its
// measured numbers; the process exits nonzero if any criterion fails.
// Tolerances live next to the checks that use them. Criteria can be run
// selectively by passing their numbers as arguments.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nssm/harness.hpp"
#include "nssm/linmaps.hpp"
#include "nssm/objective.hpp"
#include "nssm/ssm.hpp"
#include "nssm/systems.hpp"
#include "support/linear_system.hpp"
#include "support/oracles.hpp"

using namespace nssm;
using nssm::testing::jacobi_singular_values;
using nssm::testing::linear_system_trajectory;
using nssm::testing::orthogonality_error;
using nssm::testing::power_iteration_dominant;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------- criterion 1

// Every block kind x linmap kind x activation x loss term, gradients against
// central finite differences. The FD probes share one forward per evaluation
// point: a single rollout yields all five term values.
//
// Relu and the constraint slacks are piecewise linear, so a probe can
// straddle a kink where the central quotient is biased. For convex kinks the
// bias is bounded by half the second difference |f(x+h)+f(x-h)-2f(x)|, which
// is O(h) at a straddle and O(h^2) on smooth ground, so a discrepancy is
// excused only when measured FD curvature fully accounts for it. A wrong
// analytic gradient at a kink-free point cannot hide behind this bound, and
// the excused fraction is capped.
Outcome criterion1() {
  const auto t0 = Clock::now();
  constexpr double kH = 1e-5;
  constexpr double kRelTol = 1e-4;
  constexpr double kDenomFloor = 1e-8;
  constexpr int kSeeds = 20;
  constexpr uint64_t kSeedBase = 4200;

  const std::vector<std::pair<BlockKind, int>> blocks = {
      {BlockKind::Mlp, 2}, {BlockKind::ResMlp, 3}, {BlockKind::Rnn, 1}};
  const std::vector<LinmapKind> linmaps = {LinmapKind::Dense, LinmapKind::PerronFrobenius,
                                           LinmapKind::SoftSvd, LinmapKind::Spectral};
  const std::vector<ActivationKind> acts = {ActivationKind::Identity, ActivationKind::Relu,
                                            ActivationKind::Gelu, ActivationKind::Blu};

  const int N = 3, B = 2;
  long entries = 0, skipped = 0, combos = 0;
  long con_y_active = 0, con_fu_active = 0, reg_checked = 0;
  double max_rel = 0.0;
  std::string worst;

  for (const auto& [bk, layers] : blocks) {
    for (LinmapKind lk : linmaps) {
      for (ActivationKind ak : acts) {
        for (int s = 0; s < kSeeds; ++s) {
          ++combos;
          Rng rng(kSeedBase + 97 * combos + s);
          ModelConfig mc;
          mc.model_class = ModelClass::HammersteinWiener;
          mc.n_u = 2;
          mc.n_y = 2;
          mc.n_x = 3;
          mc.lookback = 3;  // rnn observers consume a length-3 sequence
          mc.block_kind = bk;
          mc.layers = layers;
          mc.nodes = 4;
          mc.activation = ak;
          mc.linmap = lk;
          mc.bounds = SpectralBounds(0.3, 0.9);
          mc.observer_kind = bk;
          BlockSsm model(mc, rng);
          // Generic parameter point: orthogonal/symmetric inits sit at
          // stationary points of some terms, where every gradient is zero.
          for (Param* p : model.params())
            for (size_t k = 0; k < p->value.size(); ++k)
              p->value.data()[k] += rng.uniform(-0.1, 0.1);

          std::vector<Matrix> hist, u_future, targets;
          for (int i = 0; i < mc.lookback; ++i)
            hist.push_back(rng.uniform_matrix(mc.n_y, B, -1.0, 1.0));
          for (int i = 0; i < N; ++i) {
            u_future.push_back(rng.uniform_matrix(mc.n_u, B, -1.0, 1.0));
            targets.push_back(rng.uniform_matrix(mc.n_y, B, -1.0, 1.0));
          }
          // Bounds tight enough that the slack terms are active at a random
          // parameter point; a slack that never activates has no gradient to
          // check.
          const Bounds b(Matrix::constant(mc.n_y, 1, -0.005), Matrix::constant(mc.n_y, 1, 0.005),
                         Matrix::constant(mc.n_x, 1, -0.005), Matrix::constant(mc.n_x, 1, 0.005));

          auto build_terms = [&](Tape& t) -> std::array<Val, 5> {
            std::vector<Val> h, uf, yt;
            for (const Matrix& m : hist) h.push_back(t.constant(m));
            for (const Matrix& m : u_future) uf.push_back(t.constant(m));
            for (const Matrix& m : targets) yt.push_back(t.constant(m));
            Rollout ro = model.rollout(t, h, uf);
            std::array<Val, 5> out{};
            out[0] = loss_y(t, ro.predictions, yt);
            if (model.has_reg()) out[1] = model.reg_penalty(t);
            out[2] = loss_dx(t, ro.states);
            out[3] = con_y(t, ro.predictions, b);
            out[4] = con_fu(t, ro.fu_contributions, b);
            return out;
          };

          std::vector<Param*> ps = model.params();
          std::vector<std::vector<Matrix>> grads(5);
          for (int term = 0; term < 5; ++term) {
            for (Param* p : ps) p->zero_grad();
            Tape t;
            auto vals = build_terms(t);
            if (!vals[term].valid()) continue;
            if (term == 1) ++reg_checked;
            if (term == 3 && vals[3].scalar() > 0.0) ++con_y_active;
            if (term == 4 && vals[4].scalar() > 0.0) ++con_fu_active;
            t.backward(vals[term]);
            grads[term].reserve(ps.size());
            for (Param* p : ps) grads[term].push_back(p->grad);
          }

          auto eval_all = [&]() {
            Tape t;
            auto vals = build_terms(t);
            std::array<double, 5> r{};
            for (int i = 0; i < 5; ++i) r[i] = vals[i].valid() ? vals[i].scalar() : 0.0;
            return r;
          };

          for (size_t pi = 0; pi < ps.size(); ++pi) {
            Param& p = *ps[pi];
            for (size_t k = 0; k < p.value.size(); ++k) {
              double& x = p.value.data()[k];
              const double saved = x;
              x = saved + kH;
              const auto fp = eval_all();
              x = saved - kH;
              const auto fm = eval_all();
              x = saved;
              std::optional<std::array<double, 5>> f0;  // filled on first discrepancy
              for (int term = 0; term < 5; ++term) {
                if (grads[term].empty()) continue;
                const double fd = (fp[term] - fm[term]) / (2.0 * kH);
                const double g = grads[term][pi].data()[k];
                // cancellation floor of the central quotient itself
                const double fd_noise =
                    1e-15 * std::max({std::abs(fp[term]), std::abs(fm[term]), 1.0}) / kH;
                const double rel =
                    std::max(0.0, std::abs(g - fd) - fd_noise) / (std::abs(fd) + kDenomFloor);
                if (rel < kRelTol) {
                  ++entries;
                  max_rel = std::max(max_rel, rel);
                  continue;
                }
                if (!f0) f0 = eval_all();  // x already restored to saved
                // one hinge at distance d inside the bracket: second diff
                // (h-d)*s, central-quotient bias (h-d)*s/2h; convex slacks sum
                const double bias_bound =
                    std::abs(fp[term] + fm[term] - 2.0 * (*f0)[term]) / (2.0 * kH);
                if (std::abs(g - fd) <= bias_bound + kRelTol * (std::abs(fd) + kDenomFloor)) {
                  ++skipped;  // discrepancy attributable to a kink inside the bracket
                  continue;
                }
                ++entries;
                if (rel > max_rel) {
                  max_rel = rel;
                  worst = fmt("%s[%zu] term%d analytic=%.3e fd=%.3e bias bound %.1e",
                              ps[pi]->name.c_str(), k, term, g, fd, bias_bound);
                }
              }
            }
          }
        }
      }
    }
  }

  const double wall = seconds_since(t0);
  const bool skip_ok = skipped * 1000 < entries;  // <0.1% of probes
  // A slack term that never activates has a trivially zero gradient; the
  // hinge path must carry real gradient in the bulk of the sweep.
  const bool active_ok = con_y_active * 10 >= combos * 9 && con_fu_active * 10 >= combos * 9;
  Outcome o;
  o.pass = max_rel < kRelTol && skip_ok && active_ok && reg_checked > 0 && wall < 60.0;
  o.detail = fmt("%ld combos, %ld fd entries, max rel %.2e, %ld kink probes excluded, "
                 "slack terms active %ld/%ld+%ld/%ld, %.1fs",
                 combos, entries, max_rel, skipped, con_y_active, combos, con_fu_active, combos,
                 wall);
  if (!worst.empty()) o.detail += " worst " + worst;
  return o;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2() {
  const auto t0 = Clock::now();
  constexpr double kSlack = 1e-8;
  int pf_ok = 0, sv_ok = 0;
  double pf_lo = 1e300, pf_hi = 0.0, sv_lo = 1e300, sv_hi = 0.0;

  for (int i = 0; i < 100; ++i) {
    Rng rng(7000 + i);
    const int n = 3 + (i % 4);
    PerronFrobeniusMap map(n, SpectralBounds(0.2, 0.8), rng);
    map.w.value = rng.normal_matrix(n, n);
    map.m.value = rng.normal_matrix(n, n);
    for (size_t k = 0; k < map.w.value.size(); ++k) {
      map.w.value.data()[k] *= 2.0;
      map.m.value.data()[k] *= 2.0;
    }
    const double dom = power_iteration_dominant(map.effective_value());
    pf_lo = std::min(pf_lo, dom);
    pf_hi = std::max(pf_hi, dom);
    if (dom >= 0.2 && dom <= 0.8 + kSlack) ++pf_ok;
  }

  const int shapes[5][2] = {{4, 4}, {3, 5}, {5, 3}, {6, 6}, {2, 4}};
  for (int i = 0; i < 100; ++i) {
    Rng rng(8000 + i);
    const int out = shapes[i % 5][0], in = shapes[i % 5][1];
    HouseholderSpectralMap map(out, in, SpectralBounds(0.4, 0.7), rng);
    for (Param* p : map.params())
      for (size_t k = 0; k < p->value.size(); ++k) p->value.data()[k] = 3.0 * rng.normal();
    const std::vector<double> sv = jacobi_singular_values(map.effective_value());
    bool ok = static_cast<int>(sv.size()) == std::min(out, in);
    for (double s : sv) {
      sv_lo = std::min(sv_lo, s);
      sv_hi = std::max(sv_hi, s);
      ok = ok && s >= 0.4 - kSlack && s <= 0.7 + kSlack;
    }
    if (ok) ++sv_ok;
  }

  Outcome o;
  o.pass = pf_ok == 100 && sv_ok == 100;
  o.detail = fmt("pf dominant in [%.6f, %.8f] (%d/100 inside [0.2, 0.8+1e-8]), "
                 "householder sv in [%.8f, %.8f] (%d/100 inside [0.4-1e-8, 0.7+1e-8]), %.1fs",
                 pf_lo, pf_hi, pf_ok, sv_lo, sv_hi, sv_ok, seconds_since(t0));
  return o;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3() {
  const auto t0 = Clock::now();
  constexpr double kOrthTol = 1e-10;
  double worst_orth = 0.0;
  const int shapes[3][2] = {{6, 6}, {5, 3}, {3, 5}};
  for (int i = 0; i < 30; ++i) {
    Rng rng(9000 + i);
    HouseholderSpectralMap map(shapes[i % 3][0], shapes[i % 3][1], SpectralBounds(0.4, 0.7), rng);
    for (Param& pv : map.u_vectors)
      for (size_t k = 0; k < pv.value.size(); ++k) pv.value.data()[k] = rng.normal();
    for (Param& pv : map.v_vectors)
      for (size_t k = 0; k < pv.value.size(); ++k) pv.value.data()[k] = rng.normal();
    worst_orth = std::max(worst_orth, orthogonality_error(map.factor_u()));
    worst_orth = std::max(worst_orth, orthogonality_error(map.factor_v()));
  }

  // Soft-SVD penalty descent from a 0.1-perturbed orthogonal start. lr keeps
  // the 200 steps inside the descent phase; larger rates reach the penalty
  // floor where momentum oscillates.
  Rng rng(33);
  SoftSvdMap map(4, 4, SpectralBounds(0.2, 0.8), rng);
  for (size_t k = 0; k < map.u.value.size(); ++k) {
    map.u.value.data()[k] += 0.1 * rng.normal();
    map.v.value.data()[k] += 0.1 * rng.normal();
  }
  AdamWConfig cfg;
  cfg.lr = 3e-4;
  cfg.weight_decay = 0.0;
  AdamW opt({&map.u, &map.v}, cfg);
  double prev = 0.0;
  bool have_prev = false;
  int violations = 0;
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    opt.zero_grad();
    Tape t;
    Val pen = map.reg_penalty(t);
    const double value = pen.scalar();
    if (!have_prev) first = value;
    if (have_prev && value > prev + 1e-12) ++violations;
    prev = value;
    last = value;
    have_prev = true;
    t.backward(pen);
    opt.step();
  }

  Outcome o;
  o.pass = worst_orth < kOrthTol && violations == 0 && last < first;
  o.detail = fmt("max ||Q^T Q - I||_inf %.2e over 60 factors, penalty %.6f -> %.6f in 200 steps, "
                 "%d monotonicity violations, %.1fs",
                 worst_orth, first, last, violations, seconds_since(t0));
  return o;
}

// ---------------------------------------------------------------- criterion 4

std::map<std::string, std::string> load_golden(const std::string& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string name, hex;
  while (in >> name >> hex) out[name] = hex;
  return out;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Outcome criterion4() {
  const auto t0 = Clock::now();
  // RK4 against the exponential decay solution.
  auto decay = [](const std::vector<double>& x, const std::vector<double>&,
                  std::vector<double>& dx) { dx[0] = -x[0]; };
  Matrix u(100, 1);
  Matrix traj = rk4_integrate(decay, {1.0}, u, 0.01);
  const double err = std::abs(traj(99, 0) - std::exp(-1.0));

  // Golden ten-thousand-step emulator runs, byte-stable via FNV-1a.
  Trajectory c = generate_cstr_dataset(20260818);
  Trajectory t = generate_twotank_dataset(20260818);
  std::map<std::string, std::string> want;
  want["cstr_u"] = hex64(fnv1a_bytes(c.u));
  want["cstr_y"] = hex64(fnv1a_bytes(c.y));
  want["twotank_u"] = hex64(fnv1a_bytes(t.u));
  want["twotank_y"] = hex64(fnv1a_bytes(t.y));

  const std::string path = std::string(NSSM_GOLDEN_DIR) + "/system_checksums.txt";
  std::map<std::string, std::string> have = load_golden(path);
  std::string golden_note;
  bool golden_ok = true;
  if (have.empty()) {
    std::ofstream out(path);
    golden_ok = bool(out);
    for (const auto& [k, v] : want) out << k << " " << v << "\n";
    golden_note = "recorded on first run";
  } else {
    int matched = 0;
    for (const auto& [k, v] : want)
      if (have[k] == v) ++matched;
    golden_ok = matched == 4;
    golden_note = fmt("%d/4 checksums byte-identical", matched);
  }

  Outcome o;
  o.pass = err < 1e-8 && golden_ok;
  o.detail = fmt("|rk4 - e^-1| = %.2e at t=1 dt=0.01, golden 10k-step runs: %s, %.1fs", err,
                 golden_note.c_str(), seconds_since(t0));
  return o;
}

// ---------------------------------------------------------------- criterion 5

ExperimentConfig linear_fit_config() {
  ExperimentConfig cfg;
  cfg.system = "twotank";  // loader tag only; data comes from the generator
  cfg.model.model_class = ModelClass::Linear;
  // Min/max normalization introduces a constant affine offset and bare maps
  // have no bias, so one extra state channel carries the constant; the
  // identity-activation observer is affine and can emit it.
  cfg.model.n_x = 3;
  cfg.model.lookback = 1;
  cfg.model.activation = ActivationKind::Identity;
  cfg.model.observer_kind = BlockKind::Mlp;
  cfg.model.observer_layers = 1;
  cfg.weights = LossWeights{};
  cfg.lr = 0.02;
  cfg.horizon = 8;
  cfg.eval_every = 200;
  cfg.max_steps = 10000;
  cfg.seed = 7;
  return cfg;
}

struct LinearRun {
  RunResult result;
  double wall = 0.0;
};

LinearRun run_linear_fit() {
  const auto t0 = Clock::now();
  const Trajectory traj = linear_system_trajectory(11, 3000, 0.9);
  const ExperimentConfig cfg = linear_fit_config();
  const DataSplits data = prepare_splits(cfg, traj);
  LinearRun out;
  out.result = train(cfg, data).result;
  out.wall = seconds_since(t0);
  return out;
}

std::optional<LinearRun> g_linear_run;

Outcome criterion5() {
  g_linear_run = run_linear_fit();
  const RunResult& r = g_linear_run->result;
  Outcome o;
  o.pass = r.open_loop_mse_dev < 1e-4 && r.open_loop_mse_test < 1e-4 &&
           g_linear_run->wall < 600.0;
  o.detail = fmt("open-loop mse dev %.3e test %.3e after %lld steps (best %lld), %.1fs",
                 r.open_loop_mse_dev, r.open_loop_mse_test,
                 static_cast<long long>(linear_fit_config().max_steps),
                 static_cast<long long>(r.best_step), g_linear_run->wall);
  return o;
}

// ------------------------------------------------------- criteria 6, 7 and 8

// One five-seed ablation feeds criteria 6-8. The base is the two-tank
// winner configuration; the budget (minibatch 64, 10k updates) is the
// single-core translation of the full-batch protocol: same update count,
// same learning rate.
AblationPlan twotank_plan() {
  AblationPlan plan;
  plan.seeds_per_cell = 5;
  ExperimentConfig& c = plan.base;
  c.system = "twotank";
  c.model.model_class = ModelClass::Hammerstein;
  c.model.lookback = 4;
  c.model.block_kind = BlockKind::ResMlp;
  c.model.layers = 3;
  c.model.nodes = 40;
  c.model.activation = ActivationKind::Gelu;
  c.model.linmap = LinmapKind::Dense;
  c.model.observer_kind = BlockKind::ResMlp;
  c.weights.q_y = 0.5;
  c.weights.q_dx = 0.3;
  c.weights.q_con_y = 0.3;
  c.weights.q_con_fu = 0.1;
  c.lr = 3e-4;
  c.horizon = 64;
  c.batch = 64;
  c.max_steps = 10000;
  c.eval_every = 250;
  c.seed = 1;
  return plan;
}

struct AblationRun {
  std::vector<AblationCell> cells;
  double wall = 0.0;
};

std::optional<AblationRun> g_ablation;

const AblationRun& ablation() {
  if (!g_ablation) {
    const auto t0 = Clock::now();
    AblationPlan plan = twotank_plan();
    Trajectory traj = generate_twotank_dataset(1);
    DataSplits data = prepare_splits(plan.base, traj);
    AblationRun run;
    run.cells = run_ablation(plan, data);
    run.wall = seconds_since(t0);
    g_ablation = std::move(run);
  }
  return *g_ablation;
}

const AblationCell& cell(const std::string& name) {
  for (const AblationCell& c : ablation().cells)
    if (c.name == name) return c;
  throw std::logic_error("missing ablation cell " + name);
}

Outcome criterion6() {
  const double m_all = cell("all").median;
  const double m_uu = cell("unstructured_unconstrained").median;
  const double wall = ablation().wall;
  Outcome o;
  o.pass = m_uu >= 2.0 * m_all && wall < 7200.0;
  o.detail = fmt("median test open-loop mse over 5 seeds: hammerstein+constraints %.5e, "
                 "unstructured unconstrained %.5e, ratio %.2fx (need >= 2), ablation wall %.0fs",
                 m_all, m_uu, m_all > 0 ? m_uu / m_all : 0.0, wall);
  return o;
}

Outcome criterion7() {
  // Structure removal on equal footing: both cells are unconstrained and
  // differ only in the block structure.
  const double m_nc = cell("no_constraints").median;
  const double m_uu = cell("unstructured_unconstrained").median;
  double worst = 0.0;
  for (const AblationCell& c : ablation().cells) worst = std::max(worst, c.median);
  Outcome o;
  const bool structure = m_uu >= 2.0 * m_nc;
  const bool all_star = m_uu >= 0.9 * worst;
  o.pass = structure && all_star;
  o.detail = fmt("structure removal %.5e -> %.5e (%.2fx, need >= 2), -all* %.5e vs worst cell "
                 "%.5e (%s)",
                 m_nc, m_uu, m_nc > 0 ? m_uu / m_nc : 0.0, m_uu, worst,
                 all_star ? "worst or within 10%" : "not worst");
  return o;
}

Outcome criterion8() {
  constexpr double kTol = 1.0 + 1e-6;
  double worst = 0.0;
  int models = 0, eigs = 0;
  for (const RunResult& r : cell("all").runs) {
    ++models;
    for (const Spectrum& s : r.spectra)
      for (const std::complex<double>& ev : s.eigenvalues) {
        ++eigs;
        worst = std::max(worst, std::abs(ev));
      }
  }
  Outcome o;
  o.pass = models == 5 && eigs > 0 && worst <= kTol;
  o.detail = fmt("%d trained constrained models, %d state-transition eigenvalues, "
                 "max modulus %.6f (limit 1+1e-6)",
                 models, eigs, worst);
  return o;
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9() {
  if (!g_linear_run) g_linear_run = run_linear_fit();
  const RunResult a = g_linear_run->result;
  const RunResult b = run_linear_fit().result;
  const bool same = a.open_loop_mse_dev == b.open_loop_mse_dev &&
                    a.open_loop_mse_test == b.open_loop_mse_test &&
                    a.nstep_mse_dev == b.nstep_mse_dev && a.nstep_mse_test == b.nstep_mse_test &&
                    a.best_step == b.best_step;
  Outcome o;
  o.pass = same;
  o.detail = same ? fmt("rerun reproduced all four final metrics bit-for-bit (open-loop test "
                        "%.17g)",
                        b.open_loop_mse_test)
                  : fmt("metrics differ: open-loop test %.17g vs %.17g", a.open_loop_mse_test,
                        b.open_loop_mse_test);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Entry> entries = {
      {1, "gradients vs central differences", criterion1},
      {2, "spectral bounds under random parameters", criterion2},
      {3, "orthogonal factors and penalty descent", criterion3},
      {4, "ode oracle and golden emulator runs", criterion4},
      {5, "linear self-consistency", criterion5},
      {6, "structured+constrained vs unstructured", criterion6},
      {7, "ablation orderings", criterion7},
      {8, "trained state-transition eigenvalues", criterion8},
      {9, "training determinism", criterion9},
  };

  std::set<int> want;
  for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));

  int passed = 0, ran = 0;
  for (const Entry& e : entries) {
    if (!want.empty() && !want.count(e.id)) continue;
    ++ran;
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    if (o.pass) ++passed;
    std::printf("criterion %d %s: %s  [%s]\n", e.id, e.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d/%d passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
