#pragma once

// Ground-truth data: ODE emulators (reactor, two-tank) under RK4 with
// piecewise-constant inputs, random step excitation, delimited-text dataset
// I/O, and contiguous third splits with train-only min/max normalization.

#include <functional>
#include <string>
#include <vector>

#include "nssm/matrix.hpp"
#include "nssm/rng.hpp"

namespace nssm {

struct CstrParams {
  double q = 100.0;       // volumetric flow
  double v = 100.0;       // reactor volume
  double rho = 1000.0;    // density
  double cp = 0.239;      // heat capacity
  double heat = 5.0e4;    // reaction enthalpy magnitude
  double e_over_r = 8750.0;
  double k0 = 7.2e10;     // pre-exponential factor
  double ua = 5.0e4;      // heat transfer coefficient x area
  double tf = 350.0;      // feed temperature
  double caf = 1.0;       // feed concentration
};

struct TwoTankParams {
  double c1 = 0.08;  // inflow coefficient
  double c2 = 0.04;  // outflow coefficient
};

struct Trajectory {
  Matrix u;  // T x n_u
  Matrix y;  // T x n_y
  double dt = 1.0;
};

// dx = f(x, u); u held constant over each step.
using Deriv =
    std::function<void(const std::vector<double>&, const std::vector<double>&, std::vector<double>&)>;

// Classical fixed-step RK4. Row k of the result is the state after step k
// under input row k. Throws NumericError naming the step on divergence.
Matrix rk4_integrate(const Deriv& f, std::vector<double> x0, const Matrix& u_series, double dt);

void cstr_deriv(const CstrParams& p, const std::vector<double>& x, const std::vector<double>& u,
                std::vector<double>& dx);
void twotank_deriv(const TwoTankParams& p, const std::vector<double>& x,
                   const std::vector<double>& u, std::vector<double>& dx);

// Both states measured. u: T x 1 coolant temperature.
Trajectory simulate_cstr(const CstrParams& p, const Matrix& u_series,
                         const std::vector<double>& x0, double dt);

// Levels clipped to [0,1] after each step. u: T x 2 (valve split, pump)
// with both channels in [0,1]; x0 entries must be nonnegative.
Trajectory simulate_twotank(const TwoTankParams& p, const Matrix& u_series,
                            const std::vector<double>& x0, double dt);

// Piecewise-constant excitation: per channel, hold lengths drawn uniformly
// from [hold_min, hold_max] steps and levels from [level_min, level_max].
Matrix random_step_input(uint64_t seed, int steps, int channels, int hold_min, int hold_max,
                         double level_min, double level_max);

// Canonical 10,000-step generation recipes used by the CLI and tests.
Trajectory generate_cstr_dataset(uint64_t seed, int steps = 10000, double dt = 0.1);
Trajectory generate_twotank_dataset(uint64_t seed, int steps = 10000, double dt = 1.0);

// Delimited text: optional '#' comment lines, then one row per sample with
// n_u input columns followed by n_y output columns.
void save_dataset(const std::string& path, const Trajectory& traj);
Trajectory load_dataset(const std::string& path, int n_u, int n_y, double dt);

// Aerodynamic body recording: 10 inputs, 5 outputs, 0.02 s sampling.
Trajectory load_aero(const std::string& path);

struct NormStats {
  Matrix u_min, u_max;  // n_u x 1
  Matrix y_min, y_max;  // n_y x 1
};

struct WindowBatch {
  std::vector<Matrix> y_history;  // N_p entries, each n_y x B
  std::vector<Matrix> u_future;   // N entries, each n_u x B
  std::vector<Matrix> y_future;   // N entries, each n_y x B
  int count() const { return y_history.empty() ? 0 : y_history.front().cols(); }
};

struct SplitData {
  Matrix u, y;  // normalized, split_len x channels
  WindowBatch windows;
};

struct DataSplits {
  SplitData train, dev, test;
  NormStats stats;
  int n_u = 0, n_y = 0;
  int horizon = 0, lookback = 0;
  double dt = 1.0;
};

// First/middle/final thirds; min/max stats from the train split only are
// applied to all three. Windows never cross a split boundary.
DataSplits split_and_window(const Trajectory& traj, int horizon, int lookback, int stride = 1);

}  // namespace nssm
