#include "nssm/systems.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace nssm {

namespace {

std::vector<double> row_of(const Matrix& m, int r) {
  std::vector<double> out(m.cols());
  for (int j = 0; j < m.cols(); ++j) out[j] = m(r, j);
  return out;
}

}  // namespace

Matrix rk4_integrate(const Deriv& f, std::vector<double> x0, const Matrix& u_series, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("rk4_integrate: dt must be positive");
  if (u_series.rows() < 1) throw std::invalid_argument("rk4_integrate: empty input series");
  const int n = static_cast<int>(x0.size());
  const int steps = u_series.rows();
  Matrix states(steps, n);
  std::vector<double> x = std::move(x0);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (int s = 0; s < steps; ++s) {
    const std::vector<double> u = row_of(u_series, s);
    f(x, u, k1);
    for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    f(tmp, u, k2);
    for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    f(tmp, u, k3);
    for (int i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    f(tmp, u, k4);
    for (int i = 0; i < n; ++i) {
      x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(x[i]))
        throw NumericError("rk4_integrate: diverged at step " + std::to_string(s));
      states(s, i) = x[i];
    }
  }
  return states;
}

void cstr_deriv(const CstrParams& p, const std::vector<double>& x, const std::vector<double>& u,
                std::vector<double>& dx) {
  const double rate = p.k0 * std::exp(-p.e_over_r / x[1]) * x[0];
  dx[0] = (p.q / p.v) * (p.caf - x[0]) - rate;
  dx[1] = (p.q / p.v) * (p.tf - x[1]) + (p.heat / (p.rho * p.cp)) * rate +
          (p.ua / (p.v * p.rho * p.cp)) * (u[0] - x[1]);
}

void twotank_deriv(const TwoTankParams& p, const std::vector<double>& x,
                   const std::vector<double>& u, std::vector<double>& dx) {
  const double s1 = std::sqrt(std::max(x[0], 0.0));
  const double s2 = std::sqrt(std::max(x[1], 0.0));
  dx[0] = x[0] <= 1.0 ? (1.0 - u[0]) * p.c1 * u[1] - p.c2 * s1 : 0.0;
  dx[1] = x[1] <= 1.0 ? p.c1 * u[0] * u[1] + p.c2 * s1 - p.c2 * s2 : 0.0;
}

Trajectory simulate_cstr(const CstrParams& p, const Matrix& u_series,
                         const std::vector<double>& x0, double dt) {
  if (u_series.cols() != 1) throw ShapeError("simulate_cstr: expected one input channel");
  auto f = [&p](const std::vector<double>& x, const std::vector<double>& u,
                std::vector<double>& dx) { cstr_deriv(p, x, u, dx); };
  Trajectory traj;
  traj.u = u_series;
  traj.y = rk4_integrate(f, x0, u_series, dt);
  traj.dt = dt;
  return traj;
}

Trajectory simulate_twotank(const TwoTankParams& p, const Matrix& u_series,
                            const std::vector<double>& x0, double dt) {
  if (u_series.cols() != 2) throw ShapeError("simulate_twotank: expected two input channels");
  for (double xi : x0)
    if (xi < 0.0) throw std::invalid_argument("simulate_twotank: negative level");
  for (int r = 0; r < u_series.rows(); ++r)
    for (int c = 0; c < 2; ++c)
      if (u_series(r, c) < 0.0 || u_series(r, c) > 1.0)
        throw std::invalid_argument("simulate_twotank: inputs must lie in [0,1]");
  auto f = [&p](const std::vector<double>& x, const std::vector<double>& u,
                std::vector<double>& dx) { twotank_deriv(p, x, u, dx); };

  // Integrate one step at a time so levels can be clipped to [0,1] before
  // the next step, matching the physical overflow/empty limits.
  Trajectory traj;
  traj.u = u_series;
  traj.y = Matrix(u_series.rows(), 2);
  traj.dt = dt;
  std::vector<double> x = x0;
  Matrix one_u(1, 2);
  for (int s = 0; s < u_series.rows(); ++s) {
    one_u(0, 0) = u_series(s, 0);
    one_u(0, 1) = u_series(s, 1);
    Matrix next = rk4_integrate(f, x, one_u, dt);
    for (int i = 0; i < 2; ++i) {
      x[i] = std::min(1.0, std::max(0.0, next(0, i)));
      traj.y(s, i) = x[i];
    }
  }
  return traj;
}

Matrix random_step_input(uint64_t seed, int steps, int channels, int hold_min, int hold_max,
                         double level_min, double level_max) {
  if (hold_min < 1 || hold_max < hold_min)
    throw std::invalid_argument("random_step_input: bad hold range");
  Rng rng(seed);
  Matrix u(steps, channels);
  for (int c = 0; c < channels; ++c) {
    int s = 0;
    while (s < steps) {
      const int hold = rng.uniform_int(hold_min, hold_max);
      const double level = rng.uniform(level_min, level_max);
      for (int k = s; k < std::min(steps, s + hold); ++k) u(k, c) = level;
      s += hold;
    }
  }
  return u;
}

Trajectory generate_cstr_dataset(uint64_t seed, int steps, double dt) {
  // Coolant band kept below the reactor's ignition edge (~302 K): above it
  // the exotherm limit-cycles with spikes past 460 K, which fixed-step RK4
  // at the sampling interval cannot follow.
  Matrix u = random_step_input(seed, steps, 1, 50, 500, 275.0, 295.0);
  return simulate_cstr(CstrParams{}, u, {0.5, 350.0}, dt);
}

Trajectory generate_twotank_dataset(uint64_t seed, int steps, double dt) {
  // Valve split 0-0.4 and pump 0.4-0.7 with c1=0.5, c2=0.4 hold both
  // equilibrium levels inside (0.09, 0.77): fill/drain transients without
  // parking on the overflow clamp, where frozen samples carry no dynamics.
  // Long holds leave ~a dozen operating points per contiguous third, so
  // held-out holds are genuinely unseen. Channel seeds differ so valve and
  // pump switch independently.
  Matrix u1 = random_step_input(seed, steps, 1, 400, 900, 0.0, 0.4);
  Matrix u2 = random_step_input(seed ^ 0x9e3779b97f4a7c15ULL, steps, 1, 400, 900, 0.4, 0.7);
  Matrix u(steps, 2);
  for (int r = 0; r < steps; ++r) {
    u(r, 0) = u1(r, 0);
    u(r, 1) = u2(r, 0);
  }
  return simulate_twotank(TwoTankParams{0.5, 0.4}, u, {0.3, 0.3}, dt);
}

void save_dataset(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# columns: " << traj.u.cols() << " inputs then " << traj.y.cols() << " outputs\n";
  out << "# dt: " << traj.dt << "\n";
  out.precision(17);
  for (int r = 0; r < traj.u.rows(); ++r) {
    for (int j = 0; j < traj.u.cols(); ++j) out << traj.u(r, j) << " ";
    for (int j = 0; j < traj.y.cols(); ++j)
      out << traj.y(r, j) << (j + 1 == traj.y.cols() ? "" : " ");
    out << "\n";
  }
}

Trajectory load_dataset(const std::string& path, int n_u, int n_y, double dt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (static_cast<int>(vals.size()) != n_u + n_y)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(n_u + n_y) + " columns, got " +
                               std::to_string(vals.size()));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  Trajectory traj;
  traj.u = Matrix(static_cast<int>(rows.size()), n_u);
  traj.y = Matrix(static_cast<int>(rows.size()), n_y);
  traj.dt = dt;
  for (size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < n_u; ++j) traj.u(static_cast<int>(r), j) = rows[r][j];
    for (int j = 0; j < n_y; ++j) traj.y(static_cast<int>(r), j) = rows[r][n_u + j];
  }
  return traj;
}

Trajectory load_aero(const std::string& path) { return load_dataset(path, 10, 5, 0.02); }

namespace {

Matrix column_min(const Matrix& m, int row_end) {
  Matrix out(m.cols(), 1);
  for (int j = 0; j < m.cols(); ++j) {
    double v = m(0, j);
    for (int r = 1; r < row_end; ++r) v = std::min(v, m(r, j));
    out(j, 0) = v;
  }
  return out;
}

Matrix column_max(const Matrix& m, int row_end) {
  Matrix out(m.cols(), 1);
  for (int j = 0; j < m.cols(); ++j) {
    double v = m(0, j);
    for (int r = 1; r < row_end; ++r) v = std::max(v, m(r, j));
    out(j, 0) = v;
  }
  return out;
}

Matrix normalize_rows(const Matrix& m, int row_begin, int row_end, const Matrix& mn,
                      const Matrix& mx) {
  Matrix out(row_end - row_begin, m.cols());
  for (int j = 0; j < m.cols(); ++j) {
    const double range = std::max(mx(j, 0) - mn(j, 0), 1e-12);
    for (int r = row_begin; r < row_end; ++r)
      out(r - row_begin, j) = (m(r, j) - mn(j, 0)) / range;
  }
  return out;
}

WindowBatch make_windows(const Matrix& u, const Matrix& y, int horizon, int lookback,
                         int stride) {
  const int t = u.rows();
  const int count = (t - lookback - horizon) / stride + 1;
  if (count < 1)
    throw std::invalid_argument("split_and_window: horizon too long for split of length " +
                                std::to_string(t));
  WindowBatch wb;
  wb.y_history.assign(lookback, Matrix(y.cols(), count));
  wb.u_future.assign(horizon, Matrix(u.cols(), count));
  wb.y_future.assign(horizon, Matrix(y.cols(), count));
  for (int w = 0; w < count; ++w) {
    const int s = w * stride;
    for (int p = 0; p < lookback; ++p)
      for (int j = 0; j < y.cols(); ++j) wb.y_history[p](j, w) = y(s + p, j);
    for (int h = 0; h < horizon; ++h) {
      for (int j = 0; j < u.cols(); ++j) wb.u_future[h](j, w) = u(s + lookback + h, j);
      for (int j = 0; j < y.cols(); ++j) wb.y_future[h](j, w) = y(s + lookback + h, j);
    }
  }
  return wb;
}

}  // namespace

DataSplits split_and_window(const Trajectory& traj, int horizon, int lookback, int stride) {
  if (horizon < 1 || lookback < 1 || stride < 1)
    throw std::invalid_argument("split_and_window: horizon, lookback, stride must be positive");
  const int t = traj.u.rows();
  if (t < 3 * (horizon + lookback))
    throw std::invalid_argument("split_and_window: series too short for three splits");
  const int b1 = t / 3, b2 = 2 * t / 3;

  DataSplits ds;
  ds.n_u = traj.u.cols();
  ds.n_y = traj.y.cols();
  ds.horizon = horizon;
  ds.lookback = lookback;
  ds.dt = traj.dt;
  ds.stats.u_min = column_min(traj.u, b1);
  ds.stats.u_max = column_max(traj.u, b1);
  ds.stats.y_min = column_min(traj.y, b1);
  ds.stats.y_max = column_max(traj.y, b1);

  auto build = [&](int lo, int hi) {
    SplitData sd;
    sd.u = normalize_rows(traj.u, lo, hi, ds.stats.u_min, ds.stats.u_max);
    sd.y = normalize_rows(traj.y, lo, hi, ds.stats.y_min, ds.stats.y_max);
    sd.windows = make_windows(sd.u, sd.y, horizon, lookback, stride);
    return sd;
  };
  ds.train = build(0, b1);
  ds.dev = build(b1, b2);
  ds.test = build(b2, t);
  return ds;
}

}  // namespace nssm
