#include "nssm/linmaps.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace nssm {

namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

EigenRowMajor to_eigen(const Matrix& m) {
  return Eigen::Map<const EigenRowMajor>(m.data(), m.rows(), m.cols());
}

Matrix from_eigen(const EigenRowMajor& e) {
  Matrix m(static_cast<int>(e.rows()), static_cast<int>(e.cols()));
  Eigen::Map<EigenRowMajor>(m.data(), e.rows(), e.cols()) = e;
  return m;
}

// lmax - (lmax-lmin)*sigmoid(s), elementwise
Val clamped(Tape& t, Val s, const SpectralBounds& b) {
  return t.add_scalar(t.scale(t.sigmoid(s), -b.range()), b.lambda_max);
}

Matrix scaled_uniform_init(Rng& rng, int out, int in) {
  const double a = std::sqrt(1.0 / in);
  return rng.uniform_matrix(out, in, -a, a);
}

}  // namespace

SpectralBounds::SpectralBounds(double lo, double hi) : lambda_min(lo), lambda_max(hi) {
  if (!(lo >= 0.0 && lo < hi))
    throw std::invalid_argument("SpectralBounds: need 0 <= lambda_min < lambda_max");
}

LinmapKind linmap_kind_from_string(const std::string& s) {
  if (s == "dense") return LinmapKind::Dense;
  if (s == "pf" || s == "perron_frobenius") return LinmapKind::PerronFrobenius;
  if (s == "softsvd" || s == "soft_svd") return LinmapKind::SoftSvd;
  if (s == "spectral" || s == "householder") return LinmapKind::Spectral;
  throw std::invalid_argument("unknown linear map kind: " + s);
}

std::string to_string(LinmapKind k) {
  switch (k) {
    case LinmapKind::Dense: return "dense";
    case LinmapKind::PerronFrobenius: return "pf";
    case LinmapKind::SoftSvd: return "softsvd";
    case LinmapKind::Spectral: return "spectral";
  }
  return "?";
}

LinearMap::LinearMap(int out, int in) : out_dim_(out), in_dim_(in) {
  if (out < 1 || in < 1) throw std::invalid_argument("LinearMap: dims must be positive");
}

Val LinearMap::effective(Tape& t) {
  if (memo_gen_ != t.generation()) {
    memo_ = build(t);
    memo_gen_ = t.generation();
  }
  return memo_;
}

Matrix LinearMap::effective_value() {
  Tape t;
  return effective(t).value();
}

std::vector<std::complex<double>> LinearMap::eigenvalues() {
  if (out_dim_ != in_dim_)
    throw ShapeError("eigenvalues: map is " + std::to_string(out_dim_) + "x" +
                     std::to_string(in_dim_));
  Eigen::EigenSolver<EigenRowMajor> solver(to_eigen(effective_value()), false);
  std::vector<std::complex<double>> out(out_dim_);
  for (int i = 0; i < out_dim_; ++i) out[i] = solver.eigenvalues()[i];
  return out;
}

DenseMap::DenseMap(int out, int in, Rng& rng)
    : LinearMap(out, in), w(scaled_uniform_init(rng, out, in), "dense.w") {}

Val DenseMap::build(Tape& t) { return t.param(w); }

PerronFrobeniusMap::PerronFrobeniusMap(int n, SpectralBounds b, Rng& rng)
    : LinearMap(n, n),
      w(scaled_uniform_init(rng, n, n), "pf.w"),
      m(scaled_uniform_init(rng, n, n), "pf.m"),
      bounds(b) {}

Val PerronFrobeniusMap::build(Tape& t) {
  return t.hadamard(t.softmax_rows(t.param(w)), clamped(t, t.param(m), bounds));
}

SoftSvdMap::SoftSvdMap(int out, int in, SpectralBounds b, Rng& rng)
    : LinearMap(out, in),
      u(Matrix(1, 1), "svd.u"),
      sigma(Matrix(std::min(out, in), 1), "svd.sigma"),
      v(Matrix(1, 1), "svd.v"),
      bounds(b),
      rank_(std::min(out, in)) {
  u = Param(orthonormal_columns(rng, out, rank_), "svd.u");
  Matrix vt = orthonormal_columns(rng, in, rank_);
  Matrix vr(rank_, in);
  for (int i = 0; i < rank_; ++i)
    for (int j = 0; j < in; ++j) vr(i, j) = vt(j, i);
  v = Param(vr, "svd.v");
}

Val SoftSvdMap::build(Tape& t) {
  Val d = t.embed_diag(clamped(t, t.param(sigma), bounds), rank_, rank_);
  return t.matmul(t.matmul(t.param(u), d), t.param(v));
}

Val SoftSvdMap::reg_penalty(Tape& t) {
  Val uu = t.param(u);
  Val vv = t.param(v);
  auto term = [&](Val a, Val b, int n) {
    return t.frobenius(t.sub(t.constant(Matrix::identity(n)), t.matmul(a, b)));
  };
  Val s = t.add(term(uu, t.transpose(uu), out_dim()), term(t.transpose(uu), uu, rank_));
  s = t.add(s, term(vv, t.transpose(vv), rank_));
  return t.add(s, term(t.transpose(vv), vv, in_dim()));
}

HouseholderSpectralMap::HouseholderSpectralMap(int out, int in, SpectralBounds b, Rng& rng,
                                               int reflectors_per_side)
    : LinearMap(out, in), sigma(Matrix(std::min(out, in), 1), "spec.sigma"), bounds(b),
      rank_(std::min(out, in)) {
  const int ku = reflectors_per_side > 0 ? reflectors_per_side : out;
  const int kv = reflectors_per_side > 0 ? reflectors_per_side : in;
  u_vectors.reserve(ku);
  v_vectors.reserve(kv);
  for (int k = 0; k < ku; ++k)
    u_vectors.emplace_back(rng.normal_matrix(out, 1), "spec.u" + std::to_string(k));
  for (int k = 0; k < kv; ++k)
    v_vectors.emplace_back(rng.normal_matrix(in, 1), "spec.v" + std::to_string(k));
}

std::vector<Param*> HouseholderSpectralMap::params() {
  std::vector<Param*> out;
  for (Param& p : u_vectors) out.push_back(&p);
  out.push_back(&sigma);
  for (Param& p : v_vectors) out.push_back(&p);
  return out;
}

Val HouseholderSpectralMap::reflect_product(Tape& t, std::vector<Param>& vecs, int dim) {
  // Accumulates Q <- Q (I - 2 u u^T / |u|^2) via rank-1 updates.
  Val q = t.constant(Matrix::identity(dim));
  for (Param& p : vecs) {
    double norm_sq = 0.0;
    for (int i = 0; i < p.value.rows(); ++i) norm_sq += p.value(i, 0) * p.value(i, 0);
    if (norm_sq == 0.0) throw NumericError("zero-norm reflector vector '" + p.name + "'");
    Val uvec = t.param(p);
    Val scale2 = t.scale(t.reciprocal(t.sum(t.hadamard(uvec, uvec))), 2.0);
    Val outer = t.matmul(t.matmul(q, uvec), t.transpose(uvec));
    q = t.sub(q, t.scalar_mul(scale2, outer));
  }
  return q;
}

Val HouseholderSpectralMap::build(Tape& t) {
  Val qu = reflect_product(t, u_vectors, out_dim());
  Val qv = reflect_product(t, v_vectors, in_dim());
  Val d = t.embed_diag(clamped(t, t.param(sigma), bounds), out_dim(), in_dim());
  return t.matmul(t.matmul(qu, d), qv);
}

Matrix HouseholderSpectralMap::factor_u() {
  Tape t;
  return reflect_product(t, u_vectors, out_dim()).value();
}

Matrix HouseholderSpectralMap::factor_v() {
  Tape t;
  return reflect_product(t, v_vectors, in_dim()).value();
}

std::unique_ptr<LinearMap> make_linmap(LinmapKind kind, int out, int in, SpectralBounds bounds,
                                       Rng& rng) {
  switch (kind) {
    case LinmapKind::Dense:
      return std::make_unique<DenseMap>(out, in, rng);
    case LinmapKind::PerronFrobenius:
      if (out != in) throw ShapeError("perron-frobenius map must be square");
      return std::make_unique<PerronFrobeniusMap>(out, bounds, rng);
    case LinmapKind::SoftSvd:
      return std::make_unique<SoftSvdMap>(out, in, bounds, rng);
    case LinmapKind::Spectral:
      return std::make_unique<HouseholderSpectralMap>(out, in, bounds, rng);
  }
  throw std::invalid_argument("make_linmap: bad kind");
}

Matrix orthonormal_columns(Rng& rng, int rows, int cols) {
  if (rows < cols) throw ShapeError("orthonormal_columns: rows < cols");
  EigenRowMajor a = to_eigen(rng.normal_matrix(rows, cols));
  Eigen::HouseholderQR<EigenRowMajor> qr(a);
  EigenRowMajor q = qr.householderQ() * EigenRowMajor::Identity(rows, cols);
  EigenRowMajor r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return from_eigen(q);
}

}  // namespace nssm
