#pragma once

// Linear-map parametrizations behind one interface: dense (unconstrained),
// Perron-Frobenius row-sum bounded, soft SVD with orthogonality penalty, and
// Householder spectral with exact orthogonal factors. Maps are purely linear;
// biases live in the owning block layer.

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "nssm/diffcore.hpp"
#include "nssm/rng.hpp"

namespace nssm {

struct SpectralBounds {
  double lambda_min = 0.0;
  double lambda_max = 1.0;
  SpectralBounds() = default;
  SpectralBounds(double lo, double hi);
  double range() const { return lambda_max - lambda_min; }
};

enum class LinmapKind { Dense, PerronFrobenius, SoftSvd, Spectral };

LinmapKind linmap_kind_from_string(const std::string& s);
std::string to_string(LinmapKind k);

class LinearMap {
 public:
  virtual ~LinearMap() = default;

  int out_dim() const { return out_dim_; }
  int in_dim() const { return in_dim_; }
  virtual LinmapKind kind() const = 0;
  virtual std::vector<Param*> params() = 0;
  virtual bool has_reg() const { return false; }
  virtual Val reg_penalty(Tape& t) { return t.constant_scalar(0.0); }

  // Effective weight matrix on the tape; memoized per tape so repeated
  // rollout steps share one subgraph (gradients still accumulate correctly).
  Val effective(Tape& t);
  Val apply(Tape& t, Val x) { return t.matmul(effective(t), x); }

  Matrix effective_value();
  std::vector<std::complex<double>> eigenvalues();

 protected:
  LinearMap(int out, int in);
  virtual Val build(Tape& t) = 0;

 private:
  int out_dim_;
  int in_dim_;
  uint64_t memo_gen_ = 0;
  Val memo_{};
};

class DenseMap final : public LinearMap {
 public:
  DenseMap(int out, int in, Rng& rng);
  LinmapKind kind() const override { return LinmapKind::Dense; }
  std::vector<Param*> params() override { return {&w}; }

  Param w;

 private:
  Val build(Tape& t) override;
};

// W~ = softmax_rows(W) .* (lmax - (lmax-lmin)*sigmoid(M)); every row sum of
// the effective matrix lands in [lmin, lmax], bounding the dominant
// eigenvalue of the positive matrix.
class PerronFrobeniusMap final : public LinearMap {
 public:
  PerronFrobeniusMap(int n, SpectralBounds bounds, Rng& rng);
  LinmapKind kind() const override { return LinmapKind::PerronFrobenius; }
  std::vector<Param*> params() override { return {&w, &m}; }

  Param w;
  Param m;
  SpectralBounds bounds;

 private:
  Val build(Tape& t) override;
};

// W~ = U diag(sigmoid-clamped sigma) V with U, V initialized orthogonal and
// kept near-orthogonal by reg_penalty.
class SoftSvdMap final : public LinearMap {
 public:
  SoftSvdMap(int out, int in, SpectralBounds bounds, Rng& rng);
  LinmapKind kind() const override { return LinmapKind::SoftSvd; }
  std::vector<Param*> params() override { return {&u, &sigma, &v}; }
  bool has_reg() const override { return true; }
  Val reg_penalty(Tape& t) override;

  int rank() const { return rank_; }

  Param u;      // out x r
  Param sigma;  // r x 1
  Param v;      // r x in
  SpectralBounds bounds;

 private:
  int rank_;
  Val build(Tape& t) override;
};

// U and V are products of Householder reflectors, orthogonal by construction;
// singular values are exactly the clamped sigma entries, so no
// regularization is needed.
class HouseholderSpectralMap final : public LinearMap {
 public:
  HouseholderSpectralMap(int out, int in, SpectralBounds bounds, Rng& rng,
                         int reflectors_per_side = 0);  // 0 = matrix dimension
  LinmapKind kind() const override { return LinmapKind::Spectral; }
  std::vector<Param*> params() override;

  Matrix factor_u();
  Matrix factor_v();

  std::vector<Param> u_vectors;  // each out x 1
  std::vector<Param> v_vectors;  // each in x 1
  Param sigma;                   // r x 1
  SpectralBounds bounds;

 private:
  int rank_;
  Val build(Tape& t) override;
  Val reflect_product(Tape& t, std::vector<Param>& vecs, int dim);
};

std::unique_ptr<LinearMap> make_linmap(LinmapKind kind, int out, int in,
                                       SpectralBounds bounds, Rng& rng);

// Q factor of a standard-normal matrix, sign-corrected so diag(R) > 0.
// rows >= cols; columns are orthonormal.
Matrix orthonormal_columns(Rng& rng, int rows, int cols);

}  // namespace nssm
