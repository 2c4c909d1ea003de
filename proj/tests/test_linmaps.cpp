#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nssm/linmaps.hpp"
#include "support/fd_check.hpp"
#include "support/oracles.hpp"

using namespace nssm;
using namespace nssm::testing;

TEST_CASE("pf map collapses to midpoint for n=1, M=0") {
  Rng rng(1);
  PerronFrobeniusMap map(1, SpectralBounds(0.0, 1.0), rng);
  map.w.value(0, 0) = 3.7;
  map.m.value(0, 0) = 0.0;
  CHECK(map.effective_value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pf row sums stay inside the eigenvalue bounds") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    PerronFrobeniusMap map(5, SpectralBounds(0.99, 1.0), rng);
    map.w.value = rng.normal_matrix(5, 5);
    map.m.value = rng.normal_matrix(5, 5);
    Matrix e = map.effective_value();
    for (int i = 0; i < 5; ++i) {
      double row = 0.0;
      for (int j = 0; j < 5; ++j) {
        CHECK(e(i, j) > 0.0);
        row += e(i, j);
      }
      CHECK(row >= 0.99 - 1e-9);
      CHECK(row <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("pf dominant eigenvalue obeys bounds per power iteration") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    PerronFrobeniusMap map(5, SpectralBounds(0.2, 0.8), rng);
    map.w.value = rng.uniform_matrix(5, 5, -3.0, 3.0);
    map.m.value = rng.uniform_matrix(5, 5, -3.0, 3.0);
    const double lam = power_iteration_dominant(map.effective_value());
    CHECK(lam >= 0.2 - 1e-9);
    CHECK(lam <= 0.8 + 1e-8);
  }
}

TEST_CASE("softmax rows of pf weight sum to one") {
  Rng rng(4);
  PerronFrobeniusMap map(4, SpectralBounds(0.0, 1.0), rng);
  Tape t;
  const Matrix& sm = t.softmax_rows(t.param(map.w)).value();
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += sm(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("soft svd with identity factors and zero sigma is half identity") {
  Rng rng(5);
  SoftSvdMap map(3, 3, SpectralBounds(0.0, 1.0), rng);
  map.u.value = Matrix::identity(3);
  map.v.value = Matrix::identity(3);
  map.sigma.value = Matrix(3, 1);
  Matrix e = map.effective_value();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(e(i, j) == doctest::Approx(i == j ? 0.5 : 0.0).epsilon(1e-12));
}

TEST_CASE("soft svd singular values saturate to lambda_min as sigma grows") {
  Rng rng(6);
  SoftSvdMap map(4, 4, SpectralBounds(0.3, 0.9), rng);
  map.sigma.value = Matrix::constant(4, 1, 40.0);
  for (double s : jacobi_singular_values(map.effective_value()))
    CHECK(s == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("soft svd singular values live in the bounds at orthogonal init") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    SoftSvdMap map(5, 5, SpectralBounds(0.4, 0.7), rng);
    map.sigma.value = rng.uniform_matrix(5, 1, -4.0, 4.0);
    for (double s : jacobi_singular_values(map.effective_value())) {
      CHECK(s >= 0.4 - 1e-8);
      CHECK(s <= 0.7 + 1e-8);
    }
  }
}

TEST_CASE("soft svd penalty is zero at orthogonality and 6*sqrt(2) for U=2I") {
  Rng rng(8);
  SoftSvdMap map(2, 2, SpectralBounds(0.0, 1.0), rng);
  {
    Tape t;
    CHECK(map.reg_penalty(t).scalar() < 1e-10);
  }
  map.u.value = Matrix::identity(2);
  map.u.value(0, 0) = 2.0;
  map.u.value(1, 1) = 2.0;
  map.v.value = Matrix::identity(2);
  {
    Tape t;
    CHECK(map.reg_penalty(t).scalar() == doctest::Approx(6.0 * std::sqrt(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("soft svd penalty gradient matches finite differences") {
  Rng rng(9);
  SoftSvdMap map(3, 3, SpectralBounds(0.0, 1.0), rng);
  map.u.value = rng.uniform_matrix(3, 3, -1.0, 1.0);
  map.v.value = rng.uniform_matrix(3, 3, -1.0, 1.0);
  map.u.zero_grad();
  map.v.zero_grad();
  {
    Tape t;
    t.backward(map.reg_penalty(t));
  }
  auto fwd = [&]() {
    Tape t;
    return map.reg_penalty(t).scalar();
  };
  CHECK(fd_check(map.u, fwd).max_rel_err < 1e-4);
  CHECK(fd_check(map.v, fwd).max_rel_err < 1e-4);
}

TEST_CASE("single householder reflector on e1 flips the first axis") {
  Rng rng(10);
  HouseholderSpectralMap map(3, 3, SpectralBounds(0.0, 1.0), rng, 1);
  map.u_vectors[0].value = Matrix(3, 1);
  map.u_vectors[0].value(0, 0) = 1.0;
  Matrix u = map.factor_u();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double expect = (i == j) ? (i == 0 ? -1.0 : 1.0) : 0.0;
      CHECK(u(i, j) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("householder factors are orthogonal to 1e-10 without training") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    HouseholderSpectralMap map(6, 4, SpectralBounds(0.1, 0.9), rng);
    CHECK(orthogonality_error(map.factor_u()) < 1e-10);
    CHECK(orthogonality_error(map.factor_v()) < 1e-10);
  }
}

TEST_CASE("householder spectral singular values match the bounds exactly") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    HouseholderSpectralMap map(5, 5, SpectralBounds(0.4, 0.7), rng);
    map.sigma.value = rng.uniform_matrix(5, 1, -4.0, 4.0);
    for (double s : jacobi_singular_values(map.effective_value())) {
      CHECK(s >= 0.4 - 1e-8);
      CHECK(s <= 0.7 + 1e-8);
    }
  }
}

TEST_CASE("householder map gradients match finite differences") {
  Rng rng(13);
  HouseholderSpectralMap map(3, 3, SpectralBounds(0.2, 0.8), rng, 2);
  // Distinct singular values plus a random linear functional: with equal
  // singular values the whole map is 0.5*U*V and a norm loss would be
  // constant in every reflector (gradient exactly zero, fd pure noise).
  map.sigma.value = rng.uniform_matrix(3, 1, -2.0, 2.0);
  Matrix x = rng.uniform_matrix(3, 2, -1.0, 1.0);
  Matrix r = rng.uniform_matrix(3, 2, -1.0, 1.0);
  auto loss = [&](Tape& t) {
    return t.sum(t.hadamard(map.apply(t, t.constant(x)), t.constant(r)));
  };
  for (Param* p : map.params()) p->zero_grad();
  {
    Tape t;
    t.backward(loss(t));
  }
  auto fwd = [&]() {
    Tape t;
    return loss(t).scalar();
  };
  for (Param* p : map.params()) CHECK(fd_check(*p, fwd).max_rel_err < 1e-4);
}

TEST_CASE("zero-norm reflector is rejected") {
  Rng rng(14);
  HouseholderSpectralMap map(3, 3, SpectralBounds(0.0, 1.0), rng, 1);
  map.u_vectors[0].value = Matrix(3, 1);
  CHECK_THROWS_AS(map.effective_value(), NumericError);
}

TEST_CASE("eigenvalues of identity and rotation") {
  Rng rng(15);
  DenseMap ident(3, 3, rng);
  ident.w.value = Matrix::identity(3);
  for (const auto& ev : ident.eigenvalues()) {
    CHECK(ev.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }

  DenseMap rot(2, 2, rng);
  rot.w.value = Matrix(2, 2);
  rot.w.value(0, 1) = 1.0;
  rot.w.value(1, 0) = -1.0;
  auto evs = rot.eigenvalues();
  CHECK(std::abs(evs[0].imag()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(evs[1].imag()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(evs[0].real() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pf eigenvalues from the export path stay under the upper bound") {
  Rng rng(16);
  PerronFrobeniusMap map(5, SpectralBounds(0.2, 0.8), rng);
  map.w.value = rng.normal_matrix(5, 5);
  map.m.value = rng.normal_matrix(5, 5);
  for (const auto& ev : map.eigenvalues()) CHECK(std::abs(ev) <= 0.8 + 1e-8);
}

TEST_CASE("eigenvalues of a rectangular map are rejected") {
  Rng rng(17);
  DenseMap map(3, 4, rng);
  CHECK_THROWS_AS(map.eigenvalues(), ShapeError);
}

TEST_CASE("all map kinds share shapes behind the interface") {
  Rng rng(18);
  const SpectralBounds b(0.2, 0.8);
  for (LinmapKind kind : {LinmapKind::Dense, LinmapKind::PerronFrobenius, LinmapKind::SoftSvd,
                          LinmapKind::Spectral}) {
    auto map = make_linmap(kind, 4, 4, b, rng);
    Matrix e = map->effective_value();
    CHECK(e.rows() == 4);
    CHECK(e.cols() == 4);
    Tape t;
    Val y = map->apply(t, t.constant(Matrix::constant(4, 2, 0.3)));
    CHECK(y.rows() == 4);
    CHECK(y.cols() == 2);
  }
}

TEST_CASE("pf map must be square through the factory") {
  Rng rng(19);
  CHECK_THROWS_AS(make_linmap(LinmapKind::PerronFrobenius, 3, 4, SpectralBounds(0.0, 1.0), rng),
                  ShapeError);
}

TEST_CASE("effective matrix is memoized within one tape") {
  Rng rng(20);
  PerronFrobeniusMap map(3, SpectralBounds(0.0, 1.0), rng);
  Tape t;
  Val a = map.effective(t);
  Val b = map.effective(t);
  CHECK(a.id == b.id);
  Tape t2;
  Val c = map.effective(t2);
  CHECK(c.tape == &t2);
}

TEST_CASE("memoized reuse still accumulates gradients from all uses") {
  Rng rng(21);
  PerronFrobeniusMap map(2, SpectralBounds(0.0, 1.0), rng);
  Matrix x = rng.uniform_matrix(2, 1, -1.0, 1.0);
  auto loss = [&](Tape& t) {
    Val once = map.apply(t, t.constant(x));
    Val twice = map.apply(t, once);
    return t.sum(t.add(once, twice));
  };
  for (Param* p : map.params()) p->zero_grad();
  {
    Tape t;
    t.backward(loss(t));
  }
  auto fwd = [&]() {
    Tape t;
    return loss(t).scalar();
  };
  CHECK(fd_check(map.w, fwd).max_rel_err < 1e-4);
  CHECK(fd_check(map.m, fwd).max_rel_err < 1e-4);
}

TEST_CASE("orthonormal init is deterministic and orthogonal") {
  Rng r1(22), r2(22);
  Matrix q1 = orthonormal_columns(r1, 6, 3);
  Matrix q2 = orthonormal_columns(r2, 6, 3);
  CHECK(fnv1a_bytes(q1) == fnv1a_bytes(q2));
  CHECK(orthogonality_error(q1) < 1e-12);
}

TEST_CASE("spectral bounds validate ordering") {
  CHECK_THROWS_AS(SpectralBounds(0.8, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(SpectralBounds(-0.1, 0.5), std::invalid_argument);
}
