#include "nssm/diffcore.hpp"

#include <atomic>
#include <cmath>

namespace nssm {

namespace {

std::atomic<int> g_param_counter{0};
std::atomic<uint64_t> g_tape_counter{0};

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// C += A * B
void gemm_nn(Matrix& c, const Matrix& a, const Matrix& b) {
  const int m = a.rows(), kk = a.cols(), n = b.cols();
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  for (int i = 0; i < m; ++i) {
    double* crow = cp + static_cast<size_t>(i) * n;
    const double* arow = ap + static_cast<size_t>(i) * kk;
    for (int k = 0; k < kk; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = bp + static_cast<size_t>(k) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T
void gemm_nt(Matrix& c, const Matrix& a, const Matrix& b) {
  const int m = a.rows(), kk = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.data() + static_cast<size_t>(i) * kk;
    double* crow = c.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b.data() + static_cast<size_t>(j) * kk;
      double s = 0.0;
      for (int k = 0; k < kk; ++k) s += arow[k] * brow[k];
      crow[j] += s;
    }
  }
}

// C += A^T * B  (A is k x m, B is k x n, C is m x n)
void gemm_tn(Matrix& c, const Matrix& a, const Matrix& b) {
  const int kk = a.rows(), m = a.cols(), n = b.cols();
  double* cp = c.data();
  for (int k = 0; k < kk; ++k) {
    const double* arow = a.data() + static_cast<size_t>(k) * m;
    const double* brow = b.data() + static_cast<size_t>(k) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = cp + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy(Matrix& y, double alpha, const Matrix& x) {
  double* yp = y.data();
  const double* xp = x.data();
  const size_t n = y.size();
  for (size_t i = 0; i < n; ++i) yp[i] += alpha * xp[i];
}

double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

}  // namespace

Param::Param(Matrix v, std::string n)
    : value(std::move(v)), grad(value.rows(), value.cols()), id(g_param_counter++), name(std::move(n)) {}

void Param::zero_grad() { grad = Matrix(value.rows(), value.cols()); }

const Matrix& Val::value() const { return tape->value(*this); }
int Val::rows() const { return value().rows(); }
int Val::cols() const { return value().cols(); }
double Val::scalar() const {
  const Matrix& m = value();
  if (m.rows() != 1 || m.cols() != 1) throw ShapeError("Val::scalar: node is " + m.shape_str());
  return m(0, 0);
}

Tape::Tape() : generation_(++g_tape_counter) {}

void Tape::check(Val v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("Tape: Val belongs to a different tape");
}

int Tape::push(Node n, const char* opname) {
  if (!n.value.all_finite())
    throw NumericError(std::string("non-finite result in op ") + opname);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Val Tape::make(Op op, int a, int b, Matrix value, const char* opname) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.value = std::move(value);
  return {this, push(std::move(n), opname)};
}

Val Tape::param(Param& p) {
  if (!p.value.all_finite()) throw NumericError("param '" + p.name + "' holds non-finite values");
  Node n;
  n.op = Op::Leaf;
  n.value = p.value;
  n.leaf = &p;
  return {this, push(std::move(n), "param")};
}

Val Tape::constant(Matrix m) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(m);
  return {this, push(std::move(n), "constant")};
}

Val Tape::constant_scalar(double v) { return constant(Matrix::scalar(v)); }

Val Tape::matmul(Val a, Val b) {
  check(a);
  check(b);
  const Matrix& av = val_of(a.id);
  const Matrix& bv = val_of(b.id);
  if (av.cols() != bv.rows())
    throw ShapeError("matmul: " + av.shape_str() + " * " + bv.shape_str());
  Matrix c(av.rows(), bv.cols());
  gemm_nn(c, av, bv);
  return make(Op::MatMul, a.id, b.id, std::move(c), "matmul");
}

Val Tape::add(Val a, Val b) {
  check(a);
  check(b);
  const Matrix& av = val_of(a.id);
  const Matrix& bv = val_of(b.id);
  if (!av.same_shape(bv)) throw ShapeError("add: " + av.shape_str() + " + " + bv.shape_str());
  Matrix c = av;
  axpy(c, 1.0, bv);
  return make(Op::Add, a.id, b.id, std::move(c), "add");
}

Val Tape::sub(Val a, Val b) {
  check(a);
  check(b);
  const Matrix& av = val_of(a.id);
  const Matrix& bv = val_of(b.id);
  if (!av.same_shape(bv)) throw ShapeError("sub: " + av.shape_str() + " - " + bv.shape_str());
  Matrix c = av;
  axpy(c, -1.0, bv);
  return make(Op::Sub, a.id, b.id, std::move(c), "sub");
}

Val Tape::add_col(Val a, Val b) {
  check(a);
  check(b);
  const Matrix& av = val_of(a.id);
  const Matrix& bv = val_of(b.id);
  if (bv.cols() != 1 || bv.rows() != av.rows())
    throw ShapeError("add_col: " + av.shape_str() + " + " + bv.shape_str());
  Matrix c = av;
  for (int i = 0; i < c.rows(); ++i) {
    const double bi = bv(i, 0);
    for (int j = 0; j < c.cols(); ++j) c(i, j) += bi;
  }
  return make(Op::AddCol, a.id, b.id, std::move(c), "add_col");
}

Val Tape::hadamard(Val a, Val b) {
  check(a);
  check(b);
  const Matrix& av = val_of(a.id);
  const Matrix& bv = val_of(b.id);
  if (!av.same_shape(bv)) throw ShapeError("hadamard: " + av.shape_str() + " . " + bv.shape_str());
  Matrix c = av;
  double* cp = c.data();
  const double* bp = bv.data();
  for (size_t i = 0; i < c.size(); ++i) cp[i] *= bp[i];
  return make(Op::Hadamard, a.id, b.id, std::move(c), "hadamard");
}

Val Tape::scale(Val a, double s) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] *= s;
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.c = s;
  n.value = std::move(c);
  return {this, push(std::move(n), "scale")};
}

Val Tape::add_scalar(Val a, double s) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] += s;
  Node n;
  n.op = Op::AddScalar;
  n.a = a.id;
  n.c = s;
  n.value = std::move(c);
  return {this, push(std::move(n), "add_scalar")};
}

Val Tape::scalar_mul(Val s, Val a) {
  check(s);
  check(a);
  const Matrix& sv = val_of(s.id);
  if (sv.rows() != 1 || sv.cols() != 1) throw ShapeError("scalar_mul: scalar is " + sv.shape_str());
  Matrix c = val_of(a.id);
  const double sc = sv(0, 0);
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] *= sc;
  return make(Op::ScalarMul, s.id, a.id, std::move(c), "scalar_mul");
}

Val Tape::transpose(Val a) {
  check(a);
  const Matrix& av = val_of(a.id);
  Matrix c(av.cols(), av.rows());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) c(j, i) = av(i, j);
  return make(Op::Transpose, a.id, -1, std::move(c), "transpose");
}

Val Tape::concat_rows(const std::vector<Val>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty");
  int cols = -1, rows = 0;
  for (Val p : parts) {
    check(p);
    const Matrix& v = val_of(p.id);
    if (cols < 0) cols = v.cols();
    if (v.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += v.rows();
  }
  Matrix c(rows, cols);
  int r = 0;
  Node n;
  n.op = Op::ConcatRows;
  for (Val p : parts) {
    const Matrix& v = val_of(p.id);
    for (int i = 0; i < v.rows(); ++i)
      for (int j = 0; j < cols; ++j) c(r + i, j) = v(i, j);
    r += v.rows();
    n.parts.push_back(p.id);
  }
  n.value = std::move(c);
  return {this, push(std::move(n), "concat_rows")};
}

Val Tape::concat_cols(const std::vector<Val>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty");
  int rows = -1, cols = 0;
  for (Val p : parts) {
    check(p);
    const Matrix& v = val_of(p.id);
    if (rows < 0) rows = v.rows();
    if (v.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += v.cols();
  }
  Matrix c(rows, cols);
  int off = 0;
  Node n;
  n.op = Op::ConcatCols;
  for (Val p : parts) {
    const Matrix& v = val_of(p.id);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < v.cols(); ++j) c(i, off + j) = v(i, j);
    off += v.cols();
    n.parts.push_back(p.id);
  }
  n.value = std::move(c);
  return {this, push(std::move(n), "concat_cols")};
}

Val Tape::slice_rows(Val a, int r0, int nrows) {
  check(a);
  const Matrix& av = val_of(a.id);
  if (r0 < 0 || nrows < 1 || r0 + nrows > av.rows()) throw ShapeError("slice_rows: out of range");
  Matrix c(nrows, av.cols());
  for (int i = 0; i < nrows; ++i)
    for (int j = 0; j < av.cols(); ++j) c(i, j) = av(r0 + i, j);
  Node n;
  n.op = Op::SliceRows;
  n.a = a.id;
  n.i0 = r0;
  n.i1 = nrows;
  n.value = std::move(c);
  return {this, push(std::move(n), "slice_rows")};
}

Val Tape::slice_cols(Val a, int c0, int ncols) {
  check(a);
  const Matrix& av = val_of(a.id);
  if (c0 < 0 || ncols < 1 || c0 + ncols > av.cols()) throw ShapeError("slice_cols: out of range");
  Matrix c(av.rows(), ncols);
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < ncols; ++j) c(i, j) = av(i, c0 + j);
  Node n;
  n.op = Op::SliceCols;
  n.a = a.id;
  n.i0 = c0;
  n.i1 = ncols;
  n.value = std::move(c);
  return {this, push(std::move(n), "slice_cols")};
}

Val Tape::sigmoid(Val a) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] = 1.0 / (1.0 + std::exp(-c.data()[i]));
  return make(Op::Sigmoid, a.id, -1, std::move(c), "sigmoid");
}

Val Tape::exp(Val a) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] = std::exp(c.data()[i]);
  return make(Op::Exp, a.id, -1, std::move(c), "exp");
}

Val Tape::sqrt(Val a) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) {
    if (c.data()[i] < 0.0) throw NumericError("sqrt of negative value");
    c.data()[i] = std::sqrt(c.data()[i]);
  }
  return make(Op::Sqrt, a.id, -1, std::move(c), "sqrt");
}

Val Tape::reciprocal(Val a) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] = 1.0 / c.data()[i];
  return make(Op::Reciprocal, a.id, -1, std::move(c), "reciprocal");
}

Val Tape::relu(Val a) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) c.data()[i] = c.data()[i] > 0.0 ? c.data()[i] : 0.0;
  return make(Op::Relu, a.id, -1, std::move(c), "relu");
}

Val Tape::gelu(Val a) {
  check(a);
  Matrix c = val_of(a.id);
  for (size_t i = 0; i < c.size(); ++i) {
    const double x = c.data()[i];
    c.data()[i] = x * norm_cdf(x);
  }
  return make(Op::Gelu, a.id, -1, std::move(c), "gelu");
}

Val Tape::softmax_rows(Val a) {
  check(a);
  const Matrix& av = val_of(a.id);
  Matrix c(av.rows(), av.cols());
  for (int i = 0; i < av.rows(); ++i) {
    double mx = av(i, 0);
    for (int j = 1; j < av.cols(); ++j) mx = std::max(mx, av(i, j));
    double s = 0.0;
    for (int j = 0; j < av.cols(); ++j) {
      c(i, j) = std::exp(av(i, j) - mx);
      s += c(i, j);
    }
    for (int j = 0; j < av.cols(); ++j) c(i, j) /= s;
  }
  return make(Op::SoftmaxRows, a.id, -1, std::move(c), "softmax_rows");
}

Val Tape::sum(Val a) {
  check(a);
  const Matrix& av = val_of(a.id);
  double s = 0.0;
  for (size_t i = 0; i < av.size(); ++i) s += av.data()[i];
  return make(Op::Sum, a.id, -1, Matrix::scalar(s), "sum");
}

Val Tape::embed_diag(Val v, int rows, int cols) {
  check(v);
  const Matrix& vv = val_of(v.id);
  if (vv.cols() != 1) throw ShapeError("embed_diag: expected column vector, got " + vv.shape_str());
  const int r = vv.rows();
  if (r > rows || r > cols) throw ShapeError("embed_diag: vector longer than diagonal");
  Matrix c(rows, cols);
  for (int i = 0; i < r; ++i) c(i, i) = vv(i, 0);
  Node n;
  n.op = Op::EmbedDiag;
  n.a = v.id;
  n.i0 = rows;
  n.i1 = cols;
  n.value = std::move(c);
  return {this, push(std::move(n), "embed_diag")};
}

Val Tape::mean(Val a) {
  check(a);
  const size_t n = val_of(a.id).size();
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Val Tape::frobenius(Val a) { return sqrt(sum(hadamard(a, a))); }

const Matrix& Tape::value(Val v) const {
  check(v);
  return nodes_[v.id].value;
}

void Tape::backward(Val root) {
  check(root);
  if (consumed_) throw std::logic_error("Tape::backward: tape already consumed");
  const Matrix& rv = val_of(root.id);
  if (rv.rows() != 1 || rv.cols() != 1)
    throw ShapeError("backward: root must be scalar, got " + rv.shape_str());
  consumed_ = true;

  // Lazy gradient buffers: a node never reached from the root keeps an
  // empty buffer and contributes exactly zero.
  std::vector<Matrix> g(nodes_.size());
  auto touch = [&](int id) -> Matrix& {
    if (g[id].size() == 0) g[id] = Matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
    return g[id];
  };
  touch(root.id)(0, 0) = 1.0;

  for (int id = root.id; id >= 0; --id) {
    if (g[id].size() == 0) continue;
    const Node& n = nodes_[id];
    const Matrix& gd = g[id];
    switch (n.op) {
      case Op::Leaf:
        axpy(n.leaf->grad, 1.0, gd);
        break;
      case Op::Const:
        break;
      case Op::MatMul:
        gemm_nt(touch(n.a), gd, nodes_[n.b].value);
        gemm_tn(touch(n.b), nodes_[n.a].value, gd);
        break;
      case Op::Add:
        axpy(touch(n.a), 1.0, gd);
        axpy(touch(n.b), 1.0, gd);
        break;
      case Op::Sub:
        axpy(touch(n.a), 1.0, gd);
        axpy(touch(n.b), -1.0, gd);
        break;
      case Op::AddCol: {
        axpy(touch(n.a), 1.0, gd);
        Matrix& gb = touch(n.b);
        for (int i = 0; i < gd.rows(); ++i) {
          double s = 0.0;
          for (int j = 0; j < gd.cols(); ++j) s += gd(i, j);
          gb(i, 0) += s;
        }
        break;
      }
      case Op::Hadamard: {
        Matrix& ga = touch(n.a);
        Matrix& gb = touch(n.b);
        const Matrix& av = nodes_[n.a].value;
        const Matrix& bv = nodes_[n.b].value;
        for (size_t i = 0; i < gd.size(); ++i) {
          ga.data()[i] += gd.data()[i] * bv.data()[i];
          gb.data()[i] += gd.data()[i] * av.data()[i];
        }
        break;
      }
      case Op::Scale:
        axpy(touch(n.a), n.c, gd);
        break;
      case Op::AddScalar:
        axpy(touch(n.a), 1.0, gd);
        break;
      case Op::ScalarMul: {
        const double sc = nodes_[n.a].value(0, 0);
        axpy(touch(n.b), sc, gd);
        const Matrix& bv = nodes_[n.b].value;
        double s = 0.0;
        for (size_t i = 0; i < gd.size(); ++i) s += gd.data()[i] * bv.data()[i];
        touch(n.a)(0, 0) += s;
        break;
      }
      case Op::Transpose: {
        Matrix& ga = touch(n.a);
        for (int i = 0; i < gd.rows(); ++i)
          for (int j = 0; j < gd.cols(); ++j) ga(j, i) += gd(i, j);
        break;
      }
      case Op::ConcatRows: {
        int r = 0;
        for (int pid : n.parts) {
          Matrix& gp = touch(pid);
          for (int i = 0; i < gp.rows(); ++i)
            for (int j = 0; j < gp.cols(); ++j) gp(i, j) += gd(r + i, j);
          r += gp.rows();
        }
        break;
      }
      case Op::ConcatCols: {
        int off = 0;
        for (int pid : n.parts) {
          Matrix& gp = touch(pid);
          for (int i = 0; i < gp.rows(); ++i)
            for (int j = 0; j < gp.cols(); ++j) gp(i, j) += gd(i, off + j);
          off += gp.cols();
        }
        break;
      }
      case Op::SliceRows: {
        Matrix& ga = touch(n.a);
        for (int i = 0; i < n.i1; ++i)
          for (int j = 0; j < gd.cols(); ++j) ga(n.i0 + i, j) += gd(i, j);
        break;
      }
      case Op::SliceCols: {
        Matrix& ga = touch(n.a);
        for (int i = 0; i < gd.rows(); ++i)
          for (int j = 0; j < n.i1; ++j) ga(i, n.i0 + j) += gd(i, j);
        break;
      }
      case Op::Sigmoid: {
        Matrix& ga = touch(n.a);
        const Matrix& y = n.value;
        for (size_t i = 0; i < gd.size(); ++i) {
          const double yi = y.data()[i];
          ga.data()[i] += gd.data()[i] * yi * (1.0 - yi);
        }
        break;
      }
      case Op::Exp: {
        Matrix& ga = touch(n.a);
        for (size_t i = 0; i < gd.size(); ++i) ga.data()[i] += gd.data()[i] * n.value.data()[i];
        break;
      }
      case Op::Sqrt: {
        Matrix& ga = touch(n.a);
        for (size_t i = 0; i < gd.size(); ++i)
          ga.data()[i] += gd.data()[i] * 0.5 / n.value.data()[i];
        break;
      }
      case Op::Reciprocal: {
        Matrix& ga = touch(n.a);
        for (size_t i = 0; i < gd.size(); ++i) {
          const double y = n.value.data()[i];
          ga.data()[i] -= gd.data()[i] * y * y;
        }
        break;
      }
      case Op::Relu: {
        Matrix& ga = touch(n.a);
        const Matrix& x = nodes_[n.a].value;
        for (size_t i = 0; i < gd.size(); ++i)
          if (x.data()[i] > 0.0) ga.data()[i] += gd.data()[i];
        break;
      }
      case Op::Gelu: {
        Matrix& ga = touch(n.a);
        const Matrix& x = nodes_[n.a].value;
        for (size_t i = 0; i < gd.size(); ++i) {
          const double xi = x.data()[i];
          ga.data()[i] += gd.data()[i] * (norm_cdf(xi) + xi * norm_pdf(xi));
        }
        break;
      }
      case Op::SoftmaxRows: {
        Matrix& ga = touch(n.a);
        const Matrix& y = n.value;
        for (int i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (int j = 0; j < y.cols(); ++j) dot += gd(i, j) * y(i, j);
          for (int j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (gd(i, j) - dot);
        }
        break;
      }
      case Op::Sum: {
        Matrix& ga = touch(n.a);
        const double gs = gd(0, 0);
        for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += gs;
        break;
      }
      case Op::EmbedDiag: {
        Matrix& ga = touch(n.a);
        for (int i = 0; i < ga.rows(); ++i) ga(i, 0) += gd(i, i);
        break;
      }
    }
  }
}

}  // namespace nssm
