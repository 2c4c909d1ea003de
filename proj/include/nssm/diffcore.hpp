#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nssm/matrix.hpp"

namespace nssm {

/// A trainable matrix with its accumulated gradient. Gradients persist
/// across tapes until zero_grad(); the optimizer consumes them in place.
struct Param {
  Matrix value;
  Matrix grad;
  int id = -1;
  std::string name;

  Param() = default;
  explicit Param(Matrix v, std::string n = "");

  void zero_grad();
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Val {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& value() const;
  int rows() const;
  int cols() const;
  /// Scalar payload of a 1x1 node.
  double scalar() const;
};

/// Define-by-run reverse-mode tape over dense matrices. Records every
/// primitive as it executes; backward() replays the record in exact
/// reverse order, accumulating into each Param's grad. One tape per
/// training step, single-threaded; independent tapes never share state.
///
/// Every op validates operand shapes and rejects non-finite results, so
/// NaN/Inf surfaces at the op that produced it rather than in the loss.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Monotone id distinguishing this tape from all earlier ones; linear
  /// maps use it to memoize their effective matrix per tape.
  uint64_t generation() const { return generation_; }

  Val param(Param& p);
  Val constant(Matrix m);
  Val constant_scalar(double v);

  Val matmul(Val a, Val b);
  Val add(Val a, Val b);
  Val sub(Val a, Val b);
  /// a (m x n) plus column vector b (m x 1) broadcast over columns.
  Val add_col(Val a, Val b);
  Val hadamard(Val a, Val b);
  Val scale(Val a, double c);
  Val add_scalar(Val a, double c);
  /// Broadcast multiply by a 1x1 node (learnable scalar).
  Val scalar_mul(Val s, Val a);
  Val transpose(Val a);
  Val concat_rows(const std::vector<Val>& parts);
  Val concat_cols(const std::vector<Val>& parts);
  Val slice_rows(Val a, int r0, int n);
  Val slice_cols(Val a, int c0, int n);

  Val sigmoid(Val a);
  Val exp(Val a);
  Val sqrt(Val a);
  Val reciprocal(Val a);
  /// max(0, x); subgradient at 0 is 0.
  Val relu(Val a);
  /// Exact erf-based GELU: x * Phi(x).
  Val gelu(Val a);
  Val softmax_rows(Val a);
  Val sum(Val a);
  /// r x 1 vector embedded on the main diagonal of a rows x cols zero matrix.
  Val embed_diag(Val v, int rows, int cols);

  // Composites of the primitives above.
  Val mean(Val a);
  Val frobenius(Val a);

  /// Accumulates d(root)/d(param) into every reachable Param's grad.
  /// root must be 1x1; a tape can only be differentiated once.
  void backward(Val root);

  const Matrix& value(Val v) const;
  size_t num_nodes() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    Leaf, Const,
    MatMul, Add, Sub, AddCol, Hadamard, Scale, AddScalar, ScalarMul,
    Transpose, ConcatRows, ConcatCols, SliceRows, SliceCols,
    Sigmoid, Exp, Sqrt, Reciprocal, Relu, Gelu, SoftmaxRows,
    Sum, EmbedDiag
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c = 0.0;            // scalar for Scale/AddScalar
    int i0 = 0, i1 = 0;        // slice offset/extent or embed dims
    std::vector<int> parts;    // concat inputs
    Matrix value;
    Param* leaf = nullptr;
  };

  int push(Node n, const char* opname);
  Val make(Op op, int a, int b, Matrix value, const char* opname);
  const Matrix& val_of(int id) const { return nodes_[id].value; }
  void check(Val v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
  uint64_t generation_ = 0;
};

}  // namespace nssm
