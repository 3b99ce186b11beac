#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ocl/matrix.hpp"

namespace ocl {

/// A trainable matrix. Names are unique within a model ("encoder.layer1.weight")
/// and key the gradient map.
struct Parameter {
  std::string name;
  Matrix value;
  bool decay = true;  // decoupled weight decay applies (weights yes, biases no)
};

using GradientMap = std::map<std::string, Matrix>;

/// Handle to a node on a Tape.
struct Var {
  std::size_t index = 0;
};

/// Reverse-mode record of matrix-valued primitives.
///
/// Forward ops append nodes; backward() replays adjoints in reverse order once.
/// A tape is a single-threaded unit of work. Parameters registered with
/// parameter() must outlive the tape.
class Tape {
 public:
  using Adjoint = std::function<void(const Matrix& out_grad, Tape& tape)>;

  Var constant(Matrix value);
  Var parameter(const Parameter& param);
  Var record(Matrix value, Adjoint adjoint);

  const Matrix& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Adds g into the gradient slot of v. Only meaningful inside an adjoint.
  void accumulate(Var v, const Matrix& g);
  void accumulate(Var v, Matrix&& g);

  /// Seeds d(output)/d(output) = 1 and returns gradients for every parameter
  /// registered on this tape (zero when unreachable). Throws StateError on a
  /// second call.
  GradientMap backward(Var output);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Adjoint adjoint;
    const Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Differentiable primitives.

Var affine(Tape& tape, Var input, Var weight, Var bias);
Var relu(Tape& tape, Var input);
Var l2_normalize_rows(Tape& tape, Var input);
Var concat_cols(Tape& tape, Var left, Var right);
/// Identity forward; backward multiplies the incoming gradient by -scale.
Var gradient_reversal(Tape& tape, Var input, double scale);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var hadamard(Tape& tape, Var a, Var b);
/// Sum of all entries as a 1x1 node.
Var sum(Tape& tape, Var a);
/// Mean softmax cross-entropy of logits[B x C] against class ids.
Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const std::size_t> targets);
/// Mean squared error averaged over every entry.
Var mean_squared_error(Tape& tape, Var prediction, const Matrix& target);

double scalar(const Tape& tape, Var v);

}  // namespace ocl
