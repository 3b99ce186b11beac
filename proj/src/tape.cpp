#include "ocl/tape.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <utility>

#include "ocl/errors.hpp"

namespace ocl {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(const Parameter& param) {
  nodes_.push_back(Node{param.value, {}, {}, &param});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Matrix value, Adjoint adjoint) {
  nodes_.push_back(Node{std::move(value), {}, std::move(adjoint), nullptr});
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  if (v.index >= nodes_.size()) throw StateError("variable does not belong to this tape");
  return nodes_[v.index].value;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_.at(v.index);
  if (node.grad.empty()) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::accumulate(Var v, Matrix&& g) {
  Node& node = nodes_.at(v.index);
  if (node.grad.empty()) {
    node.grad = std::move(g);
  } else {
    node.grad += g;
  }
}

GradientMap Tape::backward(Var output) {
  if (consumed_) throw StateError("backward() called twice on the same tape");
  if (output.index >= nodes_.size()) throw StateError("output does not belong to this tape");
  const Matrix& out = nodes_[output.index].value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw DimensionError(
        fmt::format("backward() needs a 1x1 output, got {}", out.shape_string()));
  }
  consumed_ = true;

  nodes_[output.index].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = output.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.adjoint) continue;
    node.adjoint(node.grad, *this);
  }

  GradientMap grads;
  for (auto& node : nodes_) {
    if (node.param == nullptr) continue;
    Matrix g = node.grad.empty() ? Matrix(node.value.rows(), node.value.cols())
                                 : std::move(node.grad);
    auto [it, inserted] = grads.try_emplace(node.param->name, std::move(g));
    if (!inserted) it->second += g;
  }
  return grads;
}

double scalar(const Tape& tape, Var v) {
  const Matrix& m = tape.value(v);
  if (m.size() != 1) {
    throw DimensionError(fmt::format("expected a scalar node, got {}", m.shape_string()));
  }
  return m(0, 0);
}

Var affine(Tape& tape, Var input, Var weight, Var bias) {
  Matrix out = affine(tape.value(input), tape.value(weight), tape.value(bias));
  return tape.record(std::move(out), [input, weight, bias](const Matrix& g, Tape& t) {
    t.accumulate(input, matmul_transposed_b(g, t.value(weight)));
    t.accumulate(weight, matmul_transposed_a(t.value(input), g));
    Matrix gb(1, g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
    }
    t.accumulate(bias, std::move(gb));
  });
}

Var relu(Tape& tape, Var input) {
  return tape.record(relu(tape.value(input)), [input](const Matrix& g, Tape& t) {
    const Matrix& x = t.value(input);
    Matrix gx = g;
    auto xv = x.values();
    auto gv = gx.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      if (!(xv[i] > 0.0)) gv[i] = 0.0;
    }
    t.accumulate(input, std::move(gx));
  });
}

Var l2_normalize_rows(Tape& tape, Var input) {
  Matrix out = l2_normalize_rows(tape.value(input));
  Var self{tape.size()};
  return tape.record(std::move(out), [input, self](const Matrix& g, Tape& t) {
    const Matrix& x = t.value(input);
    const Matrix& y = t.value(self);
    Matrix gx(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto xr = x.row(r);
      auto yr = y.row(r);
      auto gr = g.row(r);
      double norm_sq = 0.0;
      double dot = 0.0;
      for (std::size_t c = 0; c < xr.size(); ++c) {
        norm_sq += xr[c] * xr[c];
        dot += yr[c] * gr[c];
      }
      const double inv_norm = 1.0 / std::sqrt(norm_sq);
      auto out = gx.row(r);
      for (std::size_t c = 0; c < xr.size(); ++c) out[c] = (gr[c] - yr[c] * dot) * inv_norm;
    }
    t.accumulate(input, std::move(gx));
  });
}

Var concat_cols(Tape& tape, Var left, Var right) {
  Matrix out = concat_cols(tape.value(left), tape.value(right));
  const std::size_t split = tape.value(left).cols();
  return tape.record(std::move(out), [left, right, split](const Matrix& g, Tape& t) {
    Matrix gl(g.rows(), split);
    Matrix gr(g.rows(), g.cols() - split);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto src = g.row(r);
      std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(split), gl.row(r).begin());
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(split), src.end(), gr.row(r).begin());
    }
    t.accumulate(left, std::move(gl));
    t.accumulate(right, std::move(gr));
  });
}

Var gradient_reversal(Tape& tape, Var input, double scale) {
  return tape.record(tape.value(input), [input, scale](const Matrix& g, Tape& t) {
    Matrix gx = g;
    gx *= -scale;
    t.accumulate(input, std::move(gx));
  });
}

Var add(Tape& tape, Var a, Var b) {
  Matrix out = tape.value(a);
  out += tape.value(b);
  return tape.record(std::move(out), [a, b](const Matrix& g, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale(Tape& tape, Var a, double factor) {
  Matrix out = tape.value(a);
  out *= factor;
  return tape.record(std::move(out), [a, factor](const Matrix& g, Tape& t) {
    Matrix ga = g;
    ga *= factor;
    t.accumulate(a, std::move(ga));
  });
}

Var hadamard(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw DimensionError(fmt::format("hadamard shape mismatch: {} vs {}", av.shape_string(),
                                     bv.shape_string()));
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= bv.values()[i];
  return tape.record(std::move(out), [a, b](const Matrix& g, Tape& t) {
    Matrix ga = g;
    Matrix gb = g;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.values()[i] *= t.value(b).values()[i];
      gb.values()[i] *= t.value(a).values()[i];
    }
    t.accumulate(a, std::move(ga));
    t.accumulate(b, std::move(gb));
  });
}

Var sum(Tape& tape, Var a) {
  double total = 0.0;
  for (double v : tape.value(a).values()) total += v;
  return tape.record(Matrix(1, 1, total), [a](const Matrix& g, Tape& t) {
    const Matrix& av = t.value(a);
    t.accumulate(a, Matrix(av.rows(), av.cols(), g(0, 0)));
  });
}

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const std::size_t> targets) {
  const Matrix& z = tape.value(logits);
  if (targets.size() != z.rows()) {
    throw DimensionError(fmt::format("{} targets for logits {}", targets.size(),
                                     z.shape_string()));
  }
  if (z.rows() == 0) throw InsufficientBatchError("cross-entropy over an empty batch");
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (targets[r] >= z.cols()) {
      throw LabelError(fmt::format("class id {} outside [0, {})", targets[r], z.cols()));
    }
    auto row = z.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      probs(r, c) = std::exp(row[c] - mx);
      denom += probs(r, c);
    }
    for (std::size_t c = 0; c < row.size(); ++c) probs(r, c) /= denom;
    total += -(row[targets[r]] - mx - std::log(denom));
  }
  const double batch = static_cast<double>(z.rows());
  std::vector<std::size_t> ids(targets.begin(), targets.end());
  return tape.record(Matrix(1, 1, total / batch),
                     [logits, probs = std::move(probs), ids = std::move(ids), batch](
                         const Matrix& g, Tape& t) {
                       Matrix gz = probs;
                       for (std::size_t r = 0; r < ids.size(); ++r) gz(r, ids[r]) -= 1.0;
                       gz *= g(0, 0) / batch;
                       t.accumulate(logits, std::move(gz));
                     });
}

Var mean_squared_error(Tape& tape, Var prediction, const Matrix& target) {
  const Matrix& p = tape.value(prediction);
  if (p.rows() != target.rows() || p.cols() != target.cols()) {
    throw DimensionError(fmt::format("prediction {} does not match target {}",
                                     p.shape_string(), target.shape_string()));
  }
  Matrix diff = p;
  double total = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff.values()[i] -= target.values()[i];
    total += diff.values()[i] * diff.values()[i];
  }
  const double count = static_cast<double>(std::max<std::size_t>(diff.size(), 1));
  return tape.record(Matrix(1, 1, total / count),
                     [prediction, diff = std::move(diff), count](const Matrix& g, Tape& t) {
                       Matrix gp = diff;
                       gp *= 2.0 * g(0, 0) / count;
                       t.accumulate(prediction, std::move(gp));
                     });
}

}  // namespace ocl
