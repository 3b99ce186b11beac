#include "ocl/optimizer.hpp"

#include <fmt/format.h>

#include <cmath>

#include "ocl/errors.hpp"

namespace ocl {

void AdamW::step(std::span<Parameter* const> params, const GradientMap& grads) {
  // Validate everything first so a bad gradient leaves all parameters untouched.
  for (const Parameter* p : params) {
    auto it = grads.find(p->name);
    if (it == grads.end()) continue;
    const Matrix& g = it->second;
    if (g.rows() != p->value.rows() || g.cols() != p->value.cols()) {
      throw DimensionError(fmt::format("gradient {} does not match parameter '{}' {}",
                                       g.shape_string(), p->name, p->value.shape_string()));
    }
    if (!g.all_finite()) {
      throw NumericError(fmt::format("non-finite gradient for parameter '{}'", p->name));
    }
  }

  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);

  for (Parameter* p : params) {
    auto& m = first_[p->name];
    auto& v = second_[p->name];
    if (m.empty()) {
      m = Matrix(p->value.rows(), p->value.cols());
      v = Matrix(p->value.rows(), p->value.cols());
    }
    auto it = grads.find(p->name);
    const Matrix* g = it == grads.end() ? nullptr : &it->second;

    auto w = p->value.values();
    auto mv = m.values();
    auto vv = v.values();
    const double decay = p->decay ? options_.lr * options_.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g ? g->values()[i] : 0.0;
      w[i] -= decay * w[i];
      mv[i] = options_.beta1 * mv[i] + (1.0 - options_.beta1) * gi;
      vv[i] = options_.beta2 * vv[i] + (1.0 - options_.beta2) * gi * gi;
      const double m_hat = mv[i] / correction1;
      const double v_hat = vv[i] / correction2;
      w[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

}  // namespace ocl
