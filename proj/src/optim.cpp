#include "degfair/optim.hpp"

#include <cmath>

#include "degfair/errors.hpp"

namespace degfair::ad {

void adam_step(std::span<Tensor* const> params, OptimState& state) {
  for (const Tensor* p : params) {
    if (!p->grad.has_value()) throw StateError("adam_step: parameter has no gradient");
    if (!p->grad->same_shape(p->value)) throw StateError("adam_step: gradient shape mismatch");
  }
  if (state.step == 0) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->value.rows(), p->value.cols());
      state.second_moment.emplace_back(p->value.rows(), p->value.cols());
    }
  } else {
    if (state.first_moment.size() != params.size()) {
      throw StateError("adam_step: parameter count changed between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!state.first_moment[i].same_shape(params[i]->value)) {
        throw StateError("adam_step: moment buffer shape mismatch");
      }
    }
  }

  ++state.step;
  const AdamOptions& o = state.options;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = params[i]->value;
    const Matrix& g = *params[i]->grad;
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      value[k] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace degfair::ad
