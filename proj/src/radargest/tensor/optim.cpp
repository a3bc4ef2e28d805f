#include "radargest/tensor/optim.hpp"

#include <cmath>

#include "radargest/common/error.hpp"

namespace radargest::tensor {

AdamState make_adam(const ParamStore& params, std::vector<std::string> trainable, const AdamOptions& options) {
  require(options.lr > 0.0, "learning rate must be positive");
  require(options.beta1 >= 0.0 && options.beta1 < 1.0 && options.beta2 >= 0.0 && options.beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  AdamState s;
  s.options = options;
  s.trainable = std::move(trainable);
  for (const auto& name : s.trainable) {
    const Tensor& p = params.get(name);
    s.m.add(name, Tensor(p.shape()));
    s.v.add(name, Tensor(p.shape()));
  }
  return s;
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
  for (const auto& name : state.trainable) {
    if (!grads.contains(name)) fail(ErrorCode::kState, "missing gradient for parameter '" + name + "'");
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (const auto& name : state.trainable) {
    Tensor& p = params.get(name);
    const Tensor& g = grads.get(name);
    Tensor& m = state.m.get(name);
    Tensor& v = state.v.get(name);
    if (g.shape() != p.shape()) {
      throw Error(ErrorCode::kShape, "gradient for '" + name + "' has shape " + shape_string(g.shape()) +
                                         ", parameter has " + shape_string(p.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      p[i] -= o.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.eps);
    }
  }
}

}  // namespace radargest::tensor
