#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radargest/tensor/tensor.hpp"

namespace radargest::tensor {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments for the parameters named in `trainable`; others are never touched.
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::string> trainable;
  ParamStore m;
  ParamStore v;
};

AdamState make_adam(const ParamStore& params, std::vector<std::string> trainable, const AdamOptions& options = {});

// Bias-corrected adaptive-moment update of every trainable parameter.
// A trainable parameter without an entry in `grads` is an error.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state);

}  // namespace radargest::tensor
