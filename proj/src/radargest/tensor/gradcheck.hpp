#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "radargest/tensor/tensor.hpp"

namespace radargest::tensor {

// Evaluates a scalar loss at `params`. When `grads` is non-null the function
// also adds the analytic gradient into it.
using LossFn = std::function<double(const ParamStore& params, ParamStore* grads)>;

struct GradcheckOptions {
  double h = 1e-5;
  std::size_t samples = 200;  // coordinates checked; all of them when fewer exist
  std::uint64_t seed = 0;
  // |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double floor = 1e-4;
  // Restrict to parameters with these prefixes; empty means all.
  std::vector<std::string> prefixes;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference comparison on a random subsample of coordinates.
GradcheckResult finite_diff_check(const LossFn& fn, ParamStore params, const GradcheckOptions& opts = {});

}  // namespace radargest::tensor
