#include "radargest/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radargest/common/rng.hpp"

namespace radargest::tensor {

GradcheckResult finite_diff_check(const LossFn& fn, ParamStore params, const GradcheckOptions& opts) {
  ParamStore grads = params.zeros_like();
  fn(params, &grads);

  struct Coord {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!opts.prefixes.empty() && !has_prefix(params.names()[p], opts.prefixes)) continue;
    for (std::size_t i = 0; i < params.at(p).size(); ++i) coords.push_back({p, i});
  }
  if (coords.size() > opts.samples) {
    Rng rng(opts.seed, {0x6763ULL});
    std::shuffle(coords.begin(), coords.end(), rng.engine());
    coords.resize(opts.samples);
    std::sort(coords.begin(), coords.end(),
              [](const Coord& a, const Coord& b) { return a.param != b.param ? a.param < b.param : a.index < b.index; });
  }

  GradcheckResult result;
  result.coordinates = coords.size();
  for (const Coord& c : coords) {
    double& x = params.at(c.param)[c.index];
    const double x0 = x;
    x = x0 + opts.h;
    const double up = fn(params, nullptr);
    x = x0 - opts.h;
    const double down = fn(params, nullptr);
    x = x0;
    const double numeric = (up - down) / (2.0 * opts.h);
    const double analytic = grads.at(c.param)[c.index];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.floor});
    const double err = std::abs(analytic - numeric) / denom;
    if (err > result.max_rel_error || result.worst_parameter.empty()) {
      if (err >= result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_parameter = params.names()[c.param];
        result.worst_index = c.index;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace radargest::tensor
