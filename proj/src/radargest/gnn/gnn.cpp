#include "radargest/gnn/gnn.hpp"

#include <algorithm>
#include <cmath>

#include "radargest/common/error.hpp"

namespace radargest::gnn {

using namespace radargest::tensor;

KnnGraph knn_graph(const Tensor& points, std::size_t k, std::size_t cloud_size, const std::vector<int>* valid) {
  if (points.rank() != 2) {
    throw Error(ErrorCode::kShape, "knn_graph: points must be [n x F], got " + shape_string(points.shape()));
  }
  const std::size_t total = points.rows();
  const std::size_t f = points.cols();
  const std::size_t n = cloud_size == 0 ? total : cloud_size;
  if (n == 0 || total % n != 0) {
    throw Error(ErrorCode::kShape, "knn_graph: " + std::to_string(total) + " rows do not split into clouds of " +
                                       std::to_string(n));
  }
  if (k < 1 || k >= n) {
    fail(ErrorCode::kInvalidArgument,
         "knn_graph: k = " + std::to_string(k) + " needs 1 <= k < n = " + std::to_string(n));
  }
  const std::size_t clouds = total / n;
  if (valid != nullptr && valid->size() != clouds) {
    fail(ErrorCode::kInvalidArgument, "knn_graph: one valid count per cloud expected");
  }

  KnnGraph g;
  g.points = total;
  g.k = k;
  g.neighbors.resize(total * (k + 1));
  g.distances.assign(total * (k + 1), 0.0);
  std::vector<std::pair<double, std::uint32_t>> cand;
  cand.reserve(n);
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t c = 0; c < clouds; ++c) {
    const std::size_t base = c * n;
    const std::size_t limit = valid ? static_cast<std::size_t>(std::clamp((*valid)[c], 0, static_cast<int>(n))) : n;
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = points.data() + (base + i) * f;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double* xj = points.data() + (base + j) * f;
        double s = 0.0;
        for (std::size_t q = 0; q < f; ++q) {
          const double d = xi[q] - xj[q];
          s += d * d;
        }
        dist[i * n + j] = dist[j * n + i] = s;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = (base + i) * (k + 1);
      g.neighbors[row] = static_cast<std::uint32_t>(base + i);
      cand.clear();
      if (i < limit) {
        for (std::size_t j = 0; j < limit; ++j) {
          if (j != i) cand.emplace_back(dist[i * n + j], static_cast<std::uint32_t>(j));
        }
      }
      const std::size_t take = std::min(k, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
      for (std::size_t s = 0; s < k; ++s) {
        if (s < take) {
          g.neighbors[row + 1 + s] = static_cast<std::uint32_t>(base + cand[s].second);
          g.distances[row + 1 + s] = cand[s].first;
        } else {
          g.neighbors[row + 1 + s] = static_cast<std::uint32_t>(base + i);
        }
      }
    }
  }
  return g;
}

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / ((1.0 + kLeakySlope * kLeakySlope) * static_cast<double>(fan_in)));
  Tensor w({fan_in, fan_out});
  for (auto& v : w.storage()) v = rng.uniform(-bound, bound);
  return w;
}

void init_dense(ParamStore& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  params.add(name + ".W", init_weight(in, out, rng));
  params.add(name + ".b", Tensor({out}));
}

Var dense(Tape& tape, const ParamStore& params, const std::string& name, Var x, bool trainable) {
  return add(matmul(x, tape.param(params, name + ".W", trainable)), tape.param(params, name + ".b", trainable));
}

namespace {

std::string layer_name(const EdgeConvSpec& spec, std::size_t l) { return spec.name + ".l" + std::to_string(l); }

void check_spec(const EdgeConvSpec& spec, Var points, const KnnGraph& graph) {
  if (spec.widths.empty()) fail(ErrorCode::kInvalidArgument, "edge conv '" + spec.name + "' has no layers");
  const Shape& s = points.shape();
  if (s.size() != 2 || s[1] != spec.in_features) {
    throw Error(ErrorCode::kShape, "edge conv '" + spec.name + "' expects [n x " + std::to_string(spec.in_features) +
                                       "], got " + shape_string(s));
  }
  if (graph.points != s[0]) {
    throw Error(ErrorCode::kShape, "edge conv '" + spec.name + "': graph has " + std::to_string(graph.points) +
                                       " vertices, points have " + std::to_string(s[0]));
  }
}

Var activate(const EdgeConvSpec& spec, Var x) { return spec.activation ? leaky_relu(x, kLeakySlope) : x; }

}  // namespace

void init_edge_conv(ParamStore& params, const EdgeConvSpec& spec, Rng& rng) {
  require(!spec.widths.empty(), "edge conv '" + spec.name + "' has no layers");
  std::size_t in = 2 * spec.in_features;
  for (std::size_t l = 0; l < spec.widths.size(); ++l) {
    init_dense(params, layer_name(spec, l), in, spec.widths[l], rng);
    in = spec.widths[l];
  }
}

Var edge_features(Tape& tape, const ParamStore& params, const EdgeConvSpec& spec, Var points, const KnnGraph& graph,
                  bool trainable) {
  check_spec(spec, points, graph);
  const std::size_t e = graph.edges_per_vertex();
  std::vector<std::uint32_t> centre(graph.points * e);
  for (std::size_t i = 0; i < graph.points; ++i) {
    std::fill(centre.begin() + static_cast<std::ptrdiff_t>(i * e),
              centre.begin() + static_cast<std::ptrdiff_t>((i + 1) * e), static_cast<std::uint32_t>(i));
  }
  Var xi = gather_rows(points, centre);
  Var xj = gather_rows(points, graph.neighbors);
  Var h = concat({xi, sub(xj, xi)}, 1);
  for (std::size_t l = 0; l < spec.widths.size(); ++l) h = activate(spec, dense(tape, params, layer_name(spec, l), h, trainable));
  return reshape(h, {graph.points, e, spec.out_features()});
}

Var edge_conv_reference(Tape& tape, const ParamStore& params, const EdgeConvSpec& spec, Var points,
                        const KnnGraph& graph, bool trainable) {
  return reduce_max(edge_features(tape, params, spec, points, graph, trainable), 1);
}

Var edge_conv(Tape& tape, const ParamStore& params, const EdgeConvSpec& spec, Var points, const KnnGraph& graph,
              bool trainable) {
  check_spec(spec, points, graph);
  if (spec.widths.size() != 1) return edge_conv_reference(tape, params, spec, points, graph, trainable);
  const std::string name = layer_name(spec, 0);
  const std::size_t f = spec.in_features;
  Var w = tape.param(params, name + ".W", trainable);
  Var w_centre = slice(w, 0, 0, f);
  Var w_diff = slice(w, 0, f, 2 * f);
  Var own = matmul(points, sub(w_centre, w_diff));
  Var other = matmul(points, w_diff);
  Var pooled = gather_max(other, graph.neighbors, graph.edges_per_vertex());
  return activate(spec, add(add(own, tape.param(params, name + ".b", trainable)), pooled));
}

void init_tnet(ParamStore& params, const TNetSpec& spec, Rng& rng) {
  init_edge_conv(params, {spec.name + ".conv", spec.in_features, {spec.width}}, rng);
  params.add(spec.name + ".fc.W", Tensor({spec.width, 9}));
  params.add(spec.name + ".fc.b", Tensor({9}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
}

TNetOutput input_transform(Tape& tape, const ParamStore& params, const TNetSpec& spec, Var points,
                           std::size_t cloud_size, bool trainable, const std::vector<int>* valid) {
  const Shape& s = points.shape();
  if (s.size() != 2 || s[1] != spec.in_features || spec.in_features < 3 || cloud_size == 0 || s[0] % cloud_size) {
    throw Error(ErrorCode::kShape, "input transform expects [clouds*" + std::to_string(cloud_size) + " x " +
                                       std::to_string(spec.in_features) + "], got " + shape_string(s));
  }
  const std::size_t clouds = s[0] / cloud_size;
  const KnnGraph graph = knn_graph(points.value(), spec.k, cloud_size, valid);
  Var h = edge_conv(tape, params, {spec.name + ".conv", spec.in_features, {spec.width}}, points, graph, trainable);
  Var pooled = reduce_max(reshape(h, {clouds, cloud_size, spec.width}), 1);
  Var m = reshape(dense(tape, params, spec.name + ".fc", pooled, trainable), {clouds, 3, 3});
  Var xyz = reshape(slice(points, 1, 0, 3), {clouds, cloud_size, 3});
  Var moved = reshape(batch_matmul(xyz, m), {s[0], 3});
  Var out = spec.in_features > 3 ? concat({moved, slice(points, 1, 3, spec.in_features)}, 1) : moved;
  return {out, m};
}

}  // namespace radargest::gnn
