#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "radargest/common/rng.hpp"
#include "radargest/tensor/losses.hpp"

namespace radargest::gnn {

using tensor::ParamStore;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

inline constexpr std::size_t kNeighbors = 3;
inline constexpr double kLeakySlope = 0.2;

// Neighbour lists for `clouds` point sets of `n` points stacked row-wise.
// Row i of `neighbors` has k + 1 entries: i itself, then its k nearest points
// of the same cloud by ascending squared distance (ties by ascending index).
// Indices are global rows of the stacked matrix.
struct KnnGraph {
  std::size_t points = 0;  // total rows
  std::size_t k = 0;
  std::vector<std::uint32_t> neighbors;  // points x (k + 1)
  std::vector<double> distances;         // points x (k + 1), squared; slot 0 is 0

  std::size_t edges_per_vertex() const { return k + 1; }
  std::uint32_t neighbor(std::size_t i, std::size_t slot) const { return neighbors[i * (k + 1) + slot]; }
};

// `valid` (optional, one count per cloud) restricts candidate neighbours to
// the first valid[c] points of each cloud; missing slots repeat the vertex itself.
KnnGraph knn_graph(const Tensor& points, std::size_t k, std::size_t cloud_size = 0,
                   const std::vector<int>* valid = nullptr);

// Shared per-edge MLP. Layer 0 acts on (r_i, r_j - r_i) with one weight of
// shape [2F x a_1]; later layers are dense on the edge feature. Leaky ReLU
// follows every layer. Parameters: <name>.l<idx>.W and <name>.l<idx>.b.
struct EdgeConvSpec {
  std::string name;
  std::size_t in_features = 0;
  std::vector<std::size_t> widths;
  bool activation = true;  // disabled only for probing the linear map

  std::size_t out_features() const { return widths.back(); }
};

void init_edge_conv(ParamStore& params, const EdgeConvSpec& spec, Rng& rng);

// Per-edge features, shape [points x (k+1) x F'], computed literally from the
// concatenated pair for every edge.
Var edge_features(Tape& tape, const ParamStore& params, const EdgeConvSpec& spec, Var points, const KnnGraph& graph,
                  bool trainable = true);

// Max over the k + 1 edge features of each vertex, shape [points x F'].
// Single-layer specs use the equivalent form
// max_j act(x_i (W_a - W_b) + x_j W_b + b) = act(x_i (W_a - W_b) + b + max_j x_j W_b),
// which holds because the activation is monotone.
Var edge_conv(Tape& tape, const ParamStore& params, const EdgeConvSpec& spec, Var points, const KnnGraph& graph,
              bool trainable = true);

// Literal path: edge_features followed by the max over edges.
Var edge_conv_reference(Tape& tape, const ParamStore& params, const EdgeConvSpec& spec, Var points,
                        const KnnGraph& graph, bool trainable = true);

// Input transform: EdgeConv(width) on the full features, global max over each
// cloud, FC width -> 9 (zero weights, identity bias at init) giving a 3x3
// matrix M per cloud; spatial coordinates (features 0..2) become xyz . M and the
// remaining features pass through. Parameters <name>.conv.*, <name>.fc.W, <name>.fc.b.
struct TNetSpec {
  std::string name = "tnet";
  std::size_t in_features = 5;
  std::size_t width = 32;
  std::size_t k = kNeighbors;
};

void init_tnet(ParamStore& params, const TNetSpec& spec, Rng& rng);

struct TNetOutput {
  Var points;     // [clouds*n x F]
  Var transform;  // [clouds x 3 x 3]
};

TNetOutput input_transform(Tape& tape, const ParamStore& params, const TNetSpec& spec, Var points,
                           std::size_t cloud_size, bool trainable = true, const std::vector<int>* valid = nullptr);

// Dense layer parameters <name>.W [in x out] and <name>.b [out].
void init_dense(ParamStore& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
Var dense(Tape& tape, const ParamStore& params, const std::string& name, Var x, bool trainable = true);

// Uniform fan-in initialisation scaled for leaky ReLU.
Tensor init_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace radargest::gnn
