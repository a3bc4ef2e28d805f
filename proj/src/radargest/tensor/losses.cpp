#include "radargest/tensor/losses.hpp"

#include <cmath>
#include <limits>

#include "radargest/common/error.hpp"

namespace radargest::tensor {

Var mse_loss(Var pred, Var target) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorCode::kShape, "mse_loss: prediction " + shape_string(pred.shape()) + " vs target " +
                                       shape_string(target.shape()));
  }
  Var diff = sub(pred, target);
  return reduce_mean(mul(diff, diff));
}

Var cross_entropy_loss(Var logits, const std::vector<std::uint32_t>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size() || s[0] == 0) {
    throw Error(ErrorCode::kShape, "cross_entropy_loss: logits " + shape_string(s) + " with " +
                                       std::to_string(labels.size()) + " labels");
  }
  for (auto l : labels) {
    if (l >= s[1]) {
      fail(ErrorCode::kInvalidArgument, "cross_entropy_loss: label " + std::to_string(l) + " outside 0.." +
                                            std::to_string(s[1] - 1));
    }
  }
  return scale(reduce_mean(pick(log_softmax(logits), labels)), -1.0);
}

namespace {

Var row_distance(Var a, Var b) {
  Var d = sub(a, b);
  return sqrt(reduce_sum(mul(d, d), 1));
}

}  // namespace

Var triplet_loss(Var anchor, Var positive, Var negative, double margin) {
  if (anchor.shape() != positive.shape() || anchor.shape() != negative.shape() || anchor.shape().size() != 2) {
    throw Error(ErrorCode::kShape, "triplet_loss: shapes " + shape_string(anchor.shape()) + ", " +
                                       shape_string(positive.shape()) + ", " + shape_string(negative.shape()));
  }
  Var hinge = relu(add_scalar(sub(row_distance(anchor, positive), row_distance(anchor, negative)), margin));
  return reduce_mean(hinge);
}

TripletIndices mine_batch_hard(const Tensor& emb, const std::vector<std::uint32_t>& labels) {
  if (emb.rank() != 2 || emb.rows() != labels.size()) {
    throw Error(ErrorCode::kShape, "triplet mining: embeddings " + shape_string(emb.shape()) + " with " +
                                       std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = emb.rows();
  const std::size_t dim = emb.cols();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = emb.at(i, c) - emb.at(j, c);
        s += d * d;
      }
      dist[i * n + j] = dist[j * n + i] = s;
    }
  }
  TripletIndices out;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pos = n;
    std::size_t neg = n;
    double pos_d = -1.0;
    double neg_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = dist[i * n + j];
      if (labels[j] == labels[i]) {
        if (d > pos_d) {
          pos_d = d;
          pos = j;
        }
      } else if (d < neg_d) {
        neg_d = d;
        neg = j;
      }
    }
    if (pos == n || neg == n) continue;
    out.anchor.push_back(static_cast<std::uint32_t>(i));
    out.positive.push_back(static_cast<std::uint32_t>(pos));
    out.negative.push_back(static_cast<std::uint32_t>(neg));
  }
  if (out.anchor.empty()) {
    fail(ErrorCode::kInvalidArgument,
         "triplet mining: batch needs at least one class with two samples and at least two classes");
  }
  return out;
}

Var batch_hard_triplet_loss(Var embeddings, const std::vector<std::uint32_t>& labels, double margin) {
  const TripletIndices t = mine_batch_hard(embeddings.value(), labels);
  return triplet_loss(gather_rows(embeddings, t.anchor), gather_rows(embeddings, t.positive),
                      gather_rows(embeddings, t.negative), margin);
}

}  // namespace radargest::tensor
