#pragma once

#include <cstdint>
#include <vector>

#include "radargest/tensor/ops.hpp"

namespace radargest::tensor {

// Mean over all entries of (pred - target)^2.
Var mse_loss(Var pred, Var target);

// Mean over the batch of -log softmax(logits)[label]; logits are [B x C].
Var cross_entropy_loss(Var logits, const std::vector<std::uint32_t>& labels);

// Mean of max(0, |a - p| - |a - n| + margin) over rows of [B x D] batches.
Var triplet_loss(Var anchor, Var positive, Var negative, double margin);

// Hardest positive (farthest same-label) and hardest negative (closest
// other-label) for every anchor that has both. Ties go to the lowest index.
struct TripletIndices {
  std::vector<std::uint32_t> anchor;
  std::vector<std::uint32_t> positive;
  std::vector<std::uint32_t> negative;
};

TripletIndices mine_batch_hard(const Tensor& embeddings, const std::vector<std::uint32_t>& labels);

// Batch-hard triplet loss over [B x D] embeddings.
Var batch_hard_triplet_loss(Var embeddings, const std::vector<std::uint32_t>& labels, double margin);

}  // namespace radargest::tensor
