#pragma once

#include <cstdint>
#include <vector>

#include "radargest/tensor/tape.hpp"

namespace radargest::tensor {

// Differentiable primitives. Shape errors throw Error(kShape) naming the
// operation and the offending shapes.

// [m x k] . [k x n]
Var matmul(Var a, Var b);
// [B x m x k] . [B x k x n] -> [B x m x n]
Var batch_matmul(Var a, Var b);
// Same shape, or b broadcast over the leading axes of a (b.shape is a suffix of a.shape).
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Element-wise product, same shape.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

// Rank-1 or rank-2 tensors; axis 0 or 1.
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var reshape(Var a, Shape shape);
// Half-open range [begin, end) along `axis` of a rank-1 or rank-2 tensor.
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
// Rows of a rank-2 tensor, with repetition.
Var gather_rows(Var a, const std::vector<std::uint32_t>& rows);
// a[i, cols[i]] for a rank-2 tensor -> rank-1 of length rows.
Var pick(Var a, const std::vector<std::uint32_t>& cols);

// Row i is the element-wise maximum of rows index[i*group .. (i+1)*group) of a;
// equal to reduce_max(reshape(gather_rows(a, index)), 1) without the
// intermediate. Gradient to the argmax row, ties to the earliest slot.
Var gather_max(Var a, const std::vector<std::uint32_t>& index, std::size_t group);

// Maximum along `axis`; the gradient goes to the argmax only, ties to the
// lowest index.
Var reduce_max(Var a, std::size_t axis);
Var reduce_sum(Var a, std::size_t axis);
Var reduce_mean(Var a, std::size_t axis);
// Over all elements, scalar result.
Var reduce_sum(Var a);
Var reduce_mean(Var a);

Var leaky_relu(Var a, double alpha = 0.2);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var sqrt(Var a);
// Along the last axis.
Var softmax(Var a);
Var log_softmax(Var a);

}  // namespace radargest::tensor
