#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "radargest/tensor/tensor.hpp"

namespace radargest::tensor {

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const;
};

// Records a computation for reverse-mode differentiation. A tape is owned by
// one thread for its whole forward/backward lifetime. Parameter leaves refer
// to tensors in a ParamStore, which must outlive the tape and stay unchanged
// while it is in use.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  struct Seed {
    Var var;
    Tensor grad;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is kept on the tape (inputs under test).
  Var variable(Tensor value);
  // Leaf bound to store[name]; trainable leaves receive gradients in backward().
  Var param(const ParamStore& store, const std::string& name, bool trainable = true);

  const Tensor& value(Var v) const;
  const Tensor& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id); }

  // Gradient of the last backward pass; zeros for nodes it did not reach.
  Tensor grad(Var v) const;

  // Backpropagates from a scalar loss with seed 1. Trainable parameter
  // gradients are added into `grads` (by name), so repeated calls accumulate.
  void backward(Var loss, ParamStore* grads = nullptr);
  // Backpropagates from several outputs with explicit upstream gradients.
  void backward(std::span<const Seed> seeds, ParamStore* grads = nullptr);

  std::size_t node_count() const { return nodes_.size(); }

  // Op plumbing.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn fn);
  const Tensor& upstream(std::uint32_t id) const { return nodes_[id].grad; }
  // Gradient accumulator of a node, allocated on first use.
  Tensor& grad_buffer(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    bool trainable_param = false;
    bool has_grad = false;
    std::string param_name;
    BackwardFn backward;
    Tensor grad;
  };

  void run_backward(ParamStore* grads);

  std::deque<Node> nodes_;
};

}  // namespace radargest::tensor
