#include "radargest/tensor/tape.hpp"

#include "radargest/common/error.hpp"

namespace radargest::tensor {

const Tensor& Var::value() const { return tape->value(*this); }
const Shape& Var::shape() const { return tape->value(*this).shape(); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(const ParamStore& store, const std::string& name, bool trainable) {
  Node n;
  n.external = &store.get(name);
  n.requires_grad = trainable;
  n.trainable_param = trainable;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

const Tensor& Tape::value(Var v) const {
  if (v.tape != this) fail(ErrorCode::kState, "variable belongs to a different tape");
  return value(v.id);
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.has_grad) return n.grad;
  return Tensor(value(v.id).shape());
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape != this) fail(ErrorCode::kState, "operation mixes variables from different tapes");
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape != this) fail(ErrorCode::kState, "operation mixes variables from different tapes");
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss, ParamStore* grads) {
  if (value(loss).size() != 1) {
    throw Error(ErrorCode::kShape, "backward needs a scalar loss, got shape " + shape_string(value(loss).shape()));
  }
  Seed seed{loss, Tensor(value(loss).shape(), 1.0)};
  backward(std::span<const Seed>(&seed, 1), grads);
}

void Tape::backward(std::span<const Seed> seeds, ParamStore* grads) {
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  for (const Seed& s : seeds) {
    if (s.var.tape != this) fail(ErrorCode::kState, "seed variable belongs to a different tape");
    if (s.grad.shape() != value(s.var.id).shape()) {
      throw Error(ErrorCode::kShape, "seed gradient shape " + shape_string(s.grad.shape()) + " does not match " +
                                         shape_string(value(s.var.id).shape()));
    }
    Tensor& g = grad_buffer(s.var.id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s.grad[i];
  }
  run_backward(grads);
}

void Tape::run_backward(ParamStore* grads) {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
    if (n.trainable_param && grads != nullptr) {
      Tensor& dst = grads->get(n.param_name);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

}  // namespace radargest::tensor
