#include "radargest/tensor/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "radargest/common/error.hpp"

namespace radargest::tensor {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw Error(ErrorCode::kShape, "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                       shape_string(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw Error(ErrorCode::kShape, "item() on a tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw Error(ErrorCode::kShape, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) fail(ErrorCode::kInvalidArgument, "duplicate parameter name '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(name);
  tensors_.push_back(std::move(value));
  return tensors_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

Tensor& ParamStore::get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::kInvalidArgument, "unknown parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

const Tensor& ParamStore::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorCode::kInvalidArgument, "unknown parameter '" + std::string(name) + "'");
  return tensors_[it->second];
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore z;
  for (std::size_t i = 0; i < names_.size(); ++i) z.add(names_[i], Tensor(tensors_[i].shape()));
  return z;
}

void ParamStore::set_zero() {
  for (auto& t : tensors_) t.fill(0.0);
}

void ParamStore::accumulate(const ParamStore& other) {
  for (std::size_t i = 0; i < other.names_.size(); ++i) {
    Tensor& dst = get(other.names_[i]);
    const Tensor& src = other.tensors_[i];
    if (dst.shape() != src.shape()) {
      throw Error(ErrorCode::kShape, "accumulate shape mismatch for '" + other.names_[i] + "'");
    }
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void ParamStore::scale(double s) {
  for (auto& t : tensors_) {
    for (auto& v : t.storage()) v *= s;
  }
}

bool has_prefix(std::string_view name, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return name.substr(0, p.size()) == p; });
}

ParamStore ParamStore::subset(const std::vector<std::string>& prefixes) const {
  ParamStore s;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (has_prefix(names_[i], prefixes)) s.add(names_[i], tensors_[i]);
  }
  return s;
}

void ParamStore::assign_from(const ParamStore& other, bool allow_new) {
  for (std::size_t i = 0; i < other.names_.size(); ++i) {
    const auto& name = other.names_[i];
    if (!contains(name)) {
      if (!allow_new) fail(ErrorCode::kInvalidArgument, "unexpected parameter '" + name + "'");
      add(name, other.tensors_[i]);
      continue;
    }
    Tensor& dst = get(name);
    if (dst.shape() != other.tensors_[i].shape()) {
      throw Error(ErrorCode::kShape, "parameter '" + name + "' has shape " + shape_string(other.tensors_[i].shape()) +
                                         ", expected " + shape_string(dst.shape()));
    }
    dst = other.tensors_[i];
  }
}

bool ParamStore::operator==(const ParamStore& other) const {
  return names_ == other.names_ && tensors_ == other.tensors_;
}

}  // namespace radargest::tensor
