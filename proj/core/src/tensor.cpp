// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#include "sdsr/tensor.hpp"

#include <sstream>

namespace sdsr {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_to_string(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values.assign(shape_product(t.impl_->shape), value);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_product(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_to_string(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = std::move(values);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

std::size_t Tensor::last_dim() const {
  const auto& s = impl().shape;
  return s.empty() ? 1 : s.back();
}

std::size_t Tensor::rows() const { return size() / last_dim(); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str());
  return impl().values[0];
}

std::vector<double>& Tensor::grad() {
  auto& im = impl();
  if (im.grad.empty()) im.grad.assign(im.values.size(), 0.0);
  return im.grad;
}

const std::vector<double>& Tensor::grad() const {
  const auto& im = impl();
  if (im.grad.empty()) throw ContractError("grad read before backward");
  return im.grad;
}

void Tensor::zero_grad() {
  auto& im = impl();
  im.grad.assign(im.values.size(), 0.0);
}

Tensor Tensor::clone() const {
  const auto& im = impl();
  return from(im.shape, im.values, im.requires_grad);
}

Tensor Tensor::detached() const {
  const auto& im = impl();
  return from(im.shape, im.values, false);
}

std::string Tensor::shape_str() const { return shape_to_string(impl().shape); }

}  // namespace sdsr
