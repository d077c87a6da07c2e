// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sdsr/errors.hpp"

namespace sdsr {

/// Dense row-major double tensor with an optional gradient buffer.
///
/// Tensor is a cheap reference handle: copies share storage. Use clone()
/// for an independent deep copy (parameters are cloned, never shared,
/// across concurrent graphs). Broadcasting is limited to leading batch
/// dimensions inside individual ops; storage is always contiguous.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const std::vector<std::size_t>& shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t dim(std::size_t i) const { return impl().shape.at(i); }
  std::size_t size() const { return impl().values.size(); }
  /// Size of the trailing dimension (1 for scalars).
  std::size_t last_dim() const;
  /// Number of rows when viewed as [rows, last_dim()].
  std::size_t rows() const;

  std::vector<double>& values() { return impl().values; }
  const std::vector<double>& values() const { return impl().values; }
  double value(std::size_t flat) const { return impl().values[flat]; }
  double& value(std::size_t flat) { return impl().values[flat]; }
  /// Scalar payload; throws ContractError if size() != 1.
  double item() const;

  bool requires_grad() const { return impl().requires_grad; }
  void set_requires_grad(bool rg) { impl().requires_grad = rg; }

  bool has_grad() const { return !impl().grad.empty(); }
  /// Gradient buffer, allocated (zero-filled) on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Deep copy (fresh storage, same values; grad not copied).
  Tensor clone() const;
  /// Deep copy with requires_grad = false. Used to stop gradients.
  Tensor detached() const;

  /// Storage identity, i.e. whether two handles alias the same buffer.
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const void* storage_id() const { return impl_.get(); }

  std::string shape_str() const;

 private:
  struct Impl {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  Impl& impl() {
    if (!impl_) throw ContractError("use of undefined Tensor");
    return *impl_;
  }
  const Impl& impl() const {
    if (!impl_) throw ContractError("use of undefined Tensor");
    return *impl_;
  }

  std::shared_ptr<Impl> impl_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace sdsr
