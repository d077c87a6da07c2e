// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#include "sdsr/tape.hpp"

namespace sdsr {

void Tape::record(std::function<void()> backward_fn, std::initializer_list<Tensor> touched) {
  if (!enabled_) return;
  for (const Tensor& t : touched) {
    if (!t.defined()) continue;
    if (touched_ids_.insert(t.storage_id()).second) touched_.push_back(t);
  }
  ops_.push_back(std::move(backward_fn));
}

void Tape::record(std::function<void()> backward_fn, const std::vector<Tensor>& touched) {
  if (!enabled_) return;
  for (const Tensor& t : touched) {
    if (!t.defined()) continue;
    if (touched_ids_.insert(t.storage_id()).second) touched_.push_back(t);
  }
  ops_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (!enabled_) throw ContractError("backward() on a disabled tape");
  if (loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + loss.shape_str());
  }
  if (ops_.empty()) throw ContractError("backward() with no recorded operations");
  if (ops_.size() == ops_at_last_backward_) {
    throw ContractError("second backward() without an intervening forward pass");
  }
  for (Tensor& t : touched_) t.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  ops_at_last_backward_ = ops_.size();
}

void Tape::clear() {
  ops_.clear();
  touched_.clear();
  touched_ids_.clear();
  ops_at_last_backward_ = static_cast<std::size_t>(-1);
}

}  // namespace sdsr
