// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <functional>
#include <unordered_set>
#include <vector>

#include "sdsr/tensor.hpp"

namespace sdsr {

/// Reverse-mode autodiff tape.
///
/// Forward ops append one backward closure each; backward() replays them in
/// exact reverse record order. A tape is single-threaded; independent tapes
/// may run on independent threads. A disabled tape records nothing, which is
/// the inference / stop-gradient path.
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool enabled() const { return enabled_; }

  /// Records a backward closure together with the tensors it touches.
  /// The touched set is used to zero gradients at the start of backward().
  void record(std::function<void()> backward_fn, std::initializer_list<Tensor> touched);
  void record(std::function<void()> backward_fn, const std::vector<Tensor>& touched);

  /// Seeds d(loss)/d(loss) = 1 and replays closures in reverse order.
  /// Throws ContractError if loss is not scalar, if nothing was recorded,
  /// or on a second backward() without newly recorded ops in between.
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return ops_.size(); }

  /// Drops all recorded closures (start of a fresh forward pass).
  void clear();

 private:
  bool enabled_ = true;
  std::vector<std::function<void()>> ops_;
  std::vector<Tensor> touched_;
  std::unordered_set<const void*> touched_ids_;
  std::size_t ops_at_last_backward_ = static_cast<std::size_t>(-1);
};

}  // namespace sdsr
