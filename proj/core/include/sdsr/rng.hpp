// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sdsr/tensor.hpp"

namespace sdsr {

/// Deterministic random source. Distributions are implemented by hand on top
/// of mt19937_64 so that a seed produces bit-identical streams on every
/// platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two draws per pair.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) { return gen_() % n; }

  /// Derives an independent child stream (per-utterance seeding).
  std::uint64_t fork() { return gen_(); }

  Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi,
                        bool requires_grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = uniform(lo, hi);
    return t;
  }

  Tensor normal_tensor(std::vector<std::size_t> shape, double stddev,
                       bool requires_grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = stddev * normal();
    return t;
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace sdsr
