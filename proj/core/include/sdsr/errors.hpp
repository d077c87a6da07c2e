// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sdsr {

// Shape/dimension disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Out-of-range index (vocabulary ids, codebook ids, row selectors).
class IndexError : public std::out_of_range {
 public:
  explicit IndexError(const std::string& msg) : std::out_of_range(msg) {}
};

// Non-finite values where finite input is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// API contract violation (misuse of a stateful object, bad call sequence).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Bad configuration document (unknown keys, invalid field values).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sdsr
