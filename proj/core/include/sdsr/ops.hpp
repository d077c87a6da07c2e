// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sdsr/tape.hpp"
#include "sdsr/tensor.hpp"

namespace sdsr::ops {

// All ops treat a tensor of shape [d0, ..., dn-1, D] as rows() x D where
// useful; leading dimensions are batch. Outputs require grad iff the tape is
// enabled and at least one input requires grad.

/// y = x W^T (+ b): x [.., D_in], W [D_out, D_in], b [D_out].
Tensor linear(Tape& tape, const Tensor& x, const Tensor& W, const Tensor& b);
Tensor linear(Tape& tape, const Tensor& x, const Tensor& W);

/// C = A B: A [m, k], B [k, n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose2(Tape& tape, const Tensor& x);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
/// y = c * x for a plain constant c.
Tensor scale(Tape& tape, const Tensor& x, double c);
/// y = s * x where s is a scalar tensor (gradient flows into s).
Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& s);

Tensor tanh_op(Tape& tape, const Tensor& x);
Tensor sigmoid_op(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);

/// Row-wise softmax and log-softmax over the trailing dimension, computed
/// with max subtraction. Rows of the first output sum to 1.
std::pair<Tensor, Tensor> softmax_logsoftmax(Tape& tape, const Tensor& z);
Tensor softmax(Tape& tape, const Tensor& z);
Tensor log_softmax(Tape& tape, const Tensor& z);

/// sum over rows of sum_v exp(p_log)*(p_log - q_log). Both inputs are
/// log-distributions of identical shape. With detach_q the teacher side is
/// excluded from the gradient regardless of its requires_grad flag.
Tensor kl_divergence(Tape& tape, const Tensor& p_log, const Tensor& q_log, bool detach_q);

/// mean over rows of -log_softmax(logits)[target].
Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& targets);

/// Elementwise log(exp(a) + exp(b)), overflow-safe.
Tensor logaddexp(Tape& tape, const Tensor& a, const Tensor& b);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

/// Scalar view of one element.
Tensor element(Tape& tape, const Tensor& x, std::size_t flat_index);
/// Row r of x viewed as [rows, last_dim] -> [last_dim].
Tensor take_row(Tape& tape, const Tensor& x, std::size_t row);
/// x[.., start:start+len] over the trailing dimension.
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t start, std::size_t len);
/// Concatenation over the trailing dimension; leading dims must agree.
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
/// Stacks N tensors of shape [D] into [N, D].
Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows_in);
/// table [V, D], ids in [0, V) -> [N, D]; backward scatter-adds rows.
Tensor embedding(Tape& tape, const Tensor& table, const std::vector<int>& ids);
/// y[t][u] = a[t] + b[u]: a [T, D], b [U, D] -> [T, U, D].
Tensor pairwise_add(Tape& tape, const Tensor& a, const Tensor& b);

/// Row-wise layer normalization with learned gain/bias over trailing dim.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

/// Fixed sinusoidal position table [T, D]; constant, no gradient.
Tensor sinusoidal_encoding(std::size_t positions, std::size_t dim);

/// Index of the max element in row r (ties -> lowest index).
std::size_t argmax_row(const Tensor& x, std::size_t row);

}  // namespace sdsr::ops
