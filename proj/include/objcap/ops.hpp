#ifndef OBJCAP_OPS_HPP
#define OBJCAP_OPS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "objcap/tensor.hpp"

namespace objcap {

// Differentiable free functions. Every op takes the tape it records onto
// first; with a non-recording tape they are plain forward evaluations.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double factor);

/// x[m x n] + bias broadcast over rows; bias has n elements.
Tensor add_rowvector(Tape& tape, const Tensor& x, const Tensor& bias);

/// Joins along axis 0 (rows) or 1 (columns).
Tensor concat(Tape& tape, std::span<const Tensor> parts, int axis);
Tensor concat(Tape& tape, std::initializer_list<Tensor> parts, int axis);

Tensor slice_cols(Tape& tape, const Tensor& x, Eigen::Index begin, Eigen::Index count);
Tensor slice_rows(Tape& tape, const Tensor& x, Eigen::Index begin, Eigen::Index count);

/// Row `index` of `table` as a 1 x cols tensor. Gradient lands on that row only.
Tensor gather_row(Tape& tape, const Tensor& table, std::size_t index);

/// Moves rows down by `offset` (up when negative), filling vacated rows with zeros.
Tensor shift_rows(Tape& tape, const Tensor& x, Eigen::Index offset);

Tensor sum(Tape& tape, const Tensor& x);

/// Row-wise softmax with max subtraction.
Tensor softmax(Tape& tape, const Tensor& x);

/// -log softmax(logits)[target] for a single row of logits.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::size_t target);

/// Sum over rows of per-row cross-entropy. targets.size() == logits.rows().
Tensor cross_entropy_rows(Tape& tape, const Tensor& logits, std::span<const std::size_t> targets);

// Plain Eigen helpers used outside the tape.
RowVector softmax_row(const Eigen::Ref<const RowVector>& logits);
RowVector log_softmax_row(const Eigen::Ref<const RowVector>& logits);

}  // namespace objcap

#endif  // OBJCAP_OPS_HPP
