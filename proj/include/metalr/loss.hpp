// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "metalr/tensor.hpp"

namespace metalr {

// CrossEntropySoftmax fuses the softmax head with the negative log-likelihood;
// model outputs are raw logits. Labels are class indices stored as doubles.
// MeanSquaredError sums squared error over output dimensions per sample and
// averages over the batch; labels must carry the same element count as the
// predictions.
enum class LossKind { CrossEntropySoftmax, MeanSquaredError };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

// Batch-mean loss. Non-negative for both kinds.
double compute_loss(const Tensor& predictions, const Tensor& labels, LossKind kind);

// Gradient of the batch-mean loss w.r.t. the predictions, same shape.
Tensor loss_gradient(const Tensor& predictions, const Tensor& labels, LossKind kind);

// Softmax over the trailing axis of [n, k] logits.
Tensor softmax_rows(const Tensor& logits);

}  // namespace metalr
