// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "metalr/model.hpp"
#include "metalr/tasks.hpp"

namespace metalr {

// Fraction of samples whose argmax logit matches the label.
double evaluate_accuracy(const Model& model, const Dataset& dataset);

// Batch-mean loss over the whole dataset.
double evaluate_loss(const Model& model, const Dataset& dataset, LossKind kind);

}  // namespace metalr
