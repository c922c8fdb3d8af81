// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient oracle. Lives in the library so tests and
// the acceptance suite share one implementation; it never touches the
// reverse-mode path it is used to verify.
#pragma once

#include "metalr/model.hpp"

namespace metalr {

// (L(theta+eps) - L(theta-eps)) / 2 eps per scalar parameter, O(P) loss
// evaluations. The model argument is copied; the original is untouched.
GradientSnapshot finite_difference_gradient(const Model& model, const Tensor& inputs, const Tensor& labels,
                                            LossKind kind, double epsilon);

// max over parameters of |a - b| / (|b| + floor).
double max_relative_gradient_error(const GradientSnapshot& a, const GradientSnapshot& b,
                                   double denom_floor = 1e-8);

// Distance of the forward pass from the nearest non-smooth point: the minimum
// over |ReLU pre-activation| and max-pool top-two gaps. Central differences
// only measure the true derivative when this margin comfortably exceeds the
// probe's perturbation of the activations; probe instances should be screened
// against it.
double activation_kink_margin(const Model& model, const Tensor& inputs);

}  // namespace metalr
