// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace metalr {

double mean(const std::vector<double>& v);
// Sample standard deviation (n-1 denominator); requires n >= 2.
double sample_std(const std::vector<double>& v);

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(T > t) for Student's t with `dof` degrees of freedom.
double student_t_sf(double t, double dof);

// One-sided paired test of H1: mean(x - y) > 0; returns the p-value.
// Degenerate zero-variance differences collapse to 0, 0.5, or 1.
double paired_one_sided_p(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace metalr
