// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major double tensor. Double precision throughout: the meta update
// takes inner products of two gradients, and those survive finite-difference
// verification only with the extra mantissa bits.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace metalr {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);  // zero-filled
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor zeros_like(const Tensor& other);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t size() const { return values_.size(); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool all_finite() const;
    // Reshape preserving element count and row-major order.
    Tensor reshaped(Shape shape) const;

private:
    Shape shape_;
    std::vector<double> values_;
};

// Flattened inner product; shapes must carry the same element count.
double dot(const Tensor& a, const Tensor& b);

// y += a * x, elementwise; shapes must match.
void axpy(double a, const Tensor& x, Tensor& y);

}  // namespace metalr
