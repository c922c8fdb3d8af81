// SPDX-License-Identifier: Apache-2.0
#include "metalr/tensor.hpp"

#include <cmath>

#include "metalr/common.hpp"

namespace metalr {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    for (std::size_t d : shape_) {
        check(d > 0, "Tensor: all dimensions must be positive, got ", shape_to_string(shape_));
    }
    values_.assign(numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    for (std::size_t d : shape_) {
        check(d > 0, "Tensor: all dimensions must be positive, got ", shape_to_string(shape_));
    }
    check(values_.size() == numel(shape_), "Tensor: value count ", values_.size(),
          " does not match shape ", shape_to_string(shape_));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros_like(const Tensor& other) { return Tensor(other.shape_); }

std::size_t Tensor::dim(std::size_t i) const {
    check(i < shape_.size(), "Tensor::dim: axis ", i, " out of range for shape ", shape_to_string(shape_));
    return shape_[i];
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(Shape shape) const {
    check(numel(shape) == values_.size(), "Tensor::reshaped: cannot reshape ", shape_to_string(shape_),
          " into ", shape_to_string(shape));
    return Tensor(std::move(shape), values_);
}

double dot(const Tensor& a, const Tensor& b) {
    check(a.size() == b.size(), "dot: element counts differ, ", shape_to_string(a.shape()), " vs ",
          shape_to_string(b.shape()));
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
    return s;
}

void axpy(double a, const Tensor& x, Tensor& y) {
    check(x.same_shape(y), "axpy: shape mismatch, ", shape_to_string(x.shape()), " vs ",
          shape_to_string(y.shape()));
    const double* px = x.data();
    double* py = y.data();
    for (std::size_t i = 0; i < x.size(); ++i) py[i] += a * px[i];
}

}  // namespace metalr
