// SPDX-License-Identifier: Apache-2.0
#include "metalr/loss.hpp"

#include <algorithm>
#include <cmath>

#include "metalr/common.hpp"

namespace metalr {

namespace {

// Returns the class index for sample i, validating integrality and range.
std::size_t class_label(const Tensor& labels, std::size_t i, std::size_t num_classes) {
    const double raw = labels[i];
    check(raw == std::floor(raw) && raw >= 0.0, "cross-entropy: label ", raw, " at sample ", i,
          " is not a non-negative integer");
    const auto idx = static_cast<std::size_t>(raw);
    check(idx < num_classes, "cross-entropy: label ", idx, " at sample ", i, " out of class range [0,",
          num_classes, ")");
    return idx;
}

void check_ce_shapes(const Tensor& predictions, const Tensor& labels) {
    check(predictions.rank() == 2, "cross-entropy: predictions must be [batch, classes], got ",
          shape_to_string(predictions.shape()));
    const std::size_t n = predictions.dim(0);
    check(labels.size() == n, "cross-entropy: batch size mismatch, predictions ", n, " vs labels ",
          labels.size());
}

double row_logsumexp(const double* z, std::size_t k) {
    double m = z[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, z[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - m);
    return m + std::log(s);
}

}  // namespace

const char* to_string(LossKind kind) {
    switch (kind) {
        case LossKind::CrossEntropySoftmax: return "cross_entropy";
        case LossKind::MeanSquaredError: return "mse";
    }
    return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossKind::CrossEntropySoftmax;
    if (s == "mse") return LossKind::MeanSquaredError;
    fail_arg("unknown loss kind '", s, "' (expected cross_entropy or mse)");
}

double compute_loss(const Tensor& predictions, const Tensor& labels, LossKind kind) {
    check(predictions.rank() >= 1 && predictions.size() > 0, "compute_loss: empty predictions");
    double total = 0.0;
    if (kind == LossKind::CrossEntropySoftmax) {
        check_ce_shapes(predictions, labels);
        const std::size_t n = predictions.dim(0);
        const std::size_t k = predictions.dim(1);
        for (std::size_t i = 0; i < n; ++i) {
            const double* z = predictions.data() + i * k;
            const std::size_t y = class_label(labels, i, k);
            total += row_logsumexp(z, k) - z[y];
        }
        total /= static_cast<double>(n);
    } else {
        check(labels.size() == predictions.size(), "mse: element count mismatch, predictions ",
              predictions.size(), " vs labels ", labels.size());
        const std::size_t n = predictions.dim(0);
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            const double d = predictions[i] - labels[i];
            total += d * d;
        }
        total /= static_cast<double>(n);
    }
    check_not_diverged(std::isfinite(total), "compute_loss: non-finite ", to_string(kind), " loss");
    return total;
}

Tensor loss_gradient(const Tensor& predictions, const Tensor& labels, LossKind kind) {
    Tensor grad(predictions.shape());
    if (kind == LossKind::CrossEntropySoftmax) {
        check_ce_shapes(predictions, labels);
        const std::size_t n = predictions.dim(0);
        const std::size_t k = predictions.dim(1);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* z = predictions.data() + i * k;
            double* g = grad.data() + i * k;
            const double lse = row_logsumexp(z, k);
            for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(z[j] - lse) * inv_n;
            g[class_label(labels, i, k)] -= inv_n;
        }
    } else {
        check(labels.size() == predictions.size(), "mse: element count mismatch, predictions ",
              predictions.size(), " vs labels ", labels.size());
        const double inv_n = 1.0 / static_cast<double>(predictions.dim(0));
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            grad[i] = 2.0 * (predictions[i] - labels[i]) * inv_n;
        }
    }
    check_not_diverged(grad.all_finite(), "loss_gradient: non-finite gradient");
    return grad;
}

Tensor softmax_rows(const Tensor& logits) {
    check(logits.rank() == 2, "softmax_rows: expected [batch, classes], got ",
          shape_to_string(logits.shape()));
    Tensor out(logits.shape());
    const std::size_t n = logits.dim(0);
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.data() + i * k;
        double* p = out.data() + i * k;
        const double lse = row_logsumexp(z, k);
        for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(z[j] - lse);
    }
    return out;
}

}  // namespace metalr
