// SPDX-License-Identifier: Apache-2.0
#include "metalr/gradcheck.hpp"

#include <cmath>

#include "metalr/common.hpp"

namespace metalr {

GradientSnapshot finite_difference_gradient(const Model& model, const Tensor& inputs, const Tensor& labels,
                                            LossKind kind, double epsilon) {
    check(epsilon > 0.0, "finite_difference_gradient: epsilon must be positive, got ", epsilon);
    Model probe = model;
    auto groups = probe.mutable_groups();

    GradientSnapshot snap;
    snap.batch_size = inputs.dim(0);
    snap.model_version = model.version();
    for (auto& g : groups) {
        snap.names.push_back(g.name);
        std::vector<Tensor> grads;
        for (Tensor* t : g.tensors) grads.push_back(Tensor::zeros_like(*t));
        snap.grads.push_back(std::move(grads));
    }

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        for (std::size_t ti = 0; ti < groups[gi].tensors.size(); ++ti) {
            Tensor& t = *groups[gi].tensors[ti];
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double saved = t[i];
                t[i] = saved + epsilon;
                const double plus = compute_loss(probe.forward(inputs).logits, labels, kind);
                t[i] = saved - epsilon;
                const double minus = compute_loss(probe.forward(inputs).logits, labels, kind);
                t[i] = saved;
                snap.grads[gi][ti][i] = (plus - minus) / (2.0 * epsilon);
            }
        }
    }
    return snap;
}

double activation_kink_margin(const Model& model, const Tensor& inputs) {
    const ForwardCache cache = model.forward(inputs);
    double margin = HUGE_VAL;
    const auto& layers = model.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        if (std::holds_alternative<ReLULayer>(layers[li].impl)) {
            for (double v : cache.layer_inputs[li].values()) {
                margin = std::min(margin, std::abs(v));
            }
        } else if (const auto* p = std::get_if<MaxPool2DLayer>(&layers[li].impl)) {
            const Tensor& x = cache.layer_inputs[li];
            const std::size_t n = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
            const std::size_t win = p->window;
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t c = 0; c < ch; ++c) {
                    for (std::size_t py = 0; py < h / win; ++py) {
                        for (std::size_t px = 0; px < w / win; ++px) {
                            double best = -HUGE_VAL, second = -HUGE_VAL;
                            for (std::size_t u = 0; u < win; ++u) {
                                for (std::size_t v = 0; v < win; ++v) {
                                    const double val =
                                        x[((b * ch + c) * h + py * win + u) * w + px * win + v];
                                    if (val > best) {
                                        second = best;
                                        best = val;
                                    } else if (val > second) {
                                        second = val;
                                    }
                                }
                            }
                            margin = std::min(margin, best - second);
                        }
                    }
                }
            }
        }
    }
    return margin;
}

double max_relative_gradient_error(const GradientSnapshot& a, const GradientSnapshot& b, double denom_floor) {
    check(a.names == b.names, "max_relative_gradient_error: snapshots cover different layer sets");
    double worst = 0.0;
    for (std::size_t gi = 0; gi < a.grads.size(); ++gi) {
        check(a.grads[gi].size() == b.grads[gi].size(), "max_relative_gradient_error: tensor count mismatch");
        for (std::size_t ti = 0; ti < a.grads[gi].size(); ++ti) {
            const Tensor& ta = a.grads[gi][ti];
            const Tensor& tb = b.grads[gi][ti];
            check(ta.same_shape(tb), "max_relative_gradient_error: shape mismatch in layer ", a.names[gi]);
            for (std::size_t i = 0; i < ta.size(); ++i) {
                const double err = std::abs(ta[i] - tb[i]) / (std::abs(tb[i]) + denom_floor);
                worst = std::max(worst, err);
            }
        }
    }
    return worst;
}

}  // namespace metalr
