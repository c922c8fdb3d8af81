// SPDX-License-Identifier: Apache-2.0
#include "metalr/evaluate.hpp"

#include "metalr/common.hpp"

namespace metalr {

double evaluate_accuracy(const Model& model, const Dataset& dataset) {
    check(dataset.num_classes >= 2, "evaluate_accuracy: dataset '", dataset.name, "' is not classification");
    const Tensor logits = model.forward(dataset.inputs).logits;
    check(logits.rank() == 2 && logits.dim(1) == dataset.num_classes, "evaluate_accuracy: model emits ",
          shape_to_string(logits.shape()), " for ", dataset.num_classes, " classes");
    const std::size_t n = logits.dim(0);
    const std::size_t k = logits.dim(1);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.data() + i * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (row[j] > row[best]) best = j;
        }
        if (static_cast<double>(best) == dataset.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

double evaluate_loss(const Model& model, const Dataset& dataset, LossKind kind) {
    const Tensor logits = model.forward(dataset.inputs).logits;
    return compute_loss(logits, dataset.labels, kind);
}

}  // namespace metalr
