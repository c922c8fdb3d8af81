// SPDX-License-Identifier: Apache-2.0
//
// Fixed-LR fine-tuning schemes the meta-learned LRs are compared against:
// constant LR over all layers, frozen-prefix variants (last-layer-only as the
// extreme), and the exhaustive per-prefix sweep. All of them run through the
// same SGD step and batch streams as the meta path, so measured differences
// isolate the scheduling scheme.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metalr/optimizer.hpp"
#include "metalr/tasks.hpp"

namespace metalr {

struct BaselineScheme {
    enum class Kind { AllLayers, LastLayerOnly, LayerwiseSweep };
    Kind kind = Kind::AllLayers;
    double alpha = 1e-3;

    // alpha must lie in the LR clamp range [1e-6, 1e-2].
    static BaselineScheme all_layers(double alpha);
    static BaselineScheme last_layer_only(double alpha);
    static BaselineScheme layerwise_sweep(double alpha);
};

struct SgdOptions {
    std::size_t iterations = 0;
    std::size_t batch_size = 32;
    LossKind loss = LossKind::CrossEntropySoftmax;
    double alpha = 1e-3;
    // When nonempty, overrides `alpha` with one step size per layer group.
    std::vector<double> per_layer_alpha;
    // First k parameter groups receive zero updates (bitwise unchanged).
    std::size_t frozen_prefix = 0;
    std::uint64_t stream_seed = 0;
};

struct SgdResult {
    double final_train_loss = 0.0;
    std::size_t iterations_run = 0;
};

// Plain SGD loop: one forward/backward pair per iteration. Aborts with the
// iteration index if the training loss goes non-finite.
SgdResult train_sgd(Model& model, const Dataset& train_data, const SgdOptions& options);

// Direct tuning of all layers at one constant LR; alpha must lie in [1e-6, 1e-2].
SgdResult finetune_constant(Model& model, const Dataset& train_data, double alpha, std::size_t iterations,
                            std::size_t batch_size, LossKind loss, std::uint64_t stream_seed);

// Freezes the first k of d parameter groups (0 <= k < d) and trains the rest.
// k = d-1 is the last-layer-only scheme.
SgdResult finetune_frozen_prefix(Model& model, const Dataset& train_data, std::size_t k, double alpha,
                                 std::size_t iterations, std::size_t batch_size, LossKind loss,
                                 std::uint64_t stream_seed);

struct SweepEntry {
    std::size_t frozen_prefix = 0;
    double val_accuracy = 0.0;
    double final_train_loss = 0.0;
    double wall_clock_s = 0.0;
};

struct LayerwiseSweepResult {
    std::size_t best_k = 0;
    std::vector<SweepEntry> per_k;   // k = 0 .. d-1
    Model best_model;
    double total_wall_clock_s = 0.0;
};

// Runs finetune_frozen_prefix for every k in 0..d-1 with seed-aligned data
// order and picks the best validation accuracy. Ties break toward larger k
// (more frozen layers, cheaper updates). Cost is ~d single runs.
LayerwiseSweepResult layerwise_sweep(const Model& pretrained, const TransferTask& task, double alpha,
                                     std::size_t iterations, std::size_t batch_size, LossKind loss,
                                     std::uint64_t stream_seed);

// Tie rule used by the sweep, exposed for direct testing.
std::size_t select_best_prefix(const std::vector<SweepEntry>& entries);

}  // namespace metalr
