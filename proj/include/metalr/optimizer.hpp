// SPDX-License-Identifier: Apache-2.0
//
// Online meta-learned layer-wise learning rates over plain SGD.
//
// One iteration, with g_j the batch-mean training gradient at theta_j:
//
//   lookahead       theta_hat_j = theta_j - alpha_j * g_j
//   hypergradient   h_j = -< g_val_j(theta_hat), g_j >
//   LR update       alpha_j' = alpha_j - eta * h_j            (constant)
//                   alpha_j' = alpha_j * (1 - beta * h_j)     (proportional)
//   clamp           alpha_j' into [lo, hi]
//   real update     theta_j <- theta_j - alpha_j' * g_j       (g_j reused)
//
// The hypergradient is exact for the one-step SGD lookahead: theta_hat_j is
// linear in alpha_j with d theta_hat_j / d alpha_j = -g_j, so the chain rule
// on the validation loss gives d L_val / d alpha_j = < grad L_val(theta_hat),
// -g_j > with no second-order terms. Two forward/backward pairs per
// iteration, nothing else.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metalr/model.hpp"
#include "metalr/tasks.hpp"

namespace metalr {

struct HyperLRPolicy {
    enum class Kind { Constant, Proportional };
    Kind kind = Kind::Proportional;
    double value = 0.1;  // eta for Constant, beta for Proportional

    // value must be finite and non-negative; zero gives the degenerate
    // fixed-LR schedule used as an SGD-equivalence check.
    static HyperLRPolicy constant(double eta);
    static HyperLRPolicy proportional(double beta);
    std::string to_string() const;
};

enum class ValidationMode { SeparateSet, HeldOutTrainingBatch };

// Per-layer step sizes, always observable inside [lo, hi].
class LearningRates {
public:
    static LearningRates uniform(std::vector<std::string> layers, double alpha0, double lo = 1e-6,
                                 double hi = 1e-2);
    // Explicit per-layer step sizes; every value must lie in [lo, hi].
    static LearningRates from_values(std::vector<std::string> layers, std::vector<double> alphas,
                                     double lo = 1e-6, double hi = 1e-2);

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<double>& alphas() const { return alpha_; }
    double at(const std::string& layer) const;
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    std::size_t iteration() const { return iteration_; }

private:
    LearningRates() = default;
    friend LearningRates update_lrs(const LearningRates&, const std::vector<double>&, const HyperLRPolicy&);
    friend LearningRates clamp(LearningRates lrs);

    std::vector<std::string> names_;
    std::vector<double> alpha_;
    double lo_ = 1e-6;
    double hi_ = 1e-2;
    std::size_t iteration_ = 0;
};

struct LayerMetaStep {
    std::string layer;
    double hypergradient = 0.0;
    double alpha_before = 0.0;
    double alpha_after = 0.0;
};

struct MetaStepReport {
    std::size_t iteration = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::vector<LayerMetaStep> layers;
};

struct LRTrace {
    std::vector<MetaStepReport> steps;

    // CSV columns: iteration,layer,alpha,hypergradient,train_loss,val_loss
    // one row per (iteration, layer), >= 9 significant digits.
    void write_csv(std::ostream& os) const;
    void write_csv_file(const std::string& path) const;
};

// theta_hat = theta - alpha . g, elementwise per layer; the input model is
// untouched.
Model lookahead(const Model& model, const LearningRates& lrs, const GradientSnapshot& g_train);

// h_j = -<g_val_j(theta_hat), g_train_j(theta)>, flattened over every tensor
// in the layer's group. Aligned with g_train.names.
std::vector<double> hypergradient(const GradientSnapshot& g_train,
                                  const GradientSnapshot& g_val_at_lookahead);

// Applies the hyper-LR policy, clamps, and advances the iteration counter.
// Non-finite hypergradients abort the run.
LearningRates update_lrs(const LearningRates& lrs, const std::vector<double>& h,
                         const HyperLRPolicy& policy);

LearningRates clamp(LearningRates lrs);

// theta <- theta - alpha' . g with the cached training gradient; recomputing
// the gradient would change nothing (it is evaluated at the same theta).
void apply_update(Model& model, const LearningRates& updated_lrs, const GradientSnapshot& g_train);

// One full online step; exactly 2 forward and 2 backward passes.
MetaStepReport meta_iteration(Model& model, const Batch& train_batch, const Batch& val_batch,
                              LearningRates& lrs, const HyperLRPolicy& policy, LossKind loss);

// SeparateSet draws from the validation stream. HeldOutTrainingBatch draws
// the next training batch; on epoch boundaries where the fresh permutation
// would hand back samples from this iteration's training batch, the stream is
// reshuffled until the index sets are disjoint (requires 2n <= N).
Batch select_validation_batch(ValidationMode mode, BatchStream* val_stream, BatchStream& train_stream,
                              const std::vector<std::size_t>& train_batch_indices);

struct MetaTrainOptions {
    std::size_t iterations = 0;
    std::size_t batch_size = 32;
    LossKind loss = LossKind::CrossEntropySoftmax;
    HyperLRPolicy policy = HyperLRPolicy::proportional(0.1);
    ValidationMode mode = ValidationMode::SeparateSet;
    double alpha0 = 1e-3;
    double lr_lo = 1e-6;
    double lr_hi = 1e-2;
    std::uint64_t stream_seed = 0;
    bool record_trace = true;
};

struct MetaTrainResult {
    LRTrace trace;                      // empty when record_trace is false
    std::optional<LearningRates> final_lrs;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
    std::size_t iterations_run = 0;
};

// Runs `iterations` meta steps on the model in place. SeparateSet requires a
// nonempty validation set; HeldOutTrainingBatch ignores it and validates on
// held-out training batches. Deterministic under fixed seeds. Aborts with the
// iteration index if the training loss goes non-finite.
MetaTrainResult train_metalr(Model& model, const Dataset& train_data, const Dataset* validation_data,
                             const MetaTrainOptions& options);

// Shared elementwise SGD step: theta_j -= alpha_j * g_j for every group with
// frozen[j] == 0. Both the meta path and the plain-SGD baselines route through
// this so their arithmetic is bit-identical.
void sgd_step_groups(Model& model, const std::vector<double>& per_layer_alpha, const GradientSnapshot& g,
                     const std::vector<std::uint8_t>& frozen);

}  // namespace metalr
