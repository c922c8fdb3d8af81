// SPDX-License-Identifier: Apache-2.0
#include "metalr/baselines.hpp"

#include <chrono>
#include <cmath>

#include "metalr/common.hpp"
#include "metalr/evaluate.hpp"

namespace metalr {

SgdResult train_sgd(Model& model, const Dataset& train_data, const SgdOptions& options) {
    const std::size_t d = model.depth();
    check(options.frozen_prefix < d || options.iterations == 0,
          "train_sgd: frozen prefix ", options.frozen_prefix, " must be < depth ", d);
    std::vector<double> alphas = options.per_layer_alpha;
    if (alphas.empty()) {
        alphas.assign(d, options.alpha);
    }
    check(alphas.size() == d, "train_sgd: got ", alphas.size(), " per-layer step sizes for depth ", d);
    std::vector<std::uint8_t> frozen(d, 0);
    for (std::size_t j = 0; j < options.frozen_prefix; ++j) frozen[j] = 1;

    SgdResult result;
    if (options.iterations == 0) return result;

    BatchStream stream(train_data, options.batch_size, mix_seed(options.stream_seed, "train"));
    for (std::size_t t = 0; t < options.iterations; ++t) {
        Batch batch = stream.next();
        try {
            ForwardCache cache = model.forward(batch.inputs);
            const double loss = compute_loss(cache.logits, batch.labels, options.loss);
            check_not_diverged(std::isfinite(loss),
                               "training diverged: non-finite training loss");
            GradientSnapshot g = model.backward(cache, batch.labels, options.loss);
            sgd_step_groups(model, alphas, g, frozen);
            result.final_train_loss = loss;
        } catch (const DivergenceError& e) {
            throw DivergenceError(msg("iteration ", t, ": ", e.what()));
        }
    }
    result.iterations_run = options.iterations;
    return result;
}

namespace {

void check_baseline_alpha(double alpha) {
    check(alpha >= 1e-6 && alpha <= 1e-2, "baseline: alpha=", alpha, " outside [1e-6, 1e-2]");
}

}  // namespace

SgdResult finetune_constant(Model& model, const Dataset& train_data, double alpha, std::size_t iterations,
                            std::size_t batch_size, LossKind loss, std::uint64_t stream_seed) {
    check_baseline_alpha(alpha);
    SgdOptions opt;
    opt.iterations = iterations;
    opt.batch_size = batch_size;
    opt.loss = loss;
    opt.alpha = alpha;
    opt.stream_seed = stream_seed;
    return train_sgd(model, train_data, opt);
}

SgdResult finetune_frozen_prefix(Model& model, const Dataset& train_data, std::size_t k, double alpha,
                                 std::size_t iterations, std::size_t batch_size, LossKind loss,
                                 std::uint64_t stream_seed) {
    check_baseline_alpha(alpha);
    check(k < model.depth(), "finetune_frozen_prefix: k=", k, " out of range for depth ", model.depth());
    SgdOptions opt;
    opt.iterations = iterations;
    opt.batch_size = batch_size;
    opt.loss = loss;
    opt.alpha = alpha;
    opt.frozen_prefix = k;
    opt.stream_seed = stream_seed;
    return train_sgd(model, train_data, opt);
}

std::size_t select_best_prefix(const std::vector<SweepEntry>& entries) {
    check(!entries.empty(), "select_best_prefix: empty sweep");
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); ++i) {
        // >= : ties go to the larger k
        if (entries[i].val_accuracy >= entries[best].val_accuracy) best = i;
    }
    return entries[best].frozen_prefix;
}

LayerwiseSweepResult layerwise_sweep(const Model& pretrained, const TransferTask& task, double alpha,
                                     std::size_t iterations, std::size_t batch_size, LossKind loss,
                                     std::uint64_t stream_seed) {
    check_baseline_alpha(alpha);
    const std::size_t d = pretrained.depth();
    LayerwiseSweepResult result{0, {}, pretrained, 0.0};

    using clock = std::chrono::steady_clock;
    const auto sweep_start = clock::now();
    std::vector<Model> trained;
    trained.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        const auto run_start = clock::now();
        Model candidate = pretrained;
        // same stream seed for every k: runs are seed-aligned, differences
        // isolate the freezing choice
        SgdResult run = finetune_frozen_prefix(candidate, task.target_train, k, alpha, iterations,
                                               batch_size, loss, stream_seed);
        const double val_acc = evaluate_accuracy(candidate, task.target_val);
        const double secs = std::chrono::duration<double>(clock::now() - run_start).count();
        result.per_k.push_back(SweepEntry{k, val_acc, run.final_train_loss, secs});
        trained.push_back(std::move(candidate));
    }
    result.total_wall_clock_s = std::chrono::duration<double>(clock::now() - sweep_start).count();
    result.best_k = select_best_prefix(result.per_k);
    result.best_model = std::move(trained[result.best_k]);
    return result;
}

}  // namespace metalr
