// SPDX-License-Identifier: Apache-2.0
#include "metalr/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "metalr/common.hpp"

namespace metalr {

HyperLRPolicy HyperLRPolicy::constant(double eta) {
    check(std::isfinite(eta) && eta >= 0.0, "HyperLRPolicy: eta must be finite and >= 0, got ", eta);
    return HyperLRPolicy{Kind::Constant, eta};
}

HyperLRPolicy HyperLRPolicy::proportional(double beta) {
    check(std::isfinite(beta) && beta >= 0.0, "HyperLRPolicy: beta must be finite and >= 0, got ", beta);
    return HyperLRPolicy{Kind::Proportional, beta};
}

std::string HyperLRPolicy::to_string() const {
    return kind == Kind::Constant ? msg("constant(eta=", value, ")") : msg("proportional(beta=", value, ")");
}

LearningRates LearningRates::uniform(std::vector<std::string> layers, double alpha0, double lo, double hi) {
    const std::size_t n = layers.size();
    return from_values(std::move(layers), std::vector<double>(n, alpha0), lo, hi);
}

LearningRates LearningRates::from_values(std::vector<std::string> layers, std::vector<double> alphas,
                                         double lo, double hi) {
    check(!layers.empty(), "LearningRates: empty layer list");
    check(layers.size() == alphas.size(), "LearningRates: ", layers.size(), " layers vs ", alphas.size(),
          " step sizes");
    check(lo > 0.0 && lo <= hi, "LearningRates: need 0 < lo <= hi, got lo=", lo, " hi=", hi);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        check(alphas[i] >= lo && alphas[i] <= hi, "LearningRates: alpha=", alphas[i], " for layer '",
              layers[i], "' outside clamp bounds [", lo, ",", hi, "]");
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : layers) {
        check(seen.insert(n).second, "LearningRates: duplicate layer name '", n, "'");
    }
    LearningRates lrs;
    lrs.names_ = std::move(layers);
    lrs.alpha_ = std::move(alphas);
    lrs.lo_ = lo;
    lrs.hi_ = hi;
    return lrs;
}

double LearningRates::at(const std::string& layer) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == layer) return alpha_[i];
    }
    fail_arg("LearningRates: no layer named '", layer, "'");
}

namespace {

void check_layer_alignment(const std::vector<std::string>& a, const std::vector<std::string>& b,
                           const char* what) {
    check(a == b, what, ": layer sets differ");
}

std::vector<std::string> model_group_names(const Model& model) { return model.layer_groups(); }

}  // namespace

Model lookahead(const Model& model, const LearningRates& lrs, const GradientSnapshot& g_train) {
    check_layer_alignment(model_group_names(model), g_train.names, "lookahead(model vs gradients)");
    check_layer_alignment(lrs.names(), g_train.names, "lookahead(learning rates vs gradients)");
    Model ahead = model;
    std::vector<std::uint8_t> frozen(lrs.names().size(), 0);
    sgd_step_groups(ahead, lrs.alphas(), g_train, frozen);
    return ahead;
}

std::vector<double> hypergradient(const GradientSnapshot& g_train,
                                  const GradientSnapshot& g_val_at_lookahead) {
    check_layer_alignment(g_train.names, g_val_at_lookahead.names, "hypergradient");
    std::vector<double> h(g_train.names.size(), 0.0);
    for (std::size_t j = 0; j < g_train.names.size(); ++j) {
        const auto& gt = g_train.grads[j];
        const auto& gv = g_val_at_lookahead.grads[j];
        check(gt.size() == gv.size(), "hypergradient: tensor count mismatch in layer '", g_train.names[j],
              "'");
        double s = 0.0;
        for (std::size_t t = 0; t < gt.size(); ++t) {
            check(gt[t].same_shape(gv[t]), "hypergradient: shape mismatch in layer '", g_train.names[j],
                  "', ", shape_to_string(gt[t].shape()), " vs ", shape_to_string(gv[t].shape()));
            s += dot(gv[t], gt[t]);
        }
        h[j] = -s;
    }
    return h;
}

LearningRates clamp(LearningRates lrs) {
    for (double& a : lrs.alpha_) a = std::min(lrs.hi_, std::max(lrs.lo_, a));
    return lrs;
}

LearningRates update_lrs(const LearningRates& lrs, const std::vector<double>& h,
                         const HyperLRPolicy& policy) {
    check(h.size() == lrs.names().size(), "update_lrs: hypergradient count ", h.size(), " vs ",
          lrs.names().size(), " layers");
    LearningRates out = lrs;
    for (std::size_t j = 0; j < h.size(); ++j) {
        check_not_diverged(std::isfinite(h[j]), "update_lrs: non-finite hypergradient for layer '", lrs.names()[j],
                    "' at iteration ", lrs.iteration(), "; aborting run");
        if (policy.kind == HyperLRPolicy::Kind::Constant) {
            out.alpha_[j] = lrs.alphas()[j] - policy.value * h[j];
        } else {
            out.alpha_[j] = lrs.alphas()[j] * (1.0 - policy.value * h[j]);
        }
    }
    out = clamp(std::move(out));
    out.iteration_ = lrs.iteration() + 1;
    return out;
}

void apply_update(Model& model, const LearningRates& updated_lrs, const GradientSnapshot& g_train) {
    check_layer_alignment(model_group_names(model), g_train.names, "apply_update(model vs gradients)");
    check_layer_alignment(updated_lrs.names(), g_train.names, "apply_update(learning rates vs gradients)");
    std::vector<std::uint8_t> frozen(updated_lrs.names().size(), 0);
    sgd_step_groups(model, updated_lrs.alphas(), g_train, frozen);
}

void sgd_step_groups(Model& model, const std::vector<double>& per_layer_alpha, const GradientSnapshot& g,
                     const std::vector<std::uint8_t>& frozen) {
    auto groups = model.mutable_groups();
    check(groups.size() == per_layer_alpha.size() && groups.size() == frozen.size() &&
              groups.size() == g.names.size(),
          "sgd_step_groups: group count mismatch");
    for (std::size_t j = 0; j < groups.size(); ++j) {
        if (frozen[j]) continue;
        check(groups[j].name == g.names[j], "sgd_step_groups: layer order mismatch, '", groups[j].name,
              "' vs '", g.names[j], "'");
        const auto& grads = g.grads[j];
        check(grads.size() == groups[j].tensors.size(), "sgd_step_groups: tensor count mismatch in '",
              groups[j].name, "'");
        for (std::size_t t = 0; t < grads.size(); ++t) {
            axpy(-per_layer_alpha[j], grads[t], *groups[j].tensors[t]);
        }
    }
}

MetaStepReport meta_iteration(Model& model, const Batch& train_batch, const Batch& val_batch,
                              LearningRates& lrs, const HyperLRPolicy& policy, LossKind loss) {
    check(train_batch.size() == val_batch.size(), "meta_iteration: batch sizes differ (train ",
          train_batch.size(), ", validation ", val_batch.size(), ")");
    const std::size_t t = lrs.iteration();

    ForwardCache train_cache = model.forward(train_batch.inputs);
    const double train_loss = compute_loss(train_cache.logits, train_batch.labels, loss);
    check_not_diverged(std::isfinite(train_loss), "training diverged: non-finite training loss at iteration ", t);
    GradientSnapshot g_train = model.backward(train_cache, train_batch.labels, loss);

    Model ahead = lookahead(model, lrs, g_train);
    ForwardCache val_cache = ahead.forward(val_batch.inputs);
    const double val_loss = compute_loss(val_cache.logits, val_batch.labels, loss);
    check_not_diverged(std::isfinite(val_loss), "training diverged: non-finite validation loss at iteration ", t);
    GradientSnapshot g_val = ahead.backward(val_cache, val_batch.labels, loss);

    const std::vector<double> h = hypergradient(g_train, g_val);
    const std::vector<double> alpha_before = lrs.alphas();
    lrs = update_lrs(lrs, h, policy);
    apply_update(model, lrs, g_train);

    MetaStepReport report;
    report.iteration = t;
    report.train_loss = train_loss;
    report.val_loss = val_loss;
    report.layers.reserve(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        report.layers.push_back(LayerMetaStep{lrs.names()[j], h[j], alpha_before[j], lrs.alphas()[j]});
    }
    return report;
}

Batch select_validation_batch(ValidationMode mode, BatchStream* val_stream, BatchStream& train_stream,
                              const std::vector<std::size_t>& train_batch_indices) {
    if (mode == ValidationMode::SeparateSet) {
        check(val_stream != nullptr, "select_validation_batch: separate-set mode needs a validation stream");
        return val_stream->next();
    }
    check(2 * train_stream.batch_size() <= train_stream.dataset().size(),
          "select_validation_batch: held-out training batches need 2n <= N (n=",
          train_stream.batch_size(), ", N=", train_stream.dataset().size(), ")");
    const std::unordered_set<std::size_t> used(train_batch_indices.begin(), train_batch_indices.end());
    for (;;) {
        Batch candidate = train_stream.next();
        const bool disjoint = std::none_of(candidate.indices.begin(), candidate.indices.end(),
                                           [&](std::size_t i) { return used.count(i) > 0; });
        if (disjoint) return candidate;
        // only reachable at an epoch boundary: the fresh permutation handed
        // back samples from this iteration's training batch
        train_stream.reshuffle_now();
    }
}

MetaTrainResult train_metalr(Model& model, const Dataset& train_data, const Dataset* validation_data,
                             const MetaTrainOptions& options) {
    check(options.batch_size > 0, "train_metalr: batch size must be positive");
    BatchStream train_stream(train_data, options.batch_size, mix_seed(options.stream_seed, "train"));
    std::optional<BatchStream> val_stream;
    if (options.mode == ValidationMode::SeparateSet) {
        check(validation_data != nullptr && validation_data->size() > 0,
              "train_metalr: separate-set validation requires a nonempty validation dataset");
        val_stream.emplace(*validation_data, options.batch_size, mix_seed(options.stream_seed, "val"));
    } else {
        check(2 * options.batch_size <= train_data.size(),
              "train_metalr: held-out training validation needs 2n <= N (n=", options.batch_size,
              ", N=", train_data.size(), ")");
    }

    MetaTrainResult result;
    if (options.iterations == 0) return result;

    LearningRates lrs = LearningRates::uniform(model.layer_groups(), options.alpha0, options.lr_lo,
                                               options.lr_hi);
    if (options.record_trace) result.trace.steps.reserve(options.iterations);
    for (std::size_t t = 0; t < options.iterations; ++t) {
        Batch train_batch = train_stream.next();
        Batch val_batch = select_validation_batch(options.mode, val_stream ? &*val_stream : nullptr,
                                                  train_stream, train_batch.indices);
        MetaStepReport report;
        try {
            report = meta_iteration(model, train_batch, val_batch, lrs, options.policy, options.loss);
        } catch (const DivergenceError& e) {
            throw DivergenceError(msg("iteration ", t, ": ", e.what()));
        }
        result.final_train_loss = report.train_loss;
        result.final_val_loss = report.val_loss;
        if (options.record_trace) result.trace.steps.push_back(std::move(report));
    }
    result.final_lrs = lrs;
    result.iterations_run = options.iterations;
    return result;
}

void LRTrace::write_csv(std::ostream& os) const {
    os << "iteration,layer,alpha,hypergradient,train_loss,val_loss\n";
    char buf[512];
    for (const MetaStepReport& step : steps) {
        for (const LayerMetaStep& l : step.layers) {
            std::snprintf(buf, sizeof buf, "%zu,%s,%.12g,%.12g,%.12g,%.12g\n", step.iteration,
                          l.layer.c_str(), l.alpha_after, l.hypergradient, step.train_loss, step.val_loss);
            os << buf;
        }
    }
}

void LRTrace::write_csv_file(const std::string& path) const {
    std::ofstream os(path);
    check_state(os.good(), "LRTrace: cannot open '", path, "' for writing");
    write_csv(os);
    check_state(os.good(), "LRTrace: write failure on '", path, "'");
}

}  // namespace metalr
