// SPDX-License-Identifier: Apache-2.0
//
// Transfer-task construction and deterministic data streams. The synthetic
// generator builds source/target pairs whose layer transferability is known by
// construction: both domains share one feature projection, but label heads
// differ, so a model pretrained on the source owns a transferable feature
// layer and a head that must be relearned.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metalr/rng.hpp"
#include "metalr/tensor.hpp"

namespace metalr {

struct Dataset {
    Tensor inputs;   // [N, ...feature shape]
    Tensor labels;   // [N]
    std::size_t num_classes = 0;  // 0 for regression targets
    std::string name;

    std::size_t size() const { return inputs.size() == 0 ? 0 : inputs.dim(0); }
    Shape sample_shape() const;
    Dataset subset(const std::vector<std::size_t>& indices, const std::string& new_name) const;
    static Dataset concat(const Dataset& a, const Dataset& b, const std::string& new_name);
    void validate() const;
};

struct TransferTask {
    Dataset source;
    Dataset target_train;
    Dataset target_val;
    Dataset target_test;
    std::string transferability_note;

    // target_train + target_val, for schemes that validate on training batches
    // and therefore leave no data walled off.
    Dataset target_train_pool() const;
};

struct SynthTaskParams {
    std::uint64_t seed = 1;
    std::size_t input_dim = 16;
    std::size_t feature_dim = 6;
    std::size_t classes = 2;
    std::size_t n_source = 4000;
    std::size_t n_target = 600;
    std::size_t n_target_test = 2000;
    double noise = 0.05;            // label-flip probability
    double val_fraction = 0.25;
    // Similarity of the two label heads in [0, 1). Partial correlation keeps a
    // source-pretrained head better than chance on the target (so replacing it
    // visibly costs loss) while still forcing it to be relearned.
    double head_correlation = 0.0;
};

// Ground-truth construction: inputs x ~ N(0, I); shared features
// z = relu(W* x) with unit-norm rows of W*; source labels argmax(A z), target
// labels argmax(B z) with B = c A + sqrt(1 - c^2) G for fresh Gaussian G;
// labels flipped to a different class with probability `noise`.
TransferTask synth_shared_features_task(const SynthTaskParams& params);

// The generator's hidden quantities, exposed for verification of the
// known-by-construction transferability claims.
struct SynthTaskInternals {
    Tensor feature_projection;  // W* [feature_dim, input_dim]
    Tensor source_head;         // A  [classes, feature_dim]
    Tensor target_head;         // B  [classes, feature_dim]
};
SynthTaskInternals synth_task_internals(const SynthTaskParams& params);

// Shared feature map z = relu(W* x) for a batch of inputs.
Tensor synth_shared_features(const SynthTaskParams& params, const Tensor& inputs);

// Deterministic seeded split into ceil((1-f)N) train and floor(fN) validation.
std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset, double fraction,
                                                   std::uint64_t seed);

struct Batch {
    Tensor inputs;
    Tensor labels;
    std::vector<std::size_t> indices;
    std::size_t size() const { return indices.size(); }
};

// Shuffled epochs with drop-last batching: every batch has exactly n samples,
// each epoch is a fresh permutation.
class BatchStream {
public:
    BatchStream(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

    Batch next();
    // Abandons the rest of the current epoch and starts a fresh permutation.
    void reshuffle_now();

    std::size_t batch_size() const { return batch_size_; }
    std::size_t batches_per_epoch() const { return dataset_->size() / batch_size_; }
    const Dataset& dataset() const { return *dataset_; }

private:
    const Dataset* dataset_;
    std::size_t batch_size_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

Batch gather_batch(const Dataset& dataset, const std::vector<std::size_t>& indices);

// IDX files (big-endian dims, unsigned-byte payload). Image payloads are
// normalized to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path, const std::string& name);
void write_idx(const Dataset& dataset, const std::string& images_path, const std::string& labels_path);

// Headered CSV: `label,f1,...,fk`. num_classes = 0 infers the class count from
// the labels.
Dataset load_csv(const std::string& path, std::size_t num_classes, const std::string& name);
void write_csv(const Dataset& dataset, const std::string& path);

}  // namespace metalr
