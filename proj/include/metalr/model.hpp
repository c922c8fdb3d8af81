// SPDX-License-Identifier: Apache-2.0
//
// Small named-layer models over the tensor core: affine, 2-D convolution
// (stride 1), ReLU, max-pool, with a fused softmax head via the loss. One
// forward pass caches everything a single backward pass needs; there is no
// persistent graph.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "metalr/loss.hpp"
#include "metalr/tensor.hpp"

namespace metalr {

enum class Padding { Valid, Same };

struct LayerDesc {
    enum class Kind { Affine, Conv2D, ReLU, MaxPool2D };
    Kind kind = Kind::ReLU;
    std::size_t units = 0;         // Affine: output features
    std::size_t channels = 0;      // Conv2D: output channels
    std::size_t kernel = 0;        // Conv2D: square kernel size
    Padding padding = Padding::Same;
    std::size_t window = 0;        // MaxPool2D
    bool bias = true;

    static LayerDesc affine(std::size_t units, bool bias = true);
    static LayerDesc conv2d(std::size_t channels, std::size_t kernel, Padding padding = Padding::Same,
                            bool bias = true);
    static LayerDesc relu();
    static LayerDesc max_pool(std::size_t window);
};

struct ModelSpec {
    Shape input_shape;             // per-sample: {features} or {channels, height, width}
    std::vector<LayerDesc> layers;
    std::uint64_t seed = 0;

    // Fully connected chain with ReLU between consecutive affine layers.
    // dims = {in, hidden..., out}; layers are named fc1..fcN.
    static ModelSpec mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

    // conv(kernel x kernel, same padding) + ReLU + max-pool(2) per conv stage,
    // then a fully connected head; layers are named conv1.., fc1.
    static ModelSpec cnn(const Shape& input_shape, const std::vector<std::size_t>& conv_channels,
                         std::size_t kernel, std::size_t classes, std::uint64_t seed);
};

struct AffineLayer {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]
    bool has_bias = true;
};

struct Conv2DLayer {
    Tensor weight;  // [out_ch, in_ch, k, k]
    Tensor bias;    // [out_ch]
    bool has_bias = true;
    Padding padding = Padding::Same;
};

struct ReLULayer {};

struct MaxPool2DLayer {
    std::size_t window = 2;
};

struct Layer {
    std::string name;  // nonempty iff the layer holds parameters
    std::variant<AffineLayer, Conv2DLayer, ReLULayer, MaxPool2DLayer> impl;
};

// Per-layer gradients of the batch-mean loss, depth order, shape-congruent
// with the owning model's parameter groups.
struct GradientSnapshot {
    std::vector<std::string> names;
    std::vector<std::vector<Tensor>> grads;  // per group: weight[, bias]
    std::size_t batch_size = 0;
    std::uint64_t model_version = 0;

    std::size_t index_of(const std::string& name) const;
    const std::vector<Tensor>& at(const std::string& name) const;
};

struct ForwardCache {
    std::uint64_t model_version = 0;
    std::size_t batch = 0;
    std::vector<Tensor> layer_inputs;                    // input seen by each layer
    std::vector<std::vector<std::size_t>> pool_argmax;   // per layer; empty unless max-pool
    Tensor logits;
};

struct ParameterGroupView {
    std::string name;
    std::size_t depth = 0;  // 1-based
    std::vector<const Tensor*> tensors;
};

struct MutableParameterGroup {
    std::string name;
    std::size_t depth = 0;
    std::vector<Tensor*> tensors;
};

struct PassCounters {
    std::uint64_t forwards = 0;
    std::uint64_t backwards = 0;
    void reset() { forwards = backwards = 0; }
};

class Model {
public:
    explicit Model(const ModelSpec& spec);

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const { return output_shape_; }
    std::uint64_t init_seed() const { return seed_; }

    // Number of parameterized layers d; activations and pools excluded.
    std::size_t depth() const;
    // Group names in stable depth order.
    std::vector<std::string> layer_groups() const;
    std::vector<ParameterGroupView> groups() const;
    // Mutable access to parameters; invalidates outstanding forward caches.
    std::vector<MutableParameterGroup> mutable_groups();

    std::uint64_t version() const { return version_; }

    // inputs: [batch, ...input_shape]. Deterministic; the cache feeds exactly
    // one backward pass.
    ForwardCache forward(const Tensor& inputs) const;

    // Exact reverse-mode gradients of the batch-mean loss. Rejects caches made
    // before the most recent parameter mutation.
    GradientSnapshot backward(const ForwardCache& cache, const Tensor& labels, LossKind kind) const;

    // Re-initializes the last k parameter groups from a fresh seed; the
    // remaining groups are untouched. Requires 1 <= k < depth().
    void reinit_head(std::size_t k, std::uint64_t seed);

    // Flat binary model file; round-trips bit-exactly.
    void save(const std::string& path) const;
    static Model load(const std::string& path);

    PassCounters& counters() const { return *counters_; }

    const std::vector<Layer>& layers() const { return layers_; }

private:
    Model() = default;
    void validate_and_name();
    void init_parameters(std::size_t first_param_layer, std::uint64_t seed);

    std::vector<Layer> layers_;
    Shape input_shape_;
    Shape output_shape_;
    std::uint64_t seed_ = 0;
    std::uint64_t version_ = 0;
    // Copies (e.g. the lookahead model) report into the same counter sink so a
    // whole optimizer step can be instrumented end to end.
    std::shared_ptr<PassCounters> counters_ = std::make_shared<PassCounters>();
};

// Spec-validated constructors for the two supported families.
Model build_mlp(const ModelSpec& spec);
Model build_cnn(const ModelSpec& spec);

}  // namespace metalr
