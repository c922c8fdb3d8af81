// SPDX-License-Identifier: Apache-2.0
#include "metalr/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "metalr/common.hpp"
#include "metalr/rng.hpp"

namespace metalr {

namespace {

constexpr char kMagic[4] = {'M', 'L', 'R', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

bool is_parameterized(const Layer& layer) {
    return std::holds_alternative<AffineLayer>(layer.impl) || std::holds_alternative<Conv2DLayer>(layer.impl);
}

struct PadOffsets {
    std::size_t out_h = 0, out_w = 0;
    std::ptrdiff_t top = 0, left = 0;
};

PadOffsets conv_geometry(const Conv2DLayer& conv, std::size_t h, std::size_t w, const std::string& name) {
    const std::size_t k = conv.weight.dim(2);
    PadOffsets g;
    if (conv.padding == Padding::Same) {
        g.out_h = h;
        g.out_w = w;
        g.top = static_cast<std::ptrdiff_t>((k - 1) / 2);
        g.left = g.top;
    } else {
        check(h >= k && w >= k, "layer '", name, "': valid convolution needs input >= kernel, got ", h, "x",
              w, " vs kernel ", k);
        g.out_h = h - k + 1;
        g.out_w = w - k + 1;
    }
    return g;
}

}  // namespace

LayerDesc LayerDesc::affine(std::size_t units, bool bias) {
    LayerDesc d;
    d.kind = Kind::Affine;
    d.units = units;
    d.bias = bias;
    return d;
}

LayerDesc LayerDesc::conv2d(std::size_t channels, std::size_t kernel, Padding padding, bool bias) {
    LayerDesc d;
    d.kind = Kind::Conv2D;
    d.channels = channels;
    d.kernel = kernel;
    d.padding = padding;
    d.bias = bias;
    return d;
}

LayerDesc LayerDesc::relu() {
    LayerDesc d;
    d.kind = Kind::ReLU;
    return d;
}

LayerDesc LayerDesc::max_pool(std::size_t window) {
    LayerDesc d;
    d.kind = Kind::MaxPool2D;
    d.window = window;
    return d;
}

ModelSpec ModelSpec::mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    check(dims.size() >= 2, "ModelSpec::mlp: need at least input and output sizes");
    ModelSpec spec;
    spec.input_shape = {dims[0]};
    spec.seed = seed;
    for (std::size_t i = 1; i < dims.size(); ++i) {
        spec.layers.push_back(LayerDesc::affine(dims[i]));
        if (i + 1 < dims.size()) spec.layers.push_back(LayerDesc::relu());
    }
    return spec;
}

ModelSpec ModelSpec::cnn(const Shape& input_shape, const std::vector<std::size_t>& conv_channels,
                         std::size_t kernel, std::size_t classes, std::uint64_t seed) {
    check(input_shape.size() == 3, "ModelSpec::cnn: input shape must be {channels, height, width}");
    check(!conv_channels.empty(), "ModelSpec::cnn: need at least one convolution stage");
    ModelSpec spec;
    spec.input_shape = input_shape;
    spec.seed = seed;
    for (std::size_t ch : conv_channels) {
        spec.layers.push_back(LayerDesc::conv2d(ch, kernel, Padding::Same));
        spec.layers.push_back(LayerDesc::relu());
        spec.layers.push_back(LayerDesc::max_pool(2));
    }
    spec.layers.push_back(LayerDesc::affine(classes));
    return spec;
}

Model::Model(const ModelSpec& spec) {
    check(!spec.input_shape.empty(), "Model: input shape must be nonempty");
    check(!spec.layers.empty(), "Model: at least one layer required");
    input_shape_ = spec.input_shape;
    seed_ = spec.seed;
    for (const LayerDesc& d : spec.layers) {
        Layer layer;
        switch (d.kind) {
            case LayerDesc::Kind::Affine: {
                check(d.units > 0, "Model: affine layer needs positive output size");
                AffineLayer a;
                a.has_bias = d.bias;
                layer.impl = std::move(a);
                break;
            }
            case LayerDesc::Kind::Conv2D: {
                check(d.channels > 0 && d.kernel > 0, "Model: conv layer needs positive channels and kernel");
                Conv2DLayer c;
                c.has_bias = d.bias;
                c.padding = d.padding;
                // weight shape filled in during the shape walk (needs input channels)
                layer.impl = std::move(c);
                break;
            }
            case LayerDesc::Kind::ReLU:
                layer.impl = ReLULayer{};
                break;
            case LayerDesc::Kind::MaxPool2D: {
                check(d.window > 1, "Model: max-pool window must be > 1");
                layer.impl = MaxPool2DLayer{d.window};
                break;
            }
        }
        layers_.push_back(std::move(layer));
    }
    // allot parameter shapes via the descriptor list
    Shape shape = input_shape_;
    std::size_t affine_idx = 0, conv_idx = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerDesc& d = spec.layers[i];
        Layer& layer = layers_[i];
        if (auto* a = std::get_if<AffineLayer>(&layer.impl)) {
            const std::size_t in = numel(shape);
            a->weight = Tensor({d.units, in});
            if (a->has_bias) a->bias = Tensor({d.units});
            layer.name = "fc" + std::to_string(++affine_idx);
            shape = {d.units};
        } else if (auto* c = std::get_if<Conv2DLayer>(&layer.impl)) {
            check(shape.size() == 3, "Model: conv layer ", conv_idx + 1,
                  " needs {channels, height, width} input, got ", shape_to_string(shape));
            c->weight = Tensor({d.channels, shape[0], d.kernel, d.kernel});
            if (c->has_bias) c->bias = Tensor({d.channels});
            layer.name = "conv" + std::to_string(++conv_idx);
            const PadOffsets g = conv_geometry(*c, shape[1], shape[2], layer.name);
            shape = {d.channels, g.out_h, g.out_w};
        } else if (auto* p = std::get_if<MaxPool2DLayer>(&layer.impl)) {
            check(shape.size() == 3, "Model: max-pool needs {channels, height, width} input, got ",
                  shape_to_string(shape));
            check(shape[1] % p->window == 0 && shape[2] % p->window == 0, "Model: max-pool window ",
                  p->window, " does not divide input ", shape_to_string(shape));
            shape = {shape[0], shape[1] / p->window, shape[2] / p->window};
        }
    }
    output_shape_ = shape;
    check(depth() >= 1, "Model: no parameterized layers");
    init_parameters(0, seed_);
}

void Model::init_parameters(std::size_t first_param_layer, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = first_param_layer; i < layers_.size(); ++i) {
        // He scaling when the unit feeds a ReLU (pooling in between is transparent).
        bool feeds_relu = false;
        for (std::size_t j = i + 1; j < layers_.size(); ++j) {
            if (std::holds_alternative<MaxPool2DLayer>(layers_[j].impl)) continue;
            feeds_relu = std::holds_alternative<ReLULayer>(layers_[j].impl);
            break;
        }
        const double gain = feeds_relu ? 2.0 : 1.0;
        if (auto* a = std::get_if<AffineLayer>(&layers_[i].impl)) {
            const double sd = std::sqrt(gain / static_cast<double>(a->weight.dim(1)));
            for (double& v : a->weight.values()) v = rng.normal(0.0, sd);
            if (a->has_bias) {
                for (double& v : a->bias.values()) v = 0.0;
            }
        } else if (auto* c = std::get_if<Conv2DLayer>(&layers_[i].impl)) {
            const std::size_t fan_in = c->weight.dim(1) * c->weight.dim(2) * c->weight.dim(3);
            const double sd = std::sqrt(gain / static_cast<double>(fan_in));
            for (double& v : c->weight.values()) v = rng.normal(0.0, sd);
            if (c->has_bias) {
                for (double& v : c->bias.values()) v = 0.0;
            }
        }
    }
    ++version_;
}

std::size_t Model::depth() const {
    std::size_t d = 0;
    for (const Layer& l : layers_) d += is_parameterized(l) ? 1 : 0;
    return d;
}

std::vector<std::string> Model::layer_groups() const {
    std::vector<std::string> names;
    for (const Layer& l : layers_) {
        if (is_parameterized(l)) names.push_back(l.name);
    }
    return names;
}

std::vector<ParameterGroupView> Model::groups() const {
    std::vector<ParameterGroupView> out;
    std::size_t depth = 0;
    for (const Layer& l : layers_) {
        if (!is_parameterized(l)) continue;
        ParameterGroupView g;
        g.name = l.name;
        g.depth = ++depth;
        if (const auto* a = std::get_if<AffineLayer>(&l.impl)) {
            g.tensors.push_back(&a->weight);
            if (a->has_bias) g.tensors.push_back(&a->bias);
        } else if (const auto* c = std::get_if<Conv2DLayer>(&l.impl)) {
            g.tensors.push_back(&c->weight);
            if (c->has_bias) g.tensors.push_back(&c->bias);
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<MutableParameterGroup> Model::mutable_groups() {
    ++version_;  // outstanding forward caches become stale
    std::vector<MutableParameterGroup> out;
    std::size_t depth = 0;
    for (Layer& l : layers_) {
        if (!is_parameterized(l)) continue;
        MutableParameterGroup g;
        g.name = l.name;
        g.depth = ++depth;
        if (auto* a = std::get_if<AffineLayer>(&l.impl)) {
            g.tensors.push_back(&a->weight);
            if (a->has_bias) g.tensors.push_back(&a->bias);
        } else if (auto* c = std::get_if<Conv2DLayer>(&l.impl)) {
            g.tensors.push_back(&c->weight);
            if (c->has_bias) g.tensors.push_back(&c->bias);
        }
        out.push_back(std::move(g));
    }
    return out;
}

ForwardCache Model::forward(const Tensor& inputs) const {
    check(inputs.rank() == input_shape_.size() + 1, "forward: input must be [batch, ",
          shape_to_string(input_shape_).substr(1), ", got ", shape_to_string(inputs.shape()));
    for (std::size_t i = 0; i < input_shape_.size(); ++i) {
        check(inputs.dim(i + 1) == input_shape_[i], "forward: input shape mismatch at model input, expected ",
              shape_to_string(input_shape_), " per sample, got ", shape_to_string(inputs.shape()));
    }
    const std::size_t n = inputs.dim(0);
    check(n > 0, "forward: empty batch");

    ForwardCache cache;
    cache.model_version = version_;
    cache.batch = n;
    cache.layer_inputs.reserve(layers_.size());
    cache.pool_argmax.resize(layers_.size());

    Tensor x = inputs;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& layer = layers_[li];
        cache.layer_inputs.push_back(x);
        if (const auto* a = std::get_if<AffineLayer>(&layer.impl)) {
            const std::size_t in = a->weight.dim(1);
            const std::size_t out = a->weight.dim(0);
            check(x.size() == n * in, "forward: layer '", layer.name, "' expected ", in,
                  " features per sample, got ", x.size() / n);
            Tensor y({n, out});
            for (std::size_t b = 0; b < n; ++b) {
                const double* xr = x.data() + b * in;
                double* yr = y.data() + b * out;
                for (std::size_t o = 0; o < out; ++o) {
                    const double* w = a->weight.data() + o * in;
                    double s = a->has_bias ? a->bias[o] : 0.0;
                    for (std::size_t i = 0; i < in; ++i) s += w[i] * xr[i];
                    yr[o] = s;
                }
            }
            x = std::move(y);
        } else if (const auto* c = std::get_if<Conv2DLayer>(&layer.impl)) {
            const std::size_t oc = c->weight.dim(0);
            const std::size_t ic = c->weight.dim(1);
            const std::size_t k = c->weight.dim(2);
            check(x.rank() == 4 && x.dim(1) == ic, "forward: layer '", layer.name, "' expected ", ic,
                  " input channels, got ", shape_to_string(x.shape()));
            const std::size_t h = x.dim(2), w = x.dim(3);
            const PadOffsets g = conv_geometry(*c, h, w, layer.name);
            Tensor y({n, oc, g.out_h, g.out_w});
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t o = 0; o < oc; ++o) {
                    const double bias = c->has_bias ? c->bias[o] : 0.0;
                    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                            double s = bias;
                            for (std::size_t ci = 0; ci < ic; ++ci) {
                                for (std::size_t u = 0; u < k; ++u) {
                                    const std::ptrdiff_t iy =
                                        static_cast<std::ptrdiff_t>(oy + u) - g.top;
                                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                    for (std::size_t v = 0; v < k; ++v) {
                                        const std::ptrdiff_t ix =
                                            static_cast<std::ptrdiff_t>(ox + v) - g.left;
                                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                        s += c->weight[((o * ic + ci) * k + u) * k + v] *
                                             x[((b * ic + ci) * h + static_cast<std::size_t>(iy)) * w +
                                               static_cast<std::size_t>(ix)];
                                    }
                                }
                            }
                            y[((b * oc + o) * g.out_h + oy) * g.out_w + ox] = s;
                        }
                    }
                }
            }
            x = std::move(y);
        } else if (std::holds_alternative<ReLULayer>(layer.impl)) {
            Tensor y = x;
            for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
            x = std::move(y);
        } else if (const auto* p = std::get_if<MaxPool2DLayer>(&layer.impl)) {
            check(x.rank() == 4, "forward: max-pool expects [batch, channels, h, w], got ",
                  shape_to_string(x.shape()));
            const std::size_t ch = x.dim(1), h = x.dim(2), w = x.dim(3);
            const std::size_t win = p->window;
            check(h % win == 0 && w % win == 0, "forward: max-pool window ", win, " does not divide ",
                  shape_to_string(x.shape()));
            const std::size_t oh = h / win, ow = w / win;
            Tensor y({n, ch, oh, ow});
            std::vector<std::size_t>& arg = cache.pool_argmax[li];
            arg.assign(y.size(), 0);
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t ci = 0; ci < ch; ++ci) {
                    for (std::size_t py = 0; py < oh; ++py) {
                        for (std::size_t px = 0; px < ow; ++px) {
                            double best = -HUGE_VAL;
                            std::size_t best_idx = 0;
                            for (std::size_t u = 0; u < win; ++u) {
                                for (std::size_t v = 0; v < win; ++v) {
                                    const std::size_t idx =
                                        ((b * ch + ci) * h + py * win + u) * w + px * win + v;
                                    if (x[idx] > best) {
                                        best = x[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                            const std::size_t oidx = ((b * ch + ci) * oh + py) * ow + px;
                            y[oidx] = best;
                            arg[oidx] = best_idx;
                        }
                    }
                }
            }
            x = std::move(y);
        }
    }
    cache.logits = std::move(x);
    counters_->forwards++;
    return cache;
}

GradientSnapshot Model::backward(const ForwardCache& cache, const Tensor& labels, LossKind kind) const {
    check_state(cache.model_version == version_,
                "backward: stale forward cache (parameters were mutated after forward)");
    check(cache.layer_inputs.size() == layers_.size(), "backward: malformed cache");

    GradientSnapshot snap;
    snap.batch_size = cache.batch;
    snap.model_version = version_;
    snap.names = layer_groups();
    snap.grads.resize(snap.names.size());

    Tensor dout = loss_gradient(cache.logits, labels, kind);
    std::size_t group = snap.names.size();
    const std::size_t n = cache.batch;

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& layer = layers_[li];
        const Tensor& x = cache.layer_inputs[li];
        if (const auto* a = std::get_if<AffineLayer>(&layer.impl)) {
            --group;
            const std::size_t in = a->weight.dim(1);
            const std::size_t out = a->weight.dim(0);
            Tensor dw({out, in});
            Tensor db = a->has_bias ? Tensor({out}) : Tensor();
            Tensor dx({n, in});
            for (std::size_t b = 0; b < n; ++b) {
                const double* xr = x.data() + b * in;
                const double* go = dout.data() + b * out;
                double* gx = dx.data() + b * in;
                for (std::size_t o = 0; o < out; ++o) {
                    const double g = go[o];
                    if (g != 0.0) {
                        double* wrow = dw.data() + o * in;
                        const double* w = a->weight.data() + o * in;
                        for (std::size_t i = 0; i < in; ++i) {
                            wrow[i] += g * xr[i];
                            gx[i] += g * w[i];
                        }
                    }
                    if (a->has_bias) db[o] += g;
                }
            }
            snap.grads[group].push_back(std::move(dw));
            if (a->has_bias) snap.grads[group].push_back(std::move(db));
            dout = dx.reshaped(x.shape());
        } else if (const auto* c = std::get_if<Conv2DLayer>(&layer.impl)) {
            --group;
            const std::size_t oc = c->weight.dim(0);
            const std::size_t ic = c->weight.dim(1);
            const std::size_t k = c->weight.dim(2);
            const std::size_t h = x.dim(2), w = x.dim(3);
            const PadOffsets g = conv_geometry(*c, h, w, layer.name);
            Tensor dw(c->weight.shape());
            Tensor db = c->has_bias ? Tensor({oc}) : Tensor();
            Tensor dx(x.shape());
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t o = 0; o < oc; ++o) {
                    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                            const double go = dout[((b * oc + o) * g.out_h + oy) * g.out_w + ox];
                            if (go == 0.0) continue;
                            if (c->has_bias) db[o] += go;
                            for (std::size_t ci = 0; ci < ic; ++ci) {
                                for (std::size_t u = 0; u < k; ++u) {
                                    const std::ptrdiff_t iy =
                                        static_cast<std::ptrdiff_t>(oy + u) - g.top;
                                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                                    for (std::size_t v = 0; v < k; ++v) {
                                        const std::ptrdiff_t ix =
                                            static_cast<std::ptrdiff_t>(ox + v) - g.left;
                                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                        const std::size_t widx = ((o * ic + ci) * k + u) * k + v;
                                        const std::size_t xidx =
                                            ((b * ic + ci) * h + static_cast<std::size_t>(iy)) * w +
                                            static_cast<std::size_t>(ix);
                                        dw[widx] += go * x[xidx];
                                        dx[xidx] += go * c->weight[widx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            snap.grads[group].push_back(std::move(dw));
            if (c->has_bias) snap.grads[group].push_back(std::move(db));
            dout = std::move(dx);
        } else if (std::holds_alternative<ReLULayer>(layer.impl)) {
            Tensor dx = dout;
            for (std::size_t i = 0; i < dx.size(); ++i) {
                if (x[i] <= 0.0) dx[i] = 0.0;
            }
            dout = std::move(dx);
        } else if (std::holds_alternative<MaxPool2DLayer>(layer.impl)) {
            Tensor dx(x.shape());
            const std::vector<std::size_t>& arg = cache.pool_argmax[li];
            check(arg.size() == dout.size(), "backward: malformed pool cache");
            for (std::size_t i = 0; i < dout.size(); ++i) dx[arg[i]] += dout[i];
            dout = std::move(dx);
        }
    }
    check(group == 0, "backward: group walk out of sync");
    for (const auto& tensors : snap.grads) {
        for (const Tensor& t : tensors) {
            check_not_diverged(t.all_finite(), "backward: non-finite gradient");
        }
    }
    counters_->backwards++;
    return snap;
}

void Model::reinit_head(std::size_t k, std::uint64_t seed) {
    const std::size_t d = depth();
    check(k >= 1 && k < d, "reinit_head: k must satisfy 1 <= k < depth, got k=", k, " with depth ", d);
    // locate the layer index of the first group to re-initialize
    std::size_t param_seen = 0;
    std::size_t first_layer = layers_.size();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!is_parameterized(layers_[i])) continue;
        if (param_seen == d - k) {
            first_layer = i;
            break;
        }
        ++param_seen;
    }
    init_parameters(first_layer, seed);
}

std::size_t GradientSnapshot::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    fail_arg("GradientSnapshot: no layer named '", name, "'");
}

const std::vector<Tensor>& GradientSnapshot::at(const std::string& name) const {
    return grads[index_of(name)];
}

// ---------------------------------------------------------------------------
// flat binary save/load

namespace {

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    put_bytes(os, s.data(), s.size());
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    check_state(static_cast<std::size_t>(is.gcount()) == n, "model file truncated while reading ", what);
}

std::uint8_t get_u8(std::istream& is, const char* what) {
    std::uint8_t v;
    get_bytes(is, &v, 1, what);
    return v;
}

std::uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    get_bytes(is, b, 4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is, const char* what) {
    unsigned char b[8];
    get_bytes(is, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const char* what) { return std::bit_cast<double>(get_u64(is, what)); }

std::string get_string(std::istream& is, const char* what) {
    const std::uint32_t len = get_u32(is, what);
    std::string s(len, '\0');
    if (len > 0) get_bytes(is, s.data(), len, what);
    return s;
}

}  // namespace

void Model::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    check_state(os.good(), "save: cannot open '", path, "' for writing");
    put_bytes(os, kMagic, 4);
    put_u32(os, kFormatVersion);
    put_u64(os, seed_);
    put_u32(os, static_cast<std::uint32_t>(input_shape_.size()));
    for (std::size_t d : input_shape_) put_u64(os, d);
    put_u32(os, static_cast<std::uint32_t>(layers_.size()));
    for (const Layer& l : layers_) {
        if (const auto* a = std::get_if<AffineLayer>(&l.impl)) {
            put_u8(os, 0);
            put_string(os, l.name);
            put_u8(os, a->has_bias ? 1 : 0);
            put_u64(os, a->weight.dim(0));
            put_u64(os, a->weight.dim(1));
        } else if (const auto* c = std::get_if<Conv2DLayer>(&l.impl)) {
            put_u8(os, 1);
            put_string(os, l.name);
            put_u8(os, c->has_bias ? 1 : 0);
            put_u8(os, c->padding == Padding::Same ? 1 : 0);
            put_u64(os, c->weight.dim(0));
            put_u64(os, c->weight.dim(1));
            put_u64(os, c->weight.dim(2));
        } else if (std::holds_alternative<ReLULayer>(l.impl)) {
            put_u8(os, 2);
        } else {
            put_u8(os, 3);
            put_u64(os, std::get<MaxPool2DLayer>(l.impl).window);
        }
    }
    for (const ParameterGroupView& g : groups()) {
        for (const Tensor* t : g.tensors) {
            for (double v : t->values()) put_f64(os, v);
        }
    }
    check_state(os.good(), "save: write failure on '", path, "'");
}

Model Model::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check_state(is.good(), "load: cannot open '", path, "'");
    char magic[4];
    get_bytes(is, magic, 4, "magic");
    check_state(std::equal(magic, magic + 4, kMagic), "load: '", path, "' is not a model file (bad magic)");
    const std::uint32_t version = get_u32(is, "format version");
    check_state(version == kFormatVersion, "load: unsupported model format version ", version);

    Model m;
    m.seed_ = get_u64(is, "seed");
    const std::uint32_t rank = get_u32(is, "input rank");
    for (std::uint32_t i = 0; i < rank; ++i) m.input_shape_.push_back(get_u64(is, "input shape"));
    const std::uint32_t n_layers = get_u32(is, "layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const std::uint8_t kind = get_u8(is, "layer kind");
        Layer layer;
        switch (kind) {
            case 0: {
                layer.name = get_string(is, "layer name");
                AffineLayer a;
                a.has_bias = get_u8(is, "bias flag") != 0;
                const std::uint64_t out = get_u64(is, "affine out");
                const std::uint64_t in = get_u64(is, "affine in");
                a.weight = Tensor({out, in});
                if (a.has_bias) a.bias = Tensor({out});
                layer.impl = std::move(a);
                break;
            }
            case 1: {
                layer.name = get_string(is, "layer name");
                Conv2DLayer c;
                c.has_bias = get_u8(is, "bias flag") != 0;
                c.padding = get_u8(is, "padding flag") != 0 ? Padding::Same : Padding::Valid;
                const std::uint64_t oc = get_u64(is, "conv out channels");
                const std::uint64_t ic = get_u64(is, "conv in channels");
                const std::uint64_t k = get_u64(is, "conv kernel");
                c.weight = Tensor({oc, ic, k, k});
                if (c.has_bias) c.bias = Tensor({oc});
                layer.impl = std::move(c);
                break;
            }
            case 2:
                layer.impl = ReLULayer{};
                break;
            case 3:
                layer.impl = MaxPool2DLayer{get_u64(is, "pool window")};
                break;
            default:
                fail("load: unknown layer kind ", static_cast<int>(kind));
        }
        m.layers_.push_back(std::move(layer));
    }
    for (MutableParameterGroup& g : m.mutable_groups()) {
        for (Tensor* t : g.tensors) {
            for (double& v : t->values()) v = get_f64(is, "parameters");
        }
    }
    // recompute the output shape by walking a probe through the layer shapes
    Shape shape = m.input_shape_;
    for (const Layer& l : m.layers_) {
        if (const auto* a = std::get_if<AffineLayer>(&l.impl)) {
            check_state(numel(shape) == a->weight.dim(1), "load: layer '", l.name,
                        "' input size mismatch in file");
            shape = {a->weight.dim(0)};
        } else if (const auto* c = std::get_if<Conv2DLayer>(&l.impl)) {
            check_state(shape.size() == 3 && shape[0] == c->weight.dim(1), "load: layer '", l.name,
                        "' channel mismatch in file");
            const PadOffsets g = conv_geometry(*c, shape[1], shape[2], l.name);
            shape = {c->weight.dim(0), g.out_h, g.out_w};
        } else if (const auto* p = std::get_if<MaxPool2DLayer>(&l.impl)) {
            check_state(shape.size() == 3 && shape[1] % p->window == 0 && shape[2] % p->window == 0,
                        "load: max-pool shape mismatch in file");
            shape = {shape[0], shape[1] / p->window, shape[2] / p->window};
        }
    }
    m.output_shape_ = shape;
    return m;
}

Model build_mlp(const ModelSpec& spec) {
    for (const LayerDesc& d : spec.layers) {
        check(d.kind == LayerDesc::Kind::Affine || d.kind == LayerDesc::Kind::ReLU,
              "build_mlp: only affine and ReLU layers allowed");
    }
    Model m(spec);
    check(m.depth() >= 2, "build_mlp: need at least 2 parameterized layers, got ", m.depth());
    return m;
}

Model build_cnn(const ModelSpec& spec) {
    bool has_conv = false;
    for (const LayerDesc& d : spec.layers) {
        has_conv = has_conv || d.kind == LayerDesc::Kind::Conv2D;
    }
    check(has_conv, "build_cnn: spec has no convolution layer");
    check(spec.input_shape.size() == 3, "build_cnn: input must be {channels, height, width}");
    return Model(spec);
}

}  // namespace metalr
