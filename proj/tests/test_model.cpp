// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "metalr/model.hpp"

using namespace metalr;

namespace {

// weight layout is [out, in]
void set_params(Model& m, const std::vector<std::vector<double>>& tensors) {
    auto groups = m.mutable_groups();
    std::size_t t = 0;
    for (auto& g : groups) {
        for (Tensor* param : g.tensors) {
            REQUIRE(t < tensors.size());
            REQUIRE(param->size() == tensors[t].size());
            for (std::size_t i = 0; i < tensors[t].size(); ++i) (*param)[i] = tensors[t][i];
            ++t;
        }
    }
    REQUIRE(t == tensors.size());
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("identity affine maps a batch through unchanged") {
    ModelSpec spec;
    spec.input_shape = {3};
    spec.layers = {LayerDesc::affine(3)};
    Model m(spec);
    set_params(m, {{1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}});
    Tensor x({2, 3}, {1, 2, 3, -4, 5, 0.5});
    Tensor y = m.forward(x).logits;
    CHECK(y.shape() == Shape{2, 3});
    for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("zero inputs through a biased affine emit the bias") {
    ModelSpec spec;
    spec.input_shape = {4};
    spec.layers = {LayerDesc::affine(2)};
    Model m(spec);
    set_params(m, {std::vector<double>(8, 0.31), {2.5, -1.25}});
    Tensor x({3, 4});
    Tensor y = m.forward(x).logits;
    for (std::size_t b = 0; b < 3; ++b) {
        CHECK(y[b * 2 + 0] == 2.5);
        CHECK(y[b * 2 + 1] == -1.25);
    }
}

TEST_CASE("two-layer mlp with hand-set weights matches hand arithmetic") {
    // dyadic values keep every intermediate exact in doubles:
    //   x_a = [1, 0.5]   -> pre [2.5, -1.75] -> relu [2.5, 0]   -> 2*2.5 + 0.25 = 5.25
    //   x_b = [-1, 1]    -> pre [1.5, 0.5]   -> relu [1.5, 0.5] -> 3 - 1.5 + 0.25 = 1.75
    Model m = build_mlp(ModelSpec::mlp({2, 2, 1}, 0));
    set_params(m, {{1, 2, -1, 0.5}, {0.5, -1}, {2, -3}, {0.25}});
    Tensor x({2, 2}, {1, 0.5, -1, 1});
    Tensor y = m.forward(x).logits;
    CHECK(y.shape() == Shape{2, 1});
    CHECK(y[0] == 5.25);
    CHECK(y[1] == 1.75);
}

TEST_CASE("seeded construction is deterministic") {
    Model a = build_mlp(ModelSpec::mlp({4, 8, 2}, 0));
    Model b = build_mlp(ModelSpec::mlp({4, 8, 2}, 0));
    auto ga = a.groups();
    auto gb = b.groups();
    REQUIRE(ga.size() == gb.size());
    for (std::size_t i = 0; i < ga.size(); ++i) {
        for (std::size_t t = 0; t < ga[i].tensors.size(); ++t) {
            CHECK(bitwise_equal(*ga[i].tensors[t], *gb[i].tensors[t]));
        }
    }
    Model c = build_mlp(ModelSpec::mlp({4, 8, 2}, 1));
    CHECK_FALSE(bitwise_equal(*a.groups()[0].tensors[0], *c.groups()[0].tensors[0]));
}

TEST_CASE("depth counts parameterized layers only") {
    Model m = build_mlp(ModelSpec::mlp({4, 8, 2}, 0));
    CHECK(m.depth() == 2);
    CHECK(m.layer_groups() == std::vector<std::string>{"fc1", "fc2"});
    // order is stable across calls
    CHECK(m.layer_groups() == m.layer_groups());
}

TEST_CASE("every parameter lives in exactly one group") {
    Model m = build_mlp(ModelSpec::mlp({4, 8, 2}, 0));
    std::size_t total = 0;
    for (const auto& g : m.groups()) {
        for (const Tensor* t : g.tensors) total += t->size();
    }
    CHECK(total == (8 * 4 + 8) + (2 * 8 + 2));
}

TEST_CASE("cnn builds with depth-ordered names and the right output shape") {
    Model m = build_cnn(ModelSpec::cnn({1, 8, 8}, {4}, 3, 3, 0));
    CHECK(m.layer_groups() == std::vector<std::string>{"conv1", "fc1"});
    Tensor x({2, 1, 8, 8});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i % 97);
    Tensor y = m.forward(x).logits;
    CHECK(y.shape() == Shape{2, 3});
}

TEST_CASE("model rejects inputs with the wrong shape") {
    Model m = build_mlp(ModelSpec::mlp({4, 8, 2}, 0));
    CHECK_THROWS_AS(m.forward(Tensor({2, 5})), std::invalid_argument);
    CHECK_THROWS_AS(m.forward(Tensor({4})), std::invalid_argument);
}

TEST_CASE("scalar model gradient matches the analytic derivative") {
    // L = (theta * x - y)^2 with x=1, y=0, theta=3 -> dL/dtheta = 6
    ModelSpec spec;
    spec.input_shape = {1};
    spec.layers = {LayerDesc::affine(1, /*bias=*/false)};
    Model m(spec);
    set_params(m, {{3.0}});
    Tensor x({1, 1}, {1.0});
    Tensor y({1, 1}, {0.0});
    ForwardCache cache = m.forward(x);
    CHECK(compute_loss(cache.logits, y, LossKind::MeanSquaredError) == 9.0);
    GradientSnapshot g = m.backward(cache, y, LossKind::MeanSquaredError);
    CHECK(g.at("fc1")[0][0] == 6.0);
}

TEST_CASE("zero-loss configuration yields an all-zero snapshot") {
    Model m = build_mlp(ModelSpec::mlp({3, 4, 2}, 5));
    Tensor x({2, 3}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6});
    ForwardCache cache = m.forward(x);
    const Tensor targets = cache.logits;  // predictions == targets
    GradientSnapshot g = m.backward(cache, targets, LossKind::MeanSquaredError);
    for (const auto& tensors : g.grads) {
        for (const Tensor& t : tensors) {
            for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);
        }
    }
}

TEST_CASE("backward rejects a stale cache") {
    Model m = build_mlp(ModelSpec::mlp({3, 4, 2}, 5));
    Tensor x({1, 3}, {1, 2, 3});
    Tensor labels({1}, {0.0});
    ForwardCache cache = m.forward(x);
    (void)m.mutable_groups();  // parameter mutation handle invalidates the cache
    CHECK_THROWS_AS(m.backward(cache, labels, LossKind::CrossEntropySoftmax), std::runtime_error);
}

TEST_CASE("snapshot covers exactly the model's groups") {
    Model m = build_cnn(ModelSpec::cnn({1, 4, 4}, {2}, 3, 2, 3));
    Tensor x({1, 1, 4, 4});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * static_cast<double>(i);
    Tensor labels({1}, {1.0});
    GradientSnapshot g = m.backward(m.forward(x), labels, LossKind::CrossEntropySoftmax);
    CHECK(g.names == m.layer_groups());
    auto groups = m.groups();
    for (std::size_t i = 0; i < groups.size(); ++i) {
        REQUIRE(g.grads[i].size() == groups[i].tensors.size());
        for (std::size_t t = 0; t < g.grads[i].size(); ++t) {
            CHECK(g.grads[i][t].shape() == groups[i].tensors[t]->shape());
        }
    }
    CHECK(g.batch_size == 1);
}

TEST_CASE("reinit_head perturbs exactly the last k groups") {
    Model m = build_mlp(ModelSpec::mlp({4, 8, 6, 2}, 0));
    const Model before = m;
    CHECK_THROWS_AS(m.reinit_head(0, 99), std::invalid_argument);
    CHECK_THROWS_AS(m.reinit_head(3, 99), std::invalid_argument);  // k == d is training from scratch
    m.reinit_head(1, 99);
    auto gb = before.groups();
    auto ga = m.groups();
    CHECK(bitwise_equal(*ga[0].tensors[0], *gb[0].tensors[0]));
    CHECK(bitwise_equal(*ga[0].tensors[1], *gb[0].tensors[1]));
    CHECK(bitwise_equal(*ga[1].tensors[0], *gb[1].tensors[0]));
    CHECK_FALSE(bitwise_equal(*ga[2].tensors[0], *gb[2].tensors[0]));
}

TEST_CASE("model save/load round-trips bit-exactly") {
    const std::string dir = std::filesystem::temp_directory_path() / "metalr_model_io";
    std::filesystem::create_directories(dir);
    for (int which = 0; which < 2; ++which) {
        Model m = which == 0 ? build_mlp(ModelSpec::mlp({4, 8, 2}, 12))
                             : build_cnn(ModelSpec::cnn({1, 8, 8}, {4, 4}, 3, 3, 12));
        const std::string path = dir + "/model_" + std::to_string(which) + ".bin";
        m.save(path);
        Model loaded = Model::load(path);
        CHECK(loaded.init_seed() == m.init_seed());
        CHECK(loaded.input_shape() == m.input_shape());
        CHECK(loaded.layer_groups() == m.layer_groups());
        auto ga = m.groups();
        auto gl = loaded.groups();
        REQUIRE(ga.size() == gl.size());
        for (std::size_t i = 0; i < ga.size(); ++i) {
            for (std::size_t t = 0; t < ga[i].tensors.size(); ++t) {
                CHECK(bitwise_equal(*ga[i].tensors[t], *gl[i].tensors[t]));
            }
        }
    }
}

TEST_CASE("model load reports malformed files") {
    const std::string dir = std::filesystem::temp_directory_path() / "metalr_model_io";
    std::filesystem::create_directories(dir);
    const std::string bad = dir + "/garbage.bin";
    {
        std::ofstream os(bad, std::ios::binary);
        os << "not a model";
    }
    CHECK_THROWS_AS(Model::load(bad), std::runtime_error);
    CHECK_THROWS_AS(Model::load(dir + "/does_not_exist.bin"), std::runtime_error);
}

TEST_CASE("forward determinism within a process") {
    Model m = build_cnn(ModelSpec::cnn({2, 8, 8}, {3}, 3, 4, 9));
    Tensor x({3, 2, 8, 8});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i));
    Tensor y1 = m.forward(x).logits;
    Tensor y2 = m.forward(x).logits;
    CHECK(bitwise_equal(y1, y2));
}

TEST_CASE("pass counters instrument forward and backward") {
    Model m = build_mlp(ModelSpec::mlp({3, 4, 2}, 5));
    m.counters().reset();
    Tensor x({1, 3}, {1, 2, 3});
    Tensor labels({1}, {0.0});
    ForwardCache cache = m.forward(x);
    m.backward(cache, labels, LossKind::CrossEntropySoftmax);
    CHECK(m.counters().forwards == 1);
    CHECK(m.counters().backwards == 1);
}
