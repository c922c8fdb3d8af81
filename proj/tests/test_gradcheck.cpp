// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "metalr/gradcheck.hpp"
#include "metalr/rng.hpp"

using namespace metalr;

namespace {

Tensor random_inputs(const Shape& sample_shape, std::size_t n, Rng& rng) {
    Shape shape{n};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    Tensor x(shape);
    for (double& v : x.values()) v = rng.normal();
    return x;
}

Tensor random_labels(std::size_t n, std::size_t classes, Rng& rng) {
    Tensor y({n});
    for (double& v : y.values()) v = static_cast<double>(rng.below(classes));
    return y;
}

}  // namespace

TEST_CASE("finite differences match the analytic gradient of a linear model") {
    ModelSpec spec;
    spec.input_shape = {1};
    spec.layers = {LayerDesc::affine(1, /*bias=*/false)};
    Model m(spec);
    for (auto& g : m.mutable_groups()) (*g.tensors[0])[0] = 3.0;
    Tensor x({1, 1}, {1.0});
    Tensor y({1, 1}, {0.0});
    GradientSnapshot fd = finite_difference_gradient(m, x, y, LossKind::MeanSquaredError, 1e-5);
    // dL/dtheta = 6 exactly; central differences are exact on quadratics up to roundoff
    CHECK(fd.at("fc1")[0][0] == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("finite differences reject non-positive epsilon") {
    Model m = build_mlp(ModelSpec::mlp({2, 3, 2}, 0));
    Tensor x({1, 2}, {1, 2});
    Tensor y({1}, {0.0});
    CHECK_THROWS_AS(finite_difference_gradient(m, x, y, LossKind::CrossEntropySoftmax, 0.0),
                    std::invalid_argument);
}

TEST_CASE("parameters with no influence on the loss get zero gradient") {
    // hidden unit 2 is driven far negative by its bias, so its incoming row is
    // dead under ReLU for every bounded input
    Model m = build_mlp(ModelSpec::mlp({2, 2, 1}, 0));
    auto groups = m.mutable_groups();
    (*groups[0].tensors[0]) = Tensor({2, 2}, {0.5, 0.2, 0.01, 0.01});
    (*groups[0].tensors[1]) = Tensor({2}, {0.0, -100.0});
    (*groups[1].tensors[0]) = Tensor({1, 2}, {1.0, 1.0});
    (*groups[1].tensors[1]) = Tensor({1}, {0.0});
    Tensor x({2, 2}, {1.0, -0.5, 0.25, 0.75});
    Tensor y({2, 1}, {1.0, -1.0});

    GradientSnapshot back = m.backward(m.forward(x), y, LossKind::MeanSquaredError);
    GradientSnapshot fd = finite_difference_gradient(m, x, y, LossKind::MeanSquaredError, 1e-5);
    // dead row: weights feeding hidden unit 2
    CHECK(back.at("fc1")[0][2] == 0.0);
    CHECK(back.at("fc1")[0][3] == 0.0);
    CHECK(fd.at("fc1")[0][2] == 0.0);
    CHECK(fd.at("fc1")[0][3] == 0.0);
}

TEST_CASE("backward matches central finite differences on random mlps") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(mix_seed(seed, "gradcheck-mlp"));
        Model m = build_mlp(ModelSpec::mlp({4, 6, 5, 3}, seed));
        Tensor x = random_inputs({4}, 3, rng);
        Tensor y = random_labels(3, 3, rng);
        GradientSnapshot back = m.backward(m.forward(x), y, LossKind::CrossEntropySoftmax);
        GradientSnapshot fd = finite_difference_gradient(m, x, y, LossKind::CrossEntropySoftmax, 1e-5);
        CHECK(max_relative_gradient_error(back, fd) < 1e-6);
    }
}

TEST_CASE("backward matches central finite differences on random cnns") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(mix_seed(seed, "gradcheck-cnn"));
        Model m = build_cnn(ModelSpec::cnn({2, 6, 6}, {3}, 3, 3, seed));
        Tensor x = random_inputs({2, 6, 6}, 2, rng);
        Tensor y = random_labels(2, 3, rng);
        GradientSnapshot back = m.backward(m.forward(x), y, LossKind::CrossEntropySoftmax);
        GradientSnapshot fd = finite_difference_gradient(m, x, y, LossKind::CrossEntropySoftmax, 1e-5);
        CHECK(max_relative_gradient_error(back, fd) < 1e-6);
    }
}

TEST_CASE("valid-padding convolution also gradchecks") {
    ModelSpec spec;
    spec.input_shape = {1, 5, 5};
    spec.layers = {LayerDesc::conv2d(2, 3, Padding::Valid), LayerDesc::relu(), LayerDesc::affine(2)};
    Model m(spec);
    Rng rng(17);
    Tensor x = random_inputs({1, 5, 5}, 2, rng);
    Tensor y = random_labels(2, 2, rng);
    GradientSnapshot back = m.backward(m.forward(x), y, LossKind::CrossEntropySoftmax);
    GradientSnapshot fd = finite_difference_gradient(m, x, y, LossKind::CrossEntropySoftmax, 1e-5);
    CHECK(max_relative_gradient_error(back, fd) < 1e-6);
}

TEST_CASE("kink margin reports distance to relu and pool non-smoothness") {
    // affine 2->2 identity, relu: margin is the smallest |pre-activation|
    ModelSpec spec;
    spec.input_shape = {2};
    spec.layers = {LayerDesc::affine(2), LayerDesc::relu(), LayerDesc::affine(1)};
    Model m(spec);
    auto groups = m.mutable_groups();
    (*groups[0].tensors[0]) = Tensor({2, 2}, {1, 0, 0, 1});
    (*groups[0].tensors[1]) = Tensor({2}, {0, 0});
    (*groups[1].tensors[0]) = Tensor({1, 2}, {1, 1});
    (*groups[1].tensors[1]) = Tensor({1}, {0});
    Tensor x({1, 2}, {0.25, -3.0});
    CHECK(activation_kink_margin(m, x) == doctest::Approx(0.25).epsilon(1e-12));

    // max-pool: margin is the top-two gap within a window
    ModelSpec pool_spec;
    pool_spec.input_shape = {1, 2, 2};
    pool_spec.layers = {LayerDesc::max_pool(2), LayerDesc::affine(1)};
    Model pm(pool_spec);
    Tensor px({1, 1, 2, 2}, {1.0, 0.9, 0.2, 0.1});
    CHECK(activation_kink_margin(pm, px) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("mse path gradchecks too") {
    Rng rng(23);
    Model m = build_mlp(ModelSpec::mlp({3, 5, 2}, 23));
    Tensor x = random_inputs({3}, 4, rng);
    Tensor y({4, 2});
    for (double& v : y.values()) v = rng.normal();
    GradientSnapshot back = m.backward(m.forward(x), y, LossKind::MeanSquaredError);
    GradientSnapshot fd = finite_difference_gradient(m, x, y, LossKind::MeanSquaredError, 1e-5);
    CHECK(max_relative_gradient_error(back, fd) < 1e-6);
}
