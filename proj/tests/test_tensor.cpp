// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <stdexcept>

#include "metalr/rng.hpp"
#include "metalr/tensor.hpp"

using namespace metalr;

TEST_CASE("tensor shape and value count stay consistent") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK(t.dim(0) == 2);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);

    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
}

TEST_CASE("reshape preserves row-major order") {
    Tensor t({2, 2}, {1, 2, 3, 4});
    Tensor r = t.reshaped({4});
    CHECK(r[2] == 3.0);
    CHECK_THROWS_AS(t.reshaped({3}), std::invalid_argument);
}

TEST_CASE("dot and axpy") {
    Tensor a({3}, {1, 2, 3});
    Tensor b({3}, {4, -1, 2});
    CHECK(dot(a, b) == doctest::Approx(8.0));

    Tensor y({3}, {1, 1, 1});
    axpy(2.0, a, y);
    CHECK(y[0] == 3.0);
    CHECK(y[2] == 7.0);

    Tensor wrong({2}, {1, 1});
    CHECK_THROWS_AS(axpy(1.0, a, wrong), std::invalid_argument);
}

TEST_CASE("finiteness detection") {
    Tensor t({2}, {1.0, 2.0});
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("rng is deterministic and unbiased enough to trust") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(7);
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.05));
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.05));

    // permutation covers every index exactly once
    Rng p(3);
    auto perm = p.permutation(17);
    std::vector<bool> seen(17, false);
    for (std::size_t i : perm) {
        CHECK_FALSE(seen[i]);
        seen[i] = true;
    }
}

TEST_CASE("seed mixing separates roles") {
    CHECK(mix_seed(1, "train") != mix_seed(1, "val"));
    CHECK(mix_seed(1, "train") != mix_seed(2, "train"));
    CHECK(mix_seed(1, "train") == mix_seed(1, "train"));
}
