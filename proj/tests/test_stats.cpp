// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <stdexcept>

#include "metalr/stats.hpp"

using namespace metalr;

TEST_CASE("mean and sample std") {
    CHECK(mean({1, 2, 3, 4}) == doctest::Approx(2.5));
    CHECK(sample_std({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.13808993529939).epsilon(1e-12));
    CHECK_THROWS_AS(mean({}), std::invalid_argument);
    CHECK_THROWS_AS(sample_std({1.0}), std::invalid_argument);
}

TEST_CASE("regularized incomplete beta matches reference values") {
    // references computed with an independent implementation
    CHECK(incomplete_beta(0.5, 0.5, 0.3) == doctest::Approx(0.369010119565545).epsilon(1e-10));
    CHECK(incomplete_beta(2.0, 3.0, 0.4) == doctest::Approx(0.5248).epsilon(1e-10));
    CHECK(incomplete_beta(4.5, 0.5, 0.9) == doctest::Approx(0.343436396137913).epsilon(1e-10));
    CHECK(incomplete_beta(1.0, 1.0, 0.0) == 0.0);
    CHECK(incomplete_beta(1.0, 1.0, 1.0) == 1.0);
}

TEST_CASE("student t survival function matches reference values") {
    CHECK(student_t_sf(1.833, 9) == doctest::Approx(0.0500089700252915).epsilon(1e-10));
    CHECK(student_t_sf(2.5, 9) == doctest::Approx(0.0169309138414929).epsilon(1e-10));
    CHECK(student_t_sf(0.0, 5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(student_t_sf(-1.2, 7) == doctest::Approx(0.865414031586397).epsilon(1e-10));
    CHECK(student_t_sf(3.0, 19) == doctest::Approx(0.00368086209193432).epsilon(1e-10));
    CHECK(student_t_sf(0.7, 1) == doctest::Approx(0.305599887785785).epsilon(1e-10));
}

TEST_CASE("paired one-sided test matches reference values") {
    CHECK(paired_one_sided_p({0.91, 0.93, 0.90, 0.94, 0.92}, {0.89, 0.91, 0.90, 0.92, 0.90}) ==
          doctest::Approx(0.00806504495004626).epsilon(1e-9));
    CHECK(paired_one_sided_p({0.5, 0.6, 0.55, 0.52}, {0.6, 0.62, 0.61, 0.60}) ==
          doctest::Approx(0.984062902448221).epsilon(1e-9));
}

TEST_CASE("paired test degenerate zero-variance cases") {
    CHECK(paired_one_sided_p({1.0, 1.0, 1.0}, {0.5, 0.5, 0.5}) == 0.0);
    CHECK(paired_one_sided_p({0.5, 0.5}, {1.0, 1.0}) == 1.0);
    CHECK(paired_one_sided_p({1.0, 1.0}, {1.0, 1.0}) == 0.5);
    CHECK_THROWS_AS(paired_one_sided_p({1.0}, {2.0}), std::invalid_argument);
}
