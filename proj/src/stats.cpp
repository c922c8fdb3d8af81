// SPDX-License-Identifier: Apache-2.0
#include "metalr/stats.hpp"

#include <cmath>

#include "metalr/common.hpp"

namespace metalr {

double mean(const std::vector<double>& v) {
    check(!v.empty(), "mean: empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    check(v.size() >= 2, "sample_std: need at least 2 values");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

// Lentz's continued fraction for the incomplete beta function.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    check(a > 0.0 && b > 0.0, "incomplete_beta: a and b must be positive");
    check(x >= 0.0 && x <= 1.0, "incomplete_beta: x must be in [0,1], got ", x);
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                         b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * betacf(a, b, x) / a;
    }
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double dof) {
    check(dof > 0.0, "student_t_sf: dof must be positive");
    const double x = dof / (dof + t * t);
    const double half_tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
    return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

double paired_one_sided_p(const std::vector<double>& x, const std::vector<double>& y) {
    check(x.size() == y.size(), "paired_one_sided_p: size mismatch");
    check(x.size() >= 2, "paired_one_sided_p: need at least 2 pairs");
    std::vector<double> diff(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
    const double m = mean(diff);
    const double sd = sample_std(diff);
    if (sd == 0.0) {
        if (m > 0.0) return 0.0;
        if (m < 0.0) return 1.0;
        return 0.5;
    }
    const double n = static_cast<double>(diff.size());
    const double t = m / (sd / std::sqrt(n));
    return student_t_sf(t, n - 1.0);
}

}  // namespace metalr
