#include "vivqa/metrics/ttest.hpp"

#include <cmath>
#include <limits>

#include "vivqa/core/errors.hpp"

namespace vivqa::metrics {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-15;
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
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw StatsError("incomplete beta continued fraction did not converge");
}

struct Moments {
    double mean;
    double var;  // unbiased
    double n;
};

Moments moments(std::span<const double> xs, const char* name) {
    if (xs.size() < 2) throw StatsError(std::string("t-test: sample ") + name + " needs at least two values");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    return {mean, var, static_cast<double>(xs.size())};
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw ArgumentError("incomplete_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("incomplete_beta: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw ArgumentError("student_t_two_sided_p: df must be positive");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return incomplete_beta(0.5 * df, 0.5, x);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b, double alpha, VarianceModel model) {
    const Moments ma = moments(a, "a");
    const Moments mb = moments(b, "b");
    if (!(ma.var > 0.0) && !(mb.var > 0.0)) {
        throw StatsError("t-test: degenerate variance (both samples are constant)");
    }
    TTestResult r;
    if (model == VarianceModel::welch) {
        const double sa = ma.var / ma.n;
        const double sb = mb.var / mb.n;
        r.t = (ma.mean - mb.mean) / std::sqrt(sa + sb);
        r.df = (sa + sb) * (sa + sb) / (sa * sa / (ma.n - 1.0) + sb * sb / (mb.n - 1.0));
    } else {
        r.df = ma.n + mb.n - 2.0;
        const double pooled = ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / r.df;
        r.t = (ma.mean - mb.mean) / std::sqrt(pooled * (1.0 / ma.n + 1.0 / mb.n));
    }
    r.p_value = student_t_two_sided_p(r.t, r.df);
    r.significant = r.p_value < alpha;
    return r;
}

}  // namespace vivqa::metrics
