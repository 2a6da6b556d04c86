#include "mqc/stats.hpp"

#include <cmath>
#include <numeric>

#include "mqc/errors.hpp"
#include "mqc/eval.hpp"
#include "mqc/rng.hpp"

namespace mqc {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_var(const std::vector<double>& v, double mean) {
    double acc = 0.0;
    for (const double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size() - 1);
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double mx = mean_of(rx);
    const double my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw ValueError("incomplete_beta needs positive a, b");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw ValueError("degrees of freedom must be positive");
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw ValueError("welch test needs at least two samples per group");
    WelchResult r;
    r.mean_a = mean_of(a);
    r.mean_b = mean_of(b);
    const double va = sample_var(a, r.mean_a) / static_cast<double>(a.size());
    const double vb = sample_var(b, r.mean_b) / static_cast<double>(b.size());
    const double se2 = va + vb;
    if (se2 <= 0.0) {
        // Two constant groups: identical means give p = 1, different give p = 0.
        r.t = 0.0;
        r.df = static_cast<double>(a.size() + b.size() - 2);
        r.p = r.mean_a == r.mean_b ? 1.0 : 0.0;
        return r;
    }
    r.t = (r.mean_a - r.mean_b) / std::sqrt(se2);
    r.df = se2 * se2 /
           (va * va / static_cast<double>(a.size() - 1) +
            vb * vb / static_cast<double>(b.size() - 1));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

SpearmanPermResult spearman_permutation_test(const std::vector<double>& x,
                                             const std::vector<double>& y, int permutations,
                                             std::uint64_t seed) {
    if (x.size() != y.size()) throw ShapeError("spearman inputs differ in length");
    if (x.size() < 3) throw ValueError("spearman permutation test needs >= 3 samples");
    if (permutations < 1) throw ValueError("need at least one permutation");

    SpearmanPermResult res;
    res.rho = spearman_rho(x, y);
    res.permutations = permutations;

    Rng rng(mix_u64(seed));
    std::vector<double> shuffled = y;
    int at_least = 0;
    for (int p = 0; p < permutations; ++p) {
        rng.shuffle(shuffled);
        if (std::abs(spearman_rho(x, shuffled)) >= std::abs(res.rho) - 1e-12) ++at_least;
    }
    res.p = (1.0 + at_least) / (1.0 + permutations);
    return res;
}

} // namespace mqc
