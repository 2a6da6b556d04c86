#pragma once

#include <cstdint>
#include <vector>

namespace mqc {

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct WelchResult {
    double mean_a = 0.0;
    double mean_b = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

// Unequal-variance two-sample t-test (Welch-Satterthwaite df).
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct SpearmanPermResult {
    double rho = 0.0;
    double p = 1.0; // two-sided permutation p-value
    int permutations = 0;
};

SpearmanPermResult spearman_permutation_test(const std::vector<double>& x,
                                             const std::vector<double>& y, int permutations,
                                             std::uint64_t seed);

} // namespace mqc
