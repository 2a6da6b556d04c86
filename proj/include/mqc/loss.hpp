#pragma once

#include <vector>

#include "mqc/pairing.hpp"

namespace mqc {

struct LossConfig {
    double lambda = 1.0; // ranking weight
    double xi = 0.05;    // ranking margin
    void validate() const;
};

// Predictions and targets for one batch, with the pairing already decided.
struct BatchTargets {
    std::vector<double> predicted;
    std::vector<double> actual;
    PairingResult pairing;
    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double mse_term = 0.0;
    double rank_term = 0.0; // mean hinge over pairs, before lambda
};

double mse_loss(const std::vector<double>& predicted, const std::vector<double>& actual);

// max(0, (pi - pj) * (aj - ai) + xi): penalizes predictions whose ordering
// disagrees with the actual ordering; exact ties cost xi.
double rank_loss_pair(double pi, double pj, double ai, double aj, double xi);

// mean MSE + lambda * mean pair hinge; the leftover index of an odd batch
// contributes to the MSE term only.
LossBreakdown compositional_loss(const BatchTargets& batch, const LossConfig& cfg);

// d(total)/d(predicted).
std::vector<double> compositional_loss_grad(const BatchTargets& batch, const LossConfig& cfg);

// Analytic gradient vs central finite differences, reported as the largest
// per-component error relative to max(1, |analytic|, |numeric|). Throws
// KinkError when any pair's hinge argument is within 10*epsilon of zero,
// where the two-sided difference straddles the kink.
double grad_check(const BatchTargets& batch, const LossConfig& cfg, double epsilon);

} // namespace mqc
