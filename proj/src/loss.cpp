#include "mqc/loss.hpp"

#include <cmath>

#include "mqc/errors.hpp"

namespace mqc {

void LossConfig::validate() const {
    if (lambda < 0.0) throw ValueError("lambda must be non-negative");
    if (xi <= 0.0) throw ValueError("xi must be positive");
}

void BatchTargets::validate() const {
    if (predicted.empty()) throw ValueError("empty batch");
    if (predicted.size() != actual.size())
        throw ShapeError("predicted and actual lengths differ");
    const int n = static_cast<int>(predicted.size());
    for (const auto& [i, j] : pairing.pairs)
        if (i < 0 || j < 0 || i >= n || j >= n || i == j)
            throw ValueError("pairing indices invalid for batch");
    if (pairing.leftover && (*pairing.leftover < 0 || *pairing.leftover >= n))
        throw ValueError("pairing leftover invalid for batch");
    for (const double v : predicted)
        if (!std::isfinite(v)) throw ValueError("non-finite prediction");
    for (const double v : actual)
        if (!std::isfinite(v)) throw ValueError("non-finite target");
}

double mse_loss(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.empty()) throw ValueError("mse of an empty batch");
    if (predicted.size() != actual.size())
        throw ShapeError("predicted and actual lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - actual[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predicted.size());
}

double rank_loss_pair(double pi, double pj, double ai, double aj, double xi) {
    if (!std::isfinite(pi) || !std::isfinite(pj) || !std::isfinite(ai) || !std::isfinite(aj))
        throw ValueError("non-finite rank loss input");
    return std::max(0.0, (pi - pj) * (aj - ai) + xi);
}

LossBreakdown compositional_loss(const BatchTargets& batch, const LossConfig& cfg) {
    cfg.validate();
    batch.validate();
    LossBreakdown out;
    out.mse_term = mse_loss(batch.predicted, batch.actual);
    if (!batch.pairing.pairs.empty()) {
        double acc = 0.0;
        for (const auto& [i, j] : batch.pairing.pairs)
            acc += rank_loss_pair(batch.predicted[i], batch.predicted[j], batch.actual[i],
                                  batch.actual[j], cfg.xi);
        out.rank_term = acc / static_cast<double>(batch.pairing.pairs.size());
    }
    out.total = out.mse_term + cfg.lambda * out.rank_term;
    return out;
}

std::vector<double> compositional_loss_grad(const BatchTargets& batch, const LossConfig& cfg) {
    cfg.validate();
    batch.validate();
    const std::size_t n = batch.predicted.size();
    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        grad[i] = 2.0 * (batch.predicted[i] - batch.actual[i]) / static_cast<double>(n);
    if (!batch.pairing.pairs.empty()) {
        const double scale =
            cfg.lambda / static_cast<double>(batch.pairing.pairs.size());
        for (const auto& [i, j] : batch.pairing.pairs) {
            const double arg = (batch.predicted[i] - batch.predicted[j]) *
                                   (batch.actual[j] - batch.actual[i]) +
                               cfg.xi;
            if (arg > 0.0) {
                const double slope = batch.actual[j] - batch.actual[i];
                grad[i] += scale * slope;
                grad[j] -= scale * slope;
            }
        }
    }
    return grad;
}

double grad_check(const BatchTargets& batch, const LossConfig& cfg, double epsilon) {
    if (epsilon <= 0.0) throw ValueError("epsilon must be positive");
    cfg.validate();
    batch.validate();
    for (const auto& [i, j] : batch.pairing.pairs) {
        const double arg = (batch.predicted[i] - batch.predicted[j]) *
                               (batch.actual[j] - batch.actual[i]) +
                           cfg.xi;
        if (std::abs(arg) <= 10.0 * epsilon)
            throw KinkError("point too close to a hinge kink for finite differences");
    }

    const std::vector<double> analytic = compositional_loss_grad(batch, cfg);
    BatchTargets probe = batch;
    double worst = 0.0;
    for (std::size_t k = 0; k < batch.predicted.size(); ++k) {
        const double orig = probe.predicted[k];
        probe.predicted[k] = orig + epsilon;
        const double up = compositional_loss(probe, cfg).total;
        probe.predicted[k] = orig - epsilon;
        const double down = compositional_loss(probe, cfg).total;
        probe.predicted[k] = orig;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({1.0, std::abs(analytic[k]), std::abs(numeric)});
        worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
    return worst;
}

} // namespace mqc
