#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mqc/quality_record.hpp"

namespace mqc {

// Pearson on values and Spearman as Pearson on mean ranks. Constant inputs
// leave the coefficient undefined (absent), not zero.
struct CorrelationResult {
    std::optional<double> lcc;
    std::optional<double> srocc;
};

CorrelationResult correlation_metrics(const std::vector<double>& predicted,
                                      const std::vector<double>& actual);

// AP@k for retrieving the k lowest-actual samples by ascending prediction.
// The target set takes actual-value ties by index; the prediction ranking
// breaks ties by index; precision accumulates at hit positions, divided by k.
double map_at_k(const std::vector<double>& predicted, const std::vector<double>& actual,
                int k);

struct ClassMetrics {
    int class_id = 0;
    int n = 0;
    std::optional<double> lcc;
    std::optional<double> srocc;
    std::vector<std::pair<int, double>> ap; // (k, AP@k)
};

struct EvalReport {
    std::vector<ClassMetrics> per_class;
    std::optional<double> overall_lcc;   // pooled over all records
    std::optional<double> overall_srocc; // pooled over all records
    std::vector<std::pair<int, double>> map; // (k, mean AP@k over included classes)
    std::vector<int> ks;
    std::vector<std::string> warnings; // classes excluded from MAP et al.
};

// Per-class metrics plus pooled correlations; MAP@k macro-averages AP@k over
// classes with at least max(ks) records (smaller classes are excluded with a
// warning). Every record needs an actual value.
EvalReport eval_suite(const std::vector<QualityRecord>& records, const std::vector<int>& ks);

void save_eval_report(const EvalReport& report, const std::string& path);
EvalReport load_eval_report(const std::string& path);

// (predicted, actual, class_id) rows for external plotting.
void save_scatter_csv(const std::vector<QualityRecord>& records, const std::string& path);

// Mean ranks (ties averaged), 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

} // namespace mqc
