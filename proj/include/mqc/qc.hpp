#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mqc/grid.hpp"
#include "mqc/quality_record.hpp"
#include "mqc/stats.hpp"
#include "mqc/vocab.hpp"

namespace mqc {

enum class SelectorMethod { quality, entropy, mc_dropout, random };

const char* to_string(SelectorMethod m);
SelectorMethod selector_method_from_string(const std::string& s);

// lower-is-worse for quality scores, higher-is-more-uncertain for the rest.
struct SelectorScore {
    std::string volume_id;
    int class_id = 0; // 0 for volume-level scores
    SelectorMethod method = SelectorMethod::quality;
    double score = 0.0;
};

enum class EntropyMode { mean, sum };

// Per-voxel binary entropy of a probability volume, aggregated by mode.
SelectorScore entropy_score(const Volume& prob, EntropyMode mode = EntropyMode::mean);

// Mean per-voxel std across repeated stochastic forward passes.
SelectorScore mc_dropout_score(const std::vector<Volume>& prob_passes);

// Volume-level quality scores (mean predicted quality over class records).
std::vector<SelectorScore> quality_scores(const std::vector<QualityRecord>& records);

// Uniformly random scores; the self-contained selection baseline.
std::vector<SelectorScore> random_scores(const std::vector<std::string>& volume_ids,
                                         std::uint64_t seed);

// n volumes most in need of annotation: lowest quality or highest
// uncertainty. Ties by volume id; n beyond the pool returns the whole pool.
std::vector<std::string> select_for_annotation(const std::vector<SelectorScore>& scores, int n);

// k volumes safest to trust as pseudo labels; the mirror ordering.
std::vector<std::string> select_pseudo_labels(const std::vector<SelectorScore>& scores, int k);

struct BiasTestResult {
    std::string key; // "sex" or "age"
    std::string test_name;
    std::map<std::string, double> group_means;
    std::map<std::string, int> group_sizes;
    double statistic = 0.0;
    double p_value = 1.0;
};

// Per-volume mean quality first; sex compares groups with Welch's t-test, age
// uses Spearman rank correlation with a permutation p-value (decade-bin means
// are reported for display).
BiasTestResult bias_test(const std::vector<QualityRecord>& records,
                         const std::vector<SubjectMeta>& meta, const std::string& key,
                         std::uint64_t seed = 0);

struct OrganReportRow {
    int class_id = 0;
    double mean_predicted = 0.0;
    int n = 0;
};

struct DatasetReport {
    std::vector<OrganReportRow> per_organ;
    double overall_mean = 0.0;     // mean of per-organ means
    double fraction_below = 0.0;   // records under the threshold
    double threshold = 0.8;
    int n_records = 0;
    std::vector<BiasTestResult> bias;
    std::vector<std::string> warnings;
};

DatasetReport dataset_report(const std::vector<QualityRecord>& records,
                             const std::vector<SubjectMeta>& meta, double threshold = 0.8,
                             const std::vector<std::string>& groupings = {"sex", "age"},
                             std::uint64_t seed = 0);

void save_dataset_report(const DatasetReport& report, const std::string& path);
void save_dataset_report_csv(const DatasetReport& report, const std::string& path);

} // namespace mqc
