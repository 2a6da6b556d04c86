#include "mqc/qc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "json.hpp"

#include "mqc/kernels.hpp"
#include "mqc/rng.hpp"

namespace mqc {

using nlohmann::json;

const char* to_string(SelectorMethod m) {
    switch (m) {
        case SelectorMethod::quality: return "quality";
        case SelectorMethod::entropy: return "entropy";
        case SelectorMethod::mc_dropout: return "mc_dropout";
        case SelectorMethod::random: return "random";
    }
    throw ValueError("unknown selector method");
}

SelectorMethod selector_method_from_string(const std::string& s) {
    if (s == "quality") return SelectorMethod::quality;
    if (s == "entropy") return SelectorMethod::entropy;
    if (s == "mc_dropout") return SelectorMethod::mc_dropout;
    if (s == "random") return SelectorMethod::random;
    throw ValueError("unknown selector method: " + s);
}

SelectorScore entropy_score(const Volume& prob, EntropyMode mode) {
    prob.validate();
    bool ok = true;
    const double total =
        kernels::par::binary_entropy_sum(prob.data.data(), prob.data.size(), &ok);
    if (!ok) throw ValueError("probability volume has values outside [0,1]");
    SelectorScore s;
    s.volume_id = prob.id;
    s.method = SelectorMethod::entropy;
    s.score = mode == EntropyMode::mean
                  ? total / static_cast<double>(prob.data.size())
                  : total;
    return s;
}

SelectorScore mc_dropout_score(const std::vector<Volume>& prob_passes) {
    if (prob_passes.size() < 2)
        throw ValueError("mc_dropout needs at least two forward passes");
    const auto& first = prob_passes.front();
    std::vector<const float*> ptrs;
    for (const auto& p : prob_passes) {
        if (p.shape != first.shape) throw ShapeError("mc_dropout passes differ in shape");
        ptrs.push_back(p.data.data());
    }
    SelectorScore s;
    s.volume_id = first.id;
    s.method = SelectorMethod::mc_dropout;
    s.score = kernels::par::std_across_passes_sum(ptrs, first.data.size()) /
              static_cast<double>(first.data.size());
    return s;
}

std::vector<SelectorScore> quality_scores(const std::vector<QualityRecord>& records) {
    std::map<std::string, std::pair<double, int>> acc; // ordered: deterministic output
    for (const auto& r : records) {
        auto& a = acc[r.volume_id];
        a.first += r.predicted_dsc;
        a.second += 1;
    }
    std::vector<SelectorScore> out;
    for (const auto& [vid, a] : acc) {
        SelectorScore s;
        s.volume_id = vid;
        s.method = SelectorMethod::quality;
        s.score = a.first / a.second;
        out.push_back(s);
    }
    return out;
}

std::vector<SelectorScore> random_scores(const std::vector<std::string>& volume_ids,
                                         std::uint64_t seed) {
    std::vector<SelectorScore> out;
    for (const auto& vid : volume_ids) {
        SelectorScore s;
        s.volume_id = vid;
        s.method = SelectorMethod::random;
        // Hash-derived so the score does not depend on input order.
        s.score = Rng(derive_seed(seed, vid)).uniform();
        out.push_back(s);
    }
    return out;
}

namespace {

std::vector<std::string> select_ordered(const std::vector<SelectorScore>& scores, int n,
                                        bool worst_first) {
    if (n < 0) throw ValueError("selection size must be non-negative");
    if (scores.empty()) return {};
    const SelectorMethod method = scores.front().method;
    for (const auto& s : scores) {
        if (s.method != method) throw ValueError("mixed selector methods in one call");
        if (!std::isfinite(s.score)) throw ValueError("non-finite selector score");
    }
    // quality: low score = needs annotation. uncertainty: high score = needs
    // annotation. random: treat like uncertainty (any fixed convention works).
    const bool low_is_needy = method == SelectorMethod::quality;
    std::vector<SelectorScore> sorted = scores;
    std::sort(sorted.begin(), sorted.end(), [&](const SelectorScore& a, const SelectorScore& b) {
        const bool a_before = low_is_needy == worst_first ? a.score < b.score : a.score > b.score;
        const bool b_before = low_is_needy == worst_first ? b.score < a.score : b.score > a.score;
        if (a_before != b_before) return a_before;
        return a.volume_id < b.volume_id;
    });
    std::vector<std::string> out;
    const int take = std::min<int>(n, static_cast<int>(sorted.size()));
    for (int i = 0; i < take; ++i) out.push_back(sorted[i].volume_id);
    return out;
}

std::map<std::string, double> per_volume_quality(const std::vector<QualityRecord>& records) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : records) {
        auto& a = acc[r.volume_id];
        a.first += r.predicted_dsc;
        a.second += 1;
    }
    std::map<std::string, double> out;
    for (const auto& [vid, a] : acc) out[vid] = a.first / a.second;
    return out;
}

} // namespace

std::vector<std::string> select_for_annotation(const std::vector<SelectorScore>& scores,
                                               int n) {
    return select_ordered(scores, n, true);
}

std::vector<std::string> select_pseudo_labels(const std::vector<SelectorScore>& scores,
                                              int k) {
    return select_ordered(scores, k, false);
}

BiasTestResult bias_test(const std::vector<QualityRecord>& records,
                         const std::vector<SubjectMeta>& meta, const std::string& key,
                         std::uint64_t seed) {
    const auto quality = per_volume_quality(records);
    std::unordered_map<std::string, const SubjectMeta*> meta_by_id;
    for (const auto& m : meta) meta_by_id[m.volume_id] = &m;

    BiasTestResult result;
    result.key = key;

    if (key == "sex") {
        std::map<std::string, std::vector<double>> groups;
        for (const auto& [vid, q] : quality) {
            const auto it = meta_by_id.find(vid);
            if (it == meta_by_id.end())
                throw ValueError("missing subject metadata for volume " + vid);
            if (it->second->sex == Sex::unknown) continue;
            groups[to_string(it->second->sex)].push_back(q);
        }
        if (groups.size() < 2) throw ValueError("bias test needs two sex groups");
        for (const auto& [g, v] : groups) {
            if (v.size() < 2)
                throw ValueError("group '" + g + "' has fewer than two volumes");
            result.group_sizes[g] = static_cast<int>(v.size());
            double mean = 0.0;
            for (const double x : v) mean += x;
            result.group_means[g] = mean / v.size();
        }
        const auto welch = welch_t_test(groups.at("female"), groups.at("male"));
        result.test_name = "welch_t_test";
        result.statistic = welch.t;
        result.p_value = welch.p;
        return result;
    }

    if (key == "age") {
        std::vector<double> ages, quals;
        std::map<std::string, std::pair<double, int>> decades;
        for (const auto& [vid, q] : quality) {
            const auto it = meta_by_id.find(vid);
            if (it == meta_by_id.end())
                throw ValueError("missing subject metadata for volume " + vid);
            if (!it->second->age) continue;
            ages.push_back(*it->second->age);
            quals.push_back(q);
            const int decade = static_cast<int>(*it->second->age / 10.0) * 10;
            auto& d = decades[std::to_string(decade) + "s"];
            d.first += q;
            d.second += 1;
        }
        if (ages.size() < 3) throw ValueError("age bias test needs >= 3 volumes with age");
        for (const auto& [g, d] : decades) {
            result.group_means[g] = d.first / d.second;
            result.group_sizes[g] = d.second;
        }
        const auto sp = spearman_permutation_test(ages, quals, 2000, derive_seed(seed, "age"));
        result.test_name = "spearman_permutation";
        result.statistic = sp.rho;
        result.p_value = sp.p;
        return result;
    }

    throw ValueError("unsupported bias grouping: " + key);
}

DatasetReport dataset_report(const std::vector<QualityRecord>& records,
                             const std::vector<SubjectMeta>& meta, double threshold,
                             const std::vector<std::string>& groupings, std::uint64_t seed) {
    if (records.empty()) throw ValueError("dataset report needs records");
    DatasetReport report;
    report.threshold = threshold;
    report.n_records = static_cast<int>(records.size());

    std::map<int, std::pair<double, int>> organs;
    int below = 0;
    for (const auto& r : records) {
        auto& o = organs[r.class_id];
        o.first += r.predicted_dsc;
        o.second += 1;
        if (r.predicted_dsc < threshold) ++below;
    }
    double organ_mean_acc = 0.0;
    for (const auto& [cid, o] : organs) {
        if (o.second == 0) {
            report.warnings.push_back("organ " + std::to_string(cid) + " has no records");
            continue;
        }
        report.per_organ.push_back({cid, o.first / o.second, o.second});
        organ_mean_acc += o.first / o.second;
    }
    report.overall_mean = organ_mean_acc / static_cast<double>(report.per_organ.size());
    report.fraction_below = static_cast<double>(below) / static_cast<double>(records.size());

    for (const auto& key : groupings) {
        try {
            report.bias.push_back(bias_test(records, meta, key, seed));
        } catch (const ValueError& e) {
            report.warnings.push_back("bias test '" + key + "' skipped: " + e.what());
        }
    }
    return report;
}

void save_dataset_report(const DatasetReport& report, const std::string& path) {
    json organs = json::array();
    for (const auto& o : report.per_organ)
        organs.push_back(json{{"class_id", o.class_id},
                              {"mean_predicted", o.mean_predicted},
                              {"n", o.n}});
    json bias = json::array();
    for (const auto& b : report.bias) {
        json means = json::object();
        for (const auto& [g, v] : b.group_means) means[g] = v;
        json sizes = json::object();
        for (const auto& [g, v] : b.group_sizes) sizes[g] = v;
        bias.push_back(json{{"key", b.key},
                            {"test", b.test_name},
                            {"group_means", means},
                            {"group_sizes", sizes},
                            {"statistic", b.statistic},
                            {"p_value", b.p_value}});
    }
    const json j{{"format", "mqc-report"},
                 {"version", 1},
                 {"per_organ", organs},
                 {"overall_mean", report.overall_mean},
                 {"fraction_below", report.fraction_below},
                 {"threshold", report.threshold},
                 {"n_records", report.n_records},
                 {"bias", bias},
                 {"warnings", report.warnings}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset report: " + path);
    out << j.dump(1) << "\n";
}

void save_dataset_report_csv(const DatasetReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset report csv: " + path);
    out << "class_id,mean_predicted,n\n";
    for (const auto& o : report.per_organ)
        out << o.class_id << "," << o.mean_predicted << "," << o.n << "\n";
}

} // namespace mqc
