#include "mqc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

#include "mqc/errors.hpp"

namespace mqc {

using nlohmann::json;

namespace {

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt; // constant vector
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mean_rank = 0.5 * (i + j) + 1.0; // 1-based
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

CorrelationResult correlation_metrics(const std::vector<double>& predicted,
                                      const std::vector<double>& actual) {
    if (predicted.size() != actual.size()) throw ShapeError("correlation lengths differ");
    if (predicted.size() < 2) throw ValueError("correlation needs at least two samples");
    CorrelationResult r;
    r.lcc = pearson(predicted, actual);
    r.srocc = pearson(average_ranks(predicted), average_ranks(actual));
    return r;
}

double map_at_k(const std::vector<double>& predicted, const std::vector<double>& actual,
                int k) {
    const int n = static_cast<int>(predicted.size());
    if (predicted.size() != actual.size()) throw ShapeError("map_at_k lengths differ");
    if (k < 1) throw ValueError("k must be at least 1");
    if (k > n) throw ValueError("k exceeds the number of samples");

    std::vector<int> by_actual(n), by_pred(n);
    std::iota(by_actual.begin(), by_actual.end(), 0);
    std::iota(by_pred.begin(), by_pred.end(), 0);
    std::stable_sort(by_actual.begin(), by_actual.end(),
                     [&](int a, int b) { return actual[a] < actual[b]; });
    std::stable_sort(by_pred.begin(), by_pred.end(),
                     [&](int a, int b) { return predicted[a] < predicted[b]; });

    std::vector<char> target(n, 0);
    for (int i = 0; i < k; ++i) target[by_actual[i]] = 1;

    double precision_acc = 0.0;
    int hits = 0;
    for (int pos = 0; pos < k; ++pos) {
        if (target[by_pred[pos]]) {
            ++hits;
            precision_acc += static_cast<double>(hits) / static_cast<double>(pos + 1);
        }
    }
    return precision_acc / static_cast<double>(k);
}

EvalReport eval_suite(const std::vector<QualityRecord>& records, const std::vector<int>& ks) {
    if (records.empty()) throw ValueError("no records to evaluate");
    for (const auto& r : records)
        if (!r.actual_dsc) throw ValueError("record without actual_dsc in eval");

    EvalReport report;
    report.ks = ks;
    const int max_k = ks.empty() ? 0 : *std::max_element(ks.begin(), ks.end());

    std::map<int, std::vector<const QualityRecord*>> by_class;
    for (const auto& r : records) by_class[r.class_id].push_back(&r);

    std::vector<double> all_pred, all_actual;
    for (const auto& r : records) {
        all_pred.push_back(r.predicted_dsc);
        all_actual.push_back(*r.actual_dsc);
    }
    if (all_pred.size() >= 2) {
        const auto overall = correlation_metrics(all_pred, all_actual);
        report.overall_lcc = overall.lcc;
        report.overall_srocc = overall.srocc;
    }

    std::map<int, std::pair<double, int>> map_acc; // k -> (sum, classes)
    for (const auto& [class_id, rows] : by_class) {
        ClassMetrics cm;
        cm.class_id = class_id;
        cm.n = static_cast<int>(rows.size());
        std::vector<double> pred, act;
        for (const auto* r : rows) {
            pred.push_back(r->predicted_dsc);
            act.push_back(*r->actual_dsc);
        }
        if (cm.n >= 2) {
            const auto corr = correlation_metrics(pred, act);
            cm.lcc = corr.lcc;
            cm.srocc = corr.srocc;
        }
        if (max_k > 0 && cm.n >= max_k) {
            for (const int k : ks) {
                const double ap = map_at_k(pred, act, k);
                cm.ap.push_back({k, ap});
                auto& acc = map_acc[k];
                acc.first += ap;
                acc.second += 1;
            }
        } else if (max_k > 0) {
            report.warnings.push_back("class " + std::to_string(class_id) + " has " +
                                      std::to_string(cm.n) + " records, fewer than max k " +
                                      std::to_string(max_k) + "; excluded from MAP");
        }
        report.per_class.push_back(std::move(cm));
    }
    for (const int k : ks) {
        const auto it = map_acc.find(k);
        if (it != map_acc.end() && it->second.second > 0)
            report.map.push_back({k, it->second.first / it->second.second});
    }
    return report;
}

namespace {

json opt_to_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

} // namespace

void save_eval_report(const EvalReport& report, const std::string& path) {
    json per_class = json::array();
    for (const auto& cm : report.per_class) {
        json ap = json::array();
        for (const auto& [k, v] : cm.ap) ap.push_back(json{{"k", k}, {"ap", v}});
        per_class.push_back(json{{"class_id", cm.class_id},
                                 {"n", cm.n},
                                 {"lcc", opt_to_json(cm.lcc)},
                                 {"srocc", opt_to_json(cm.srocc)},
                                 {"ap", ap}});
    }
    json map = json::array();
    for (const auto& [k, v] : report.map) map.push_back(json{{"k", k}, {"map", v}});
    const json j{{"format", "mqc-eval"},
                 {"version", 1},
                 {"per_class", per_class},
                 {"overall_lcc", opt_to_json(report.overall_lcc)},
                 {"overall_srocc", opt_to_json(report.overall_srocc)},
                 {"map", map},
                 {"ks", report.ks},
                 {"warnings", report.warnings}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write eval report: " + path);
    out << j.dump(1) << "\n";
}

EvalReport load_eval_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open eval report: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("corrupt eval report " + path + ": " + e.what());
    }
    if (j.value("format", "") != "mqc-eval") throw FormatError("not an eval report: " + path);
    EvalReport report;
    for (const auto& c : j.at("per_class")) {
        ClassMetrics cm;
        cm.class_id = c.at("class_id").get<int>();
        cm.n = c.at("n").get<int>();
        cm.lcc = opt_from_json(c.at("lcc"));
        cm.srocc = opt_from_json(c.at("srocc"));
        for (const auto& ap : c.at("ap"))
            cm.ap.push_back({ap.at("k").get<int>(), ap.at("ap").get<double>()});
        report.per_class.push_back(std::move(cm));
    }
    report.overall_lcc = opt_from_json(j.at("overall_lcc"));
    report.overall_srocc = opt_from_json(j.at("overall_srocc"));
    for (const auto& m : j.at("map"))
        report.map.push_back({m.at("k").get<int>(), m.at("map").get<double>()});
    report.ks = j.at("ks").get<std::vector<int>>();
    report.warnings = j.at("warnings").get<std::vector<std::string>>();
    return report;
}

void save_scatter_csv(const std::vector<QualityRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write scatter csv: " + path);
    out << "predicted,actual,class_id\n";
    for (const auto& r : records) {
        out << r.predicted_dsc << ",";
        if (r.actual_dsc) out << *r.actual_dsc;
        out << "," << r.class_id << "\n";
    }
}

} // namespace mqc
