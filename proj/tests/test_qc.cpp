#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mqc/qc.hpp"
#include "support/test_util.hpp"

using namespace mqc;

namespace {

Volume prob_volume(const std::string& id, const GridSize& shape, float p) {
    Volume v = test::make_volume(shape, p);
    v.id = id;
    return v;
}

QualityRecord rec(const std::string& vid, int cls, double pred) {
    QualityRecord r;
    r.volume_id = vid;
    r.class_id = cls;
    r.predicted_dsc = pred;
    return r;
}

SubjectMeta subject(const std::string& vid, Sex sex, double age) {
    SubjectMeta m;
    m.volume_id = vid;
    m.sex = sex;
    m.age = age;
    return m;
}

} // namespace

TEST_CASE("entropy score: worked values and volume-size behaviour") {
    const auto half = prob_volume("a", {2, 4, 4}, 0.5f);
    CHECK(entropy_score(half).score == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    Volume certain = test::make_volume({2, 4, 4}, 0.0f);
    certain.id = "b";
    for (std::size_t i = 0; i < certain.data.size(); i += 2) certain.data[i] = 1.0f;
    CHECK(entropy_score(certain).score == 0.0);

    // Mean mode ignores volume size; sum mode scales with it.
    const auto small = prob_volume("s", {2, 4, 4}, 0.5f);
    const auto big = prob_volume("b", {20, 4, 4}, 0.5f);
    CHECK(entropy_score(small, EntropyMode::mean).score ==
          doctest::Approx(entropy_score(big, EntropyMode::mean).score).epsilon(1e-9));
    CHECK(entropy_score(big, EntropyMode::sum).score ==
          doctest::Approx(10.0 * entropy_score(small, EntropyMode::sum).score).epsilon(1e-9));

    Volume bad = prob_volume("x", {1, 2, 2}, 1.5f);
    CHECK_THROWS_AS(entropy_score(bad), ValueError);
}

TEST_CASE("mc dropout score: worked values") {
    auto a = prob_volume("v", {2, 3, 3}, 0.0f);
    auto b = prob_volume("v", {2, 3, 3}, 1.0f);
    CHECK(mc_dropout_score({a, a}).score == 0.0);
    CHECK(mc_dropout_score({a, b}).score == doctest::Approx(0.5));

    auto mid = prob_volume("v", {2, 3, 3}, 0.5f);
    CHECK(mc_dropout_score({a, mid, b}).score ==
          doctest::Approx(std::sqrt(1.0 / 6.0)).epsilon(1e-6));

    CHECK_THROWS_AS(mc_dropout_score({a}), ValueError);
    auto wrong = prob_volume("v", {2, 3, 4}, 0.5f);
    CHECK_THROWS_AS(mc_dropout_score({a, wrong}), ShapeError);
}

TEST_CASE("selectors order by need and mirror each other") {
    std::vector<SelectorScore> scores;
    for (const auto& [vid, q] :
         std::vector<std::pair<std::string, double>>{{"a", 0.9}, {"b", 0.4}, {"c", 0.7}}) {
        SelectorScore s;
        s.volume_id = vid;
        s.method = SelectorMethod::quality;
        s.score = q;
        scores.push_back(s);
    }
    CHECK(select_for_annotation(scores, 2) == std::vector<std::string>{"b", "c"});
    CHECK(select_pseudo_labels(scores, 2) == std::vector<std::string>{"a", "c"});
    CHECK(select_for_annotation(scores, 0).empty());
    CHECK(select_for_annotation(scores, 10) == std::vector<std::string>{"b", "c", "a"});

    // Full-pool selections are exact reverses (distinct scores).
    const auto worst = select_for_annotation(scores, 3);
    auto best = select_pseudo_labels(scores, 3);
    std::reverse(best.begin(), best.end());
    CHECK(worst == best);

    // Uncertainty direction flips.
    for (auto& s : scores) s.method = SelectorMethod::entropy;
    CHECK(select_for_annotation(scores, 1) == std::vector<std::string>{"a"});
    CHECK(select_pseudo_labels(scores, 1) == std::vector<std::string>{"b"});

    scores[0].method = SelectorMethod::quality;
    CHECK_THROWS_AS(select_for_annotation(scores, 1), ValueError);
}

TEST_CASE("selection is input-order invariant and tie-stable") {
    Rng rng(15);
    std::vector<SelectorScore> scores;
    for (int i = 0; i < 12; ++i) {
        SelectorScore s;
        s.volume_id = "v" + std::to_string(i);
        s.method = SelectorMethod::quality;
        s.score = (i % 4) * 0.1; // ties
        scores.push_back(s);
    }
    const auto base = select_for_annotation(scores, 6);
    for (int rep = 0; rep < 5; ++rep) {
        rng.shuffle(scores);
        REQUIRE(select_for_annotation(scores, 6) == base);
    }
}

TEST_CASE("quality scores average per volume; random scores are seeded") {
    std::vector<QualityRecord> records{rec("a", 1, 0.8), rec("a", 2, 0.6), rec("b", 1, 0.9)};
    const auto qs = quality_scores(records);
    REQUIRE(qs.size() == 2u);
    CHECK(qs[0].volume_id == "a");
    CHECK(qs[0].score == doctest::Approx(0.7));
    CHECK(qs[1].score == doctest::Approx(0.9));

    const auto r1 = random_scores({"a", "b", "c"}, 5);
    const auto r2 = random_scores({"c", "b", "a"}, 5);
    // Same seed gives each volume the same score regardless of order.
    CHECK(r1[0].score == r2[2].score);
    const auto r3 = random_scores({"a", "b", "c"}, 6);
    CHECK(r1[0].score != r3[0].score);
}

TEST_CASE("dataset report matches hand counts on a 25-record fixture") {
    std::vector<QualityRecord> records;
    std::vector<SubjectMeta> meta;
    // 5 volumes x 5 organs; two records pushed below 0.8.
    for (int v = 0; v < 5; ++v) {
        meta.push_back(subject("v" + std::to_string(v), v % 2 ? Sex::female : Sex::male,
                               30.0 + 10.0 * v));
        for (int c = 1; c <= 5; ++c)
            records.push_back(rec("v" + std::to_string(v), c, 0.85 + 0.01 * c));
    }
    records[3].predicted_dsc = 0.55;
    records[17].predicted_dsc = 0.79;

    const auto report = dataset_report(records, meta, 0.8, {});
    CHECK(report.n_records == 25);
    CHECK(report.fraction_below == doctest::Approx(2.0 / 25.0));
    REQUIRE(report.per_organ.size() == 5u);

    // Hand-check one organ mean: class 4 holds records[3] (v0) at 0.55 and
    // four at 0.89.
    double class4 = 0.0;
    for (const auto& o : report.per_organ)
        if (o.class_id == 4) class4 = o.mean_predicted;
    CHECK(class4 == doctest::Approx((0.55 + 4 * 0.89) / 5.0));

    // Overall mean is the mean of per-organ means.
    double acc = 0.0;
    for (const auto& o : report.per_organ) acc += o.mean_predicted;
    CHECK(report.overall_mean == doctest::Approx(acc / 5.0));

    // All records at or above threshold -> fraction 0.
    std::vector<QualityRecord> good;
    for (int i = 0; i < 10; ++i) good.push_back(rec("v" + std::to_string(i), 1, 0.9));
    const auto clean = dataset_report(good, meta, 0.8, {});
    CHECK(clean.fraction_below == 0.0);

    // Two-organ means 0.9 / 0.7 -> overall 0.8.
    std::vector<QualityRecord> two{rec("a", 1, 0.9), rec("a", 2, 0.7)};
    const auto tiny = dataset_report(two, meta, 0.8, {});
    CHECK(tiny.overall_mean == doctest::Approx(0.8));
}

TEST_CASE("bias test finds a planted sex shift") {
    std::vector<QualityRecord> records;
    std::vector<SubjectMeta> meta;
    Rng rng(77);
    for (int v = 0; v < 60; ++v) {
        const bool male = v < 30;
        const std::string vid = "v" + std::to_string(v);
        meta.push_back(subject(vid, male ? Sex::male : Sex::female, 50.0));
        const double base = male ? 0.9 : 0.8; // planted 0.1 shift
        records.push_back(rec(vid, 1, base + rng.normal(0.0, 0.05)));
    }
    const auto result = bias_test(records, meta, "sex");
    CHECK(result.test_name == "welch_t_test");
    CHECK(result.p_value < 1e-3);
    CHECK(result.group_means.at("male") > result.group_means.at("female"));
    CHECK(result.group_sizes.at("male") == 30);
}

TEST_CASE("bias test age uses rank correlation with permutation p") {
    std::vector<QualityRecord> records;
    std::vector<SubjectMeta> meta;
    Rng rng(78);
    for (int v = 0; v < 40; ++v) {
        const double age = 20.0 + v * 1.5;
        const std::string vid = "v" + std::to_string(v);
        meta.push_back(subject(vid, Sex::male, age));
        records.push_back(rec(vid, 1, 0.95 - 0.003 * age + rng.normal(0.0, 0.01)));
    }
    const auto result = bias_test(records, meta, "age", 3);
    CHECK(result.test_name == "spearman_permutation");
    CHECK(result.statistic < -0.5); // older -> worse by construction
    CHECK(result.p_value < 0.01);
    CHECK_FALSE(result.group_means.empty()); // decade bins for display
}

TEST_CASE("bias test error paths") {
    std::vector<QualityRecord> records{rec("a", 1, 0.9), rec("b", 1, 0.8)};
    std::vector<SubjectMeta> meta{subject("a", Sex::male, 40), subject("b", Sex::male, 50)};
    CHECK_THROWS_AS(bias_test(records, meta, "sex"), ValueError);   // one group
    CHECK_THROWS_AS(bias_test(records, meta, "height"), ValueError);
    CHECK_THROWS_AS(bias_test(records, {subject("a", Sex::male, 40)}, "sex"), ValueError);
}

TEST_CASE("welch test is calibrated under the null") {
    Rng rng(123);
    int rejections = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> a, b;
        for (int i = 0; i < 15; ++i) a.push_back(rng.normal(0.7, 0.1));
        for (int i = 0; i < 15; ++i) b.push_back(rng.normal(0.7, 0.1));
        if (welch_t_test(a, b).p < 0.05) ++rejections;
    }
    const double rate = rejections / static_cast<double>(trials);
    CHECK(rate >= 0.01);
    CHECK(rate <= 0.12);
}

TEST_CASE("student t tail probabilities match reference values") {
    // Classic two-sided critical points.
    CHECK(student_t_two_sided_p(2.228, 10.0) == doctest::Approx(0.05).epsilon(2e-3));
    CHECK(student_t_two_sided_p(1.96, 1e6) == doctest::Approx(0.05).epsilon(2e-3));
    CHECK(student_t_two_sided_p(0.0, 5.0) == doctest::Approx(1.0));
    CHECK(student_t_two_sided_p(12.0, 8.0) < 1e-5);
}
