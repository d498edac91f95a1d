#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "annolens/metrics.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace annolens;

namespace {

ExampleEval simple_eval(const std::string& id, std::vector<double> truth,
                        std::vector<double> pred) {
    ExampleEval e;
    e.example_id = id;
    for (std::size_t i = 0; i < truth.size(); ++i)
        e.annotator_keys.push_back(id + "_a" + std::to_string(i));
    e.truth = Eigen::Map<Eigen::VectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size()));
    e.pred = Eigen::Map<Eigen::VectorXd>(pred.data(), static_cast<Eigen::Index>(pred.size()));
    return e;
}

EmbeddingTable table_2d(std::initializer_list<std::pair<const char*, std::pair<double, double>>>
                            entries) {
    EmbeddingTable table;
    table.dimension = 2;
    for (const auto& [word, vec] : entries) {
        Eigen::VectorXd v(2);
        v << vec.first, vec.second;
        table.vectors[word] = v;
    }
    return table;
}

}  // namespace

TEST_CASE("individual_mae") {
    EvaluationFrame frame;
    frame.examples.push_back(simple_eval("e1", {2, 1}, {2, 1}));
    CHECK(individual_mae(frame) == 0.0);

    frame.examples.clear();
    frame.examples.push_back(simple_eval("e1", {3}, {2}));
    frame.examples.push_back(simple_eval("e2", {1}, {1}));
    CHECK(individual_mae(frame) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(individual_mae(EvaluationFrame{}), ValidationError);
}

TEST_CASE("aggregate_mae cancellation and extremes") {
    EvaluationFrame frame;
    frame.examples.push_back(simple_eval("e1", {2, 2}, {1, 3}));
    CHECK(aggregate_mae(frame) == 0.0);

    frame.examples.clear();
    frame.examples.push_back(simple_eval("e1", {4, 4}, {0, 0}));
    CHECK(aggregate_mae(frame) == 4.0);
}

TEST_CASE("variance_mae uses population variance") {
    EvaluationFrame frame;
    frame.examples.push_back(simple_eval("e1", {0, 4}, {0, 4}));
    CHECK(variance_mae(frame) == 0.0);

    frame.examples.clear();
    frame.examples.push_back(simple_eval("e1", {0, 4}, {2, 2}));
    CHECK(variance_mae(frame) == 4.0);  // popvar(0,4) = 4, popvar(2,2) = 0

    frame.examples.clear();
    frame.examples.push_back(simple_eval("e1", {3}, {1}));
    CHECK_THROWS_AS(variance_mae(frame), ValidationError);
}

TEST_CASE("target_offense_error restricts to offended matched members") {
    EvaluationFrame frame;
    ExampleEval calm = simple_eval("calm", {0, 0, 3}, {1, 1, 3});
    calm.matched_keys = std::set<std::string>{"calm_a0", "calm_a1"};  // member mean 0 < 1
    frame.examples.push_back(calm);
    CHECK_FALSE(target_offense_error(frame).has_value());

    ExampleEval offended = simple_eval("off", {2, 2, 0}, {1, 3, 0});
    offended.matched_keys = std::set<std::string>{"off_a0", "off_a1"};
    frame.examples.push_back(offended);
    auto error = target_offense_error(frame);
    REQUIRE(error.has_value());
    CHECK(*error == doctest::Approx(1.0).epsilon(1e-12));  // |1-2| and |3-2|
}

TEST_CASE("metric oracle equivalence on random frames") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 60; ++trial) {
        EvaluationFrame frame = oracle::random_frame(rng, 12);
        CHECK(individual_mae(frame) ==
              doctest::Approx(oracle::naive_individual_mae(frame)).epsilon(1e-12));
        CHECK(aggregate_mae(frame) ==
              doctest::Approx(oracle::naive_aggregate_mae(frame)).epsilon(1e-12));
        auto naive_var = oracle::naive_variance_mae(frame);
        if (naive_var)
            CHECK(variance_mae(frame) == doctest::Approx(*naive_var).epsilon(1e-12));
        auto mine = target_offense_error(frame);
        auto naive = oracle::naive_target_offense_error(frame);
        CHECK(mine.has_value() == naive.has_value());
        if (mine && naive) CHECK(*mine == doctest::Approx(*naive).epsilon(1e-12));
    }
}

TEST_CASE("word mover's distance basics") {
    EmbeddingTable emb = table_2d({{"x", {0, 0}}, {"y", {3, 4}}, {"z", {1, 1}}});

    SUBCASE("identical lists cost nothing") {
        TargetPhraseList a{{"x", "y"}};
        CHECK(word_movers_distance(a, a, emb) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("equal bag distributions cost nothing regardless of phrase order") {
        CHECK(word_movers_distance(TargetPhraseList{{"x y"}}, TargetPhraseList{{"y", "x"}},
                                   emb) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("single unit mass moves the Euclidean distance") {
        CHECK(word_movers_distance(TargetPhraseList{{"x"}}, TargetPhraseList{{"y"}}, emb) ==
              doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("three-word case matches the closed form and the enumeration oracle") {
        EmbeddingTable emb2 = table_2d({{"x", {0, 0}}, {"y", {1, 0}}, {"z", {1, 1}}});
        TargetPhraseList a{{"x", "x", "y"}};
        TargetPhraseList b{{"y", "z", "z"}};
        double d = word_movers_distance(a, b, emb2);
        // optimal plan: y->y free, both x masses to z
        CHECK(d == doctest::Approx(2.0 * std::sqrt(2.0) / 3.0).epsilon(1e-9));
        double enumerated = oracle::enumerate_transport_min_cost(
            {2.0 / 3, 1.0 / 3}, {1.0 / 3, 2.0 / 3},
            {{1.0, std::sqrt(2.0)}, {0.0, 1.0}});
        CHECK(d == doctest::Approx(enumerated).epsilon(1e-9));
    }
    SUBCASE("empty side is an error") {
        CHECK_THROWS_AS(word_movers_distance(TargetPhraseList{}, TargetPhraseList{{"x"}}, emb),
                        ValidationError);
    }
    SUBCASE("out-of-vocabulary words map to the zero vector with a diagnostic") {
        std::vector<std::string> oov;
        double d = word_movers_distance(TargetPhraseList{{"unknownword"}},
                                        TargetPhraseList{{"x"}}, emb, false, &oov);
        CHECK(d == doctest::Approx(0.0).epsilon(1e-12));  // zero vector == x's embedding
        CHECK(oov == std::vector<std::string>{"unknownword"});
    }
    SUBCASE("stopword filtering drops connective words") {
        EmbeddingTable emb3 = table_2d({{"women", {1, 0}}, {"the", {9, 9}}});
        double with = word_movers_distance(TargetPhraseList{{"the women"}},
                                           TargetPhraseList{{"women"}}, emb3, true);
        CHECK(with == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("word mover's distance is a metric on random instances") {
    std::mt19937_64 rng(55);
    auto real = [&](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };
    std::vector<std::string> vocab = {"w0", "w1", "w2", "w3", "w4"};
    EmbeddingTable emb;
    emb.dimension = 3;
    for (const std::string& w : vocab) {
        Eigen::VectorXd v(3);
        v << real(-2, 2), real(-2, 2), real(-2, 2);
        emb.vectors[w] = v;
    }
    auto random_list = [&] {
        TargetPhraseList list;
        int n = 1 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) list.phrases.push_back(vocab[rng() % vocab.size()]);
        return list;
    };
    for (int trial = 0; trial < 40; ++trial) {
        TargetPhraseList a = random_list(), b = random_list(), c = random_list();
        double ab = word_movers_distance(a, b, emb);
        double ba = word_movers_distance(b, a, emb);
        CHECK(std::abs(ab - ba) <= 1e-9);
        double ac = word_movers_distance(a, c, emb);
        double cb = word_movers_distance(c, b, emb);
        CHECK(ab <= ac + cb + 1e-9);  // triangle inequality
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("match accuracy counts exact and partial agreement") {
    std::vector<TargetGroupSet> pred = {TargetGroupSet{{"women"}},
                                        TargetGroupSet{{"women", "muslim"}}, TargetGroupSet{}};
    std::vector<TargetGroupSet> gold = {TargetGroupSet{{"women"}}, TargetGroupSet{{"women"}},
                                        TargetGroupSet{}};
    MatchAccuracy acc = match_accuracy(pred, gold);
    CHECK(acc.exact == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(acc.partial == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("exact never exceeds partial") {
        std::mt19937_64 rng(77);
        std::vector<std::string> pool = {"a", "b", "c"};
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<TargetGroupSet> p(10), g(10);
            for (int i = 0; i < 10; ++i) {
                for (const std::string& x : pool) {
                    if (rng() % 2) p[i].groups.insert(x);
                    if (rng() % 2) g[i].groups.insert(x);
                }
            }
            MatchAccuracy a = match_accuracy(p, g);
            CHECK(a.exact <= a.partial + 1e-12);
            auto [ne, np] = oracle::naive_match_accuracy(p, g);
            CHECK(a.exact == doctest::Approx(ne).epsilon(1e-12));
            CHECK(a.partial == doctest::Approx(np).epsilon(1e-12));
        }
    }
    SUBCASE("length mismatch is an error") {
        gold.pop_back();
        CHECK_THROWS_AS(match_accuracy(pred, gold), ValidationError);
    }
}

TEST_CASE("group breakdown ranks buckets by error") {
    EvaluationFrame frame;
    ExampleEval e = simple_eval("e1", {2, 2, 2, 2}, {1.7, 2.3, 0.8, 3.2});
    frame.examples.push_back(e);
    frame.annotator_attributes["e1_a0"] = {{"political_leaning", "conservative"}};
    frame.annotator_attributes["e1_a1"] = {{"political_leaning", "conservative"}};
    frame.annotator_attributes["e1_a2"] = {{"political_leaning", "liberal"}};
    frame.annotator_attributes["e1_a3"] = {{"political_leaning", "liberal"}};

    auto rows = group_breakdown(frame, BreakdownAxis::annotator_demographic, 2);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].key == "political_leaning=conservative");
    CHECK(rows[0].mae == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rows[1].key == "political_leaning=liberal");
    CHECK(rows[1].mae == doctest::Approx(1.2).epsilon(1e-12));
    CHECK_FALSE(rows[0].low_support);

    SUBCASE("low-support buckets are flagged") {
        auto strict = group_breakdown(frame, BreakdownAxis::annotator_demographic, 5);
        CHECK(strict[0].low_support);
    }
}

TEST_CASE("target-set-size breakdown partitions pairs and matches the oracle") {
    std::mt19937_64 rng(88);
    EvaluationFrame frame = oracle::random_frame(rng, 30);
    for (ExampleEval& e : frame.examples)
        if (!e.predicted_targets) e.predicted_targets = TargetGroupSet{};

    auto rows = group_breakdown(frame, BreakdownAxis::target_set_size, 1);
    auto naive = oracle::naive_set_size_buckets(frame);
    REQUIRE(rows.size() == naive.size());
    double weighted = 0;
    std::size_t total = 0;
    for (const BreakdownRow& row : rows) {
        CHECK(row.mae == doctest::Approx(naive.at(row.key).first).epsilon(1e-12));
        CHECK(row.count == static_cast<std::size_t>(naive.at(row.key).second));
        weighted += row.mae * static_cast<double>(row.count);
        total += row.count;
    }
    // full partition: the count-weighted bucket mean equals individual MAE
    CHECK(weighted / static_cast<double>(total) ==
          doctest::Approx(individual_mae(frame)).epsilon(1e-9));
}

TEST_CASE("target error analysis tallies misses and false positives with rollups") {
    std::map<std::string, std::string> categories = {{"black", "race"},
                                                     {"women", "gender"},
                                                     {"muslim", "religion"}};
    std::vector<TargetGroupSet> pred = {TargetGroupSet{}, TargetGroupSet{{"women"}}};
    std::vector<TargetGroupSet> gold = {TargetGroupSet{{"black"}}, TargetGroupSet{}};
    TargetErrorAnalysis analysis = target_error_analysis(pred, gold, categories);

    REQUIRE(analysis.groups.size() == 2);
    CHECK(analysis.groups[0].group == "black");
    CHECK(analysis.groups[0].missed == 1);
    CHECK(analysis.groups[0].false_positive == 0);
    CHECK(analysis.groups[1].group == "women");
    CHECK(analysis.groups[1].false_positive == 1);
    bool found_race = false;
    for (const TargetErrorRow& row : analysis.categories)
        if (row.group == "race") {
            found_race = true;
            CHECK(row.missed == 1);
        }
    CHECK(found_race);

    SUBCASE("twenty constructed pairs match a hand tally") {
        std::vector<TargetGroupSet> p20, g20;
        for (int i = 0; i < 20; ++i) {
            TargetGroupSet p, g;
            if (i % 2 == 0) g.groups.insert("black");     // 10 gold blacks
            if (i % 4 == 0) p.groups.insert("black");     // 5 predicted
            if (i % 5 == 0) p.groups.insert("women");     // 4 spurious women
            p20.push_back(p);
            g20.push_back(g);
        }
        TargetErrorAnalysis a = target_error_analysis(p20, g20, categories);
        for (const TargetErrorRow& row : a.groups) {
            if (row.group == "black") {
                CHECK(row.missed == 5);  // gold on even i, predicted only on multiples of 4
                CHECK(row.false_positive == 0);
            }
            if (row.group == "women") {
                CHECK(row.missed == 0);
                CHECK(row.false_positive == 4);
            }
        }
    }
}

TEST_CASE("restrict_to_matched keeps only member ratings") {
    EvaluationFrame frame;
    ExampleEval e = simple_eval("e1", {1, 2, 3}, {1, 2, 3});
    e.matched_keys = std::set<std::string>{"e1_a1"};
    frame.examples.push_back(e);
    ExampleEval none = simple_eval("e2", {1}, {2});
    none.matched_keys = std::set<std::string>{};
    frame.examples.push_back(none);

    EvaluationFrame restricted = restrict_to_matched(frame);
    REQUIRE(restricted.examples.size() == 1);
    CHECK(restricted.examples[0].annotator_keys == std::vector<std::string>{"e1_a1"});
    CHECK(restricted.examples[0].truth.size() == 1);
    CHECK(restricted.examples[0].truth[0] == 2.0);
}

TEST_CASE("metric reductions are invariant to example ordering") {
    std::mt19937_64 rng(121);
    EvaluationFrame frame = oracle::random_frame(rng, 40);
    EvaluationFrame reversed = frame;
    std::reverse(reversed.examples.begin(), reversed.examples.end());
    CHECK(individual_mae(frame) == doctest::Approx(individual_mae(reversed)).epsilon(1e-12));
    CHECK(aggregate_mae(frame) == doctest::Approx(aggregate_mae(reversed)).epsilon(1e-12));
    CHECK(variance_mae(frame) == doctest::Approx(variance_mae(reversed)).epsilon(1e-12));
}

TEST_CASE("aggregate and individual contributions coincide on single-rating examples") {
    std::mt19937_64 rng(131);
    EvaluationFrame frame;
    for (int i = 0; i < 25; ++i) {
        double truth = static_cast<double>(rng() % 5);
        double pred = static_cast<double>(rng() % 5);
        frame.examples.push_back(simple_eval("e" + std::to_string(i), {truth}, {pred}));
    }
    CHECK(individual_mae(frame) == doctest::Approx(aggregate_mae(frame)).epsilon(1e-12));
}

TEST_CASE("metrics report serialization is deterministic") {
    MetricsReport report;
    report.n_examples = 2;
    report.n_pairs = 5;
    report.individual_mae = 0.5;
    report.aggregate_mae = 0.25;
    report.variance_mae = 1.0;
    report.exact_match = 0.58;
    report.partial_match = 0.81;
    report.target_gold.individual_mae = 0.73;
    report.demographic_breakdown.push_back({"gender=female", 0.4, 10, false});
    std::string text = report.to_kv_text();
    CHECK(text.find("individual_mae\t0.5\n") != std::string::npos);
    CHECK(text.find("target_gold.individual_mae\t0.73\n") != std::string::npos);
    CHECK(text.find("target_predicted.individual_mae\tabsent\n") != std::string::npos);
    CHECK(text == report.to_kv_text());
    CHECK(report.to_json() == report.to_json());
}
