#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "annolens/pipeline.hpp"
#include "helpers.hpp"

using namespace annolens;
using testutil::TempDir;

namespace {

RatingModel constant_rating_model(double bias, int dimension = 256) {
    RatingModel model;
    model.config.dimension = dimension;
    model.mask = FeatureMask::text_only();
    model.weights = Eigen::VectorXd::Zero(dimension);
    model.bias = bias;
    return model;
}

// Rating model that predicts bias + delta for parents (mask: parenthood only).
RatingModel parenthood_model(double bias, double delta, int dimension = 256) {
    RatingModel model;
    model.config.dimension = dimension;
    model.mask = FeatureMask{};
    model.mask.parenthood = true;
    model.weights = Eigen::VectorXd::Zero(dimension);
    model.bias = bias;
    int idx = text_block_size(dimension) +
              static_cast<int>(fnv1a64("c:is_parent=yes") %
                               (dimension - text_block_size(dimension)));
    model.weights[idx] = delta;
    return model;
}

TargetModel constant_target_model(const std::string& group, double p, int dimension = 256) {
    TargetModel model;
    model.config.dimension = dimension;
    GroupClassifier clf;
    clf.group = group;
    clf.weights = Eigen::VectorXd::Zero(dimension);
    clf.bias = std::log(p / (1.0 - p));
    model.classifiers.push_back(std::move(clf));
    return model;
}

AnnotationCorpus five_rater_corpus() {
    testutil::CorpusBuilder builder;
    auto& a1 = builder.add_annotator("a1");  // female parent
    a1.demographics.is_parent = true;
    auto& a2 = builder.add_annotator("a2");  // female non-parent
    a2.demographics.is_parent = false;
    for (int i = 3; i <= 5; ++i) {
        auto& a = builder.add_annotator("a" + std::to_string(i));
        a.demographics.gender = "male";
        a.demographics.is_parent = false;
    }
    builder.add_example("e1", "borderline remark");
    for (int i = 1; i <= 5; ++i) builder.add_record("a" + std::to_string(i), "e1", 2);
    return builder.corpus;
}

NormalizationMap women_map() {
    NormalizationMap map;
    map.add("female", "women");
    return map;
}

}  // namespace

TEST_CASE("run_combined aggregates matched-member predictions") {
    AnnotationCorpus corpus = five_rater_corpus();
    RatingModel rating = parenthood_model(2.0, 1.0);  // parents 3.0, others 2.0
    TargetModel target = constant_target_model("women", 0.9);
    NormalizationMap map = women_map();

    TargetGroupReport report =
        run_combined(corpus.examples[0], corpus, rating, target, map);
    CHECK(report.predicted_groups.groups == std::set<std::string>{"women"});
    CHECK(report.matched_keys == std::vector<std::string>{"a1", "a2"});
    REQUIRE(report.target_mean.has_value());
    CHECK(*report.target_mean == doctest::Approx(2.5).epsilon(1e-12));  // (3.0 + 2.0) / 2
    CHECK(report.overall_mean == doctest::Approx(2.2).epsilon(1e-12));  // (3+2+2+2+2) / 5
    REQUIRE(report.target_variance.has_value());
    CHECK(*report.target_variance == doctest::Approx(0.25).epsilon(1e-12));

    SUBCASE("groups matching no annotator leave the target fields absent") {
        NormalizationMap empty_map;
        empty_map.add("martians", "martians");
        TargetModel nobody = constant_target_model("martians", 0.9);
        TargetGroupReport absent =
            run_combined(corpus.examples[0], corpus, rating, nobody, empty_map);
        CHECK(absent.matched_keys.empty());
        CHECK_FALSE(absent.target_mean.has_value());
        CHECK(absent.overall_mean == doctest::Approx(2.2).epsilon(1e-12));
    }

    SUBCASE("overall mean can come from recorded ratings instead of predictions") {
        TargetGroupReport truth_based =
            run_combined(corpus.examples[0], corpus, rating, target, map,
                         TemplateGrammar::builtin(), /*overall_from_truth=*/true);
        CHECK(truth_based.overall_mean == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(*truth_based.target_mean == doctest::Approx(2.5).epsilon(1e-12));
    }
}

TEST_CASE("run_combined member predictions always join to real records") {
    AnnotationCorpus corpus = testutil::varied_corpus(10, 25, 4);
    TrainConfig config;
    config.dimension = 1 << 10;
    config.epochs = 5;
    config.learning_rate = 0.02;
    RatingModel rating = train_rating_model(corpus, FeatureMask::demographics_survey(), config);
    TargetModel target = constant_target_model("women", 0.8, config.dimension);
    NormalizationMap map = women_map();

    CorpusIndex index(corpus);
    for (const TextExample& example : corpus.examples) {
        TargetGroupReport report = run_combined(example, corpus, index, rating, target, map);
        REQUIRE(report.matched_keys.size() == report.member_predictions.size());
        for (std::size_t i = 0; i < report.matched_keys.size(); ++i) {
            const std::string& key = report.matched_keys[i];
            // brute force: the member must be a female rater of this example
            bool has_record = false;
            for (const AnnotationRecord& r : corpus.records)
                has_record = has_record ||
                             (r.annotator_key == key && r.example_id == example.example_id);
            CHECK(has_record);
            CHECK(index.annotator(key)->demographics.gender == "female");
            CHECK(report.member_predictions[i].annotator_key == key);
        }
    }
}

TEST_CASE("synthetic planted offset is recovered through the combined path") {
    GeneratorConfig config = testutil::synth_base_config(61);
    config.n_annotators = 60;
    config.n_examples = 250;
    config.ratings_per_example = 5;
    config.words_per_text = 2;
    config.trigger_rate = 1.0;  // every example targets women
    config.group_lexicon["women"] = {"trigw1", "trigw2"};
    config.base_offense = {{"trigw1", 1.0}, {"trigw2", 1.5}};
    config.group_membership["women"] = {{"gender", "female"}};
    config.target_affinity_delta = 1.0;
    config.noise_sd = 0.0;

    SyntheticCorpus synth = generate_corpus(generate_population(config), config);
    TrainConfig train_config;
    train_config.dimension = 1 << 12;
    train_config.epochs = 250;
    train_config.learning_rate = 0.02;
    train_config.seed = 3;
    RatingModel rating =
        train_rating_model(synth.corpus, FeatureMask::demographics_survey(), train_config);

    NormalizationMap map = women_map();
    std::vector<TextExample> labeled(synth.corpus.examples.begin(), synth.corpus.examples.end());
    TrainConfig target_config = train_config;
    target_config.epochs = 60;
    target_config.learning_rate = 0.5;
    TargetModel target = train_target_model(labeled, map, target_config);

    CorpusIndex index(synth.corpus);
    double gap_total = 0;
    int gap_count = 0;
    for (const TextExample& example : synth.corpus.examples) {
        TargetGroupReport report =
            run_combined(example, synth.corpus, index, rating, target, map);
        if (!report.target_mean) continue;
        std::size_t members = report.member_predictions.size();
        std::size_t raters = index.records_of(example.example_id).size();
        if (members == 0 || members == raters) continue;
        // separate the non-member mean back out of the overall mean
        double non_member_mean =
            (report.overall_mean * static_cast<double>(raters) -
             *report.target_mean * static_cast<double>(members)) /
            static_cast<double>(raters - members);
        gap_total += *report.target_mean - non_member_mean;
        ++gap_count;
    }
    REQUIRE(gap_count > 50);
    CHECK(std::abs(gap_total / gap_count - 1.0) <= 0.1);
}

TEST_CASE("evaluate with perfect stub models reports zero error everywhere") {
    AnnotationCorpus corpus = five_rater_corpus();
    corpus.examples[0].gold_target_groups = TargetGroupSet{{"women"}};
    RatingModel rating = constant_rating_model(2.0);  // every true rating is 2
    TargetModel target = constant_target_model("women", 0.9);
    NormalizationMap map = women_map();

    MetricsReport report = evaluate(corpus, rating, target, map);
    CHECK(report.individual_mae == 0.0);
    CHECK(report.aggregate_mae == 0.0);
    REQUIRE(report.variance_mae.has_value());
    CHECK(*report.variance_mae == 0.0);
    REQUIRE(report.exact_match.has_value());
    CHECK(*report.exact_match == 1.0);
    CHECK(*report.partial_match == 1.0);
    REQUIRE(report.target_gold.individual_mae.has_value());
    CHECK(*report.target_gold.individual_mae == 0.0);
    REQUIRE(report.target_predicted.individual_mae.has_value());
    CHECK(*report.target_predicted.individual_mae == 0.0);

    SUBCASE("gold and predicted blocks coincide when the sets coincide") {
        CHECK(report.target_gold.individual_mae == report.target_predicted.individual_mae);
        CHECK(report.target_gold.aggregate_mae == report.target_predicted.aggregate_mae);
        CHECK(report.target_gold.offense_error == report.target_predicted.offense_error);
    }
}

TEST_CASE("evaluate in gold mode requires gold sets") {
    AnnotationCorpus corpus = five_rater_corpus();  // no gold targets
    RatingModel rating = constant_rating_model(2.0);
    TargetModel target = constant_target_model("women", 0.9);
    EvaluateOptions options;
    options.mode = TargetMetricMode::gold;
    NormalizationMap map = women_map();
    CHECK_THROWS_WITH_AS(evaluate(corpus, rating, target, map, options),
                         doctest::Contains("gold"), ValidationError);
}

TEST_CASE("demographic signal lowers individual MAE against the text-only baseline") {
    GeneratorConfig config = testutil::synth_base_config(71);
    config.n_annotators = 80;
    config.n_examples = 300;
    config.ratings_per_example = 5;
    config.words_per_text = 3;
    config.trigger_rate = 0.6;
    config.group_lexicon["women"] = {"trigw1", "trigw2"};
    config.base_offense = {{"trigw1", 1.2}, {"trigw2", 0.8}};
    config.feature_effects[{"race", "black"}] = 1.0;
    config.feature_effects[{"political_leaning", "conservative"}] = -0.8;
    config.feature_effects[{"toxic_problem", "frequently"}] = 0.9;
    config.noise_sd = 0.3;

    SyntheticCorpus synth = generate_corpus(generate_population(config), config);
    CorpusSplits splits = split_corpus(synth.corpus, {0.7, 0.15, 0.15}, 5);

    TrainConfig train_config;
    train_config.dimension = 1 << 13;
    train_config.epochs = 120;
    train_config.learning_rate = 0.015;
    train_config.seed = 9;

    RatingModel text_only =
        train_rating_model(splits.train, FeatureMask::text_only(), train_config);
    RatingModel full =
        train_rating_model(splits.train, FeatureMask::demographics_survey(), train_config);
    TargetModel target = constant_target_model("women", 0.9, train_config.dimension);
    NormalizationMap map = women_map();

    MetricsReport text_report = evaluate(splits.test, text_only, target, map);
    MetricsReport full_report = evaluate(splits.test, full, target, map);
    CHECK(full_report.individual_mae < text_report.individual_mae);
    REQUIRE(full_report.variance_mae.has_value());
    CHECK(*full_report.variance_mae < *text_report.variance_mae);
}

TEST_CASE("end-to-end runs with a fixed seed write byte-identical reports") {
    auto run_once = [](const std::string& out_dir) {
        GeneratorConfig config = testutil::synth_base_config(81);
        config.n_annotators = 30;
        config.n_examples = 60;
        config.ratings_per_example = 4;
        config.group_lexicon["women"] = {"trigw"};
        config.base_offense = {{"trigw", 2.0}};
        config.group_membership["women"] = {{"gender", "female"}};
        config.noise_sd = 0.4;

        SyntheticCorpus synth = generate_corpus(generate_population(config), config);
        TrainConfig train_config;
        train_config.dimension = 1 << 11;
        train_config.epochs = 30;
        train_config.learning_rate = 0.02;
        train_config.seed = 4;
        RatingModel rating =
            train_rating_model(synth.corpus, FeatureMask::demographics_survey(), train_config);
        NormalizationMap map = women_map();
        TrainConfig target_config = train_config;
        target_config.learning_rate = 0.4;
        TargetModel target =
            train_target_model(synth.corpus.examples, map, target_config);
        MetricsReport report = evaluate(synth.corpus, rating, target, map);
        write_report_files(report, out_dir);

        CorpusIndex index(synth.corpus);
        std::vector<TargetGroupReport> reports;
        for (const TextExample& e : synth.corpus.examples)
            reports.push_back(run_combined(e, synth.corpus, index, rating, target, map));
        testutil::write_file(out_dir + "/flags.txt",
                             flags_to_text(flag_disagreement(reports, 0.5, 0.5)));
    };
    TempDir d1("determinism_a"), d2("determinism_b");
    run_once(d1.str());
    run_once(d2.str());
    CHECK(testutil::read_file(d1.str("report.txt")) == testutil::read_file(d2.str("report.txt")));
    CHECK(testutil::read_file(d1.str("report.json")) ==
          testutil::read_file(d2.str("report.json")));
    CHECK(testutil::read_file(d1.str("flags.txt")) == testutil::read_file(d2.str("flags.txt")));
    CHECK(testutil::read_file(d1.str("report.txt")).size() > 100);
}

TEST_CASE("flag_disagreement thresholds and ordering") {
    auto make_report = [](const std::string& id, double target, double overall,
                          std::optional<double> variance) {
        TargetGroupReport r;
        r.example_id = id;
        r.target_mean = target;
        r.overall_mean = overall;
        r.target_variance = variance;
        return r;
    };

    std::vector<TargetGroupReport> reports;
    reports.push_back(make_report("hot", 3.5, 1.0, 0.2));      // gap 2.5
    reports.push_back(make_report("calm", 1.2, 1.0, 0.1));     // gap 0.2
    reports.push_back(make_report("spread", 2.0, 1.9, 2.3));   // variance flag only
    reports.push_back(make_report("mid", 2.5, 1.0, 0.3));      // gap 1.5

    std::vector<DisagreementFlag> flags = flag_disagreement(reports, 1.0, 1.0);
    REQUIRE(flags.size() == 3);
    CHECK(flags[0].example_id == "hot");
    CHECK(flags[0].gap == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(flags[0].reason == DisagreementFlag::Reason::target_majority_gap);
    CHECK(flags[1].example_id == "mid");
    CHECK(flags[2].example_id == "spread");
    CHECK(flags[2].reason == DisagreementFlag::Reason::high_target_variance);

    SUBCASE("reports without a target mean never flag") {
        TargetGroupReport empty;
        empty.example_id = "none";
        empty.overall_mean = 0.0;
        CHECK(flag_disagreement({empty}, 0.5, 0.5).empty());
    }
    SUBCASE("thresholds must be positive") {
        CHECK_THROWS_AS(flag_disagreement(reports, 0.0, 1.0), ValidationError);
    }
}

TEST_CASE("planted high-gap examples are exactly the flagged set") {
    // every example targets women, so membership reduces to the gender field
    // and the zero-noise latent model is inside the linear hypothesis class;
    // the predicted gap is then delta * (non-member share of the raters)
    GeneratorConfig config = testutil::synth_base_config(91);
    config.n_annotators = 40;
    config.n_examples = 120;
    config.ratings_per_example = 5;
    config.words_per_text = 1;
    config.trigger_rate = 1.0;
    config.group_lexicon["women"] = {"trigw"};
    config.base_offense = {{"trigw", 1.0}};
    config.group_membership["women"] = {{"gender", "female"}};
    config.target_affinity_delta = 2.0;
    config.noise_sd = 0.0;

    SyntheticCorpus synth = generate_corpus(generate_population(config), config);
    TrainConfig train_config;
    train_config.dimension = 1 << 12;
    train_config.epochs = 250;
    train_config.learning_rate = 0.02;
    RatingModel rating =
        train_rating_model(synth.corpus, FeatureMask::demographics_survey(), train_config);
    NormalizationMap map = women_map();
    TrainConfig target_config = train_config;
    target_config.epochs = 80;
    target_config.learning_rate = 0.5;
    TargetModel target = train_target_model(synth.corpus.examples, map, target_config);

    CorpusIndex index(synth.corpus);
    std::vector<TargetGroupReport> reports;
    std::set<std::string> expected;
    for (const TextExample& e : synth.corpus.examples) {
        reports.push_back(run_combined(e, synth.corpus, index, rating, target, map));
        int members = 0, raters = 0;
        for (const AnnotationRecord* r : index.records_of(e.example_id)) {
            ++raters;
            if (index.annotator(r->annotator_key)->demographics.gender == "female") ++members;
        }
        double true_gap = 2.0 * static_cast<double>(raters - members) / raters;
        if (members > 0 && true_gap >= 1.0) expected.insert(e.example_id);
    }
    std::vector<DisagreementFlag> flags = flag_disagreement(reports, 1.0, 100.0);
    std::set<std::string> flagged;
    for (const DisagreementFlag& f : flags) flagged.insert(f.example_id);
    CHECK(flagged == expected);
    CHECK(!expected.empty());
}
