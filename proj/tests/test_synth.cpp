#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "annolens/synth.hpp"
#include "helpers.hpp"

using namespace annolens;
using testutil::TempDir;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Distribution of round(clip(N(mu, sd), 0, 4)) over {0..4}.
std::array<double, 5> rating_distribution(double mu, double sd) {
    std::array<double, 5> p{};
    p[0] = normal_cdf((0.5 - mu) / sd);
    for (int k = 1; k <= 3; ++k)
        p[k] = normal_cdf((k + 0.5 - mu) / sd) - normal_cdf((k - 0.5 - mu) / sd);
    p[4] = 1.0 - normal_cdf((3.5 - mu) / sd);
    return p;
}

}  // namespace

TEST_CASE("degenerate distributions produce identical profiles") {
    GeneratorConfig config = testutil::synth_base_config(3);
    for (auto& [field, dist] : config.field_distributions) dist = {{dist.front().first, 1.0}};
    config.content_type_probs = {{"social media", 1.0}};
    config.n_annotators = 10;
    config.n_examples = 0;

    std::vector<AnnotatorProfile> population = generate_population(config);
    REQUIRE(population.size() == 10);
    for (const AnnotatorProfile& a : population) {
        CHECK(a.demographics == population[0].demographics);
        CHECK(a.survey == population[0].survey);
    }
}

TEST_CASE("population generation is seed deterministic") {
    GeneratorConfig config = testutil::synth_base_config(17);
    config.n_annotators = 40;
    config.n_examples = 0;
    std::vector<AnnotatorProfile> p1 = generate_population(config);
    std::vector<AnnotatorProfile> p2 = generate_population(config);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].demographics == p2[i].demographics);
        CHECK(p1[i].survey == p2[i].survey);
    }

    config.n_annotators = 0;
    CHECK(generate_population(config).empty());
}

TEST_CASE("constant latent model yields constant ratings") {
    GeneratorConfig config = testutil::synth_base_config(5);
    config.n_annotators = 12;
    config.n_examples = 30;
    config.ratings_per_example = 4;
    config.words_per_text = 1;
    config.trigger_rate = 1.0;
    config.group_lexicon["grp"] = {"trig"};
    config.base_offense["trig"] = 2.0;
    config.noise_sd = 0.0;

    SyntheticCorpus synth = generate_corpus(generate_population(config), config);
    for (const AnnotationRecord& r : synth.corpus.records) CHECK(r.rating == 2);
    for (const auto& [key, latent] : synth.latent) CHECK(latent == 2.0);
}

TEST_CASE("target affinity adds exactly the configured delta before clipping") {
    GeneratorConfig config = testutil::synth_base_config(9);
    config.n_annotators = 30;
    config.n_examples = 50;
    config.ratings_per_example = 5;
    config.words_per_text = 2;
    config.trigger_rate = 0.8;
    config.group_lexicon["women"] = {"trigw"};
    config.base_offense["trigw"] = 1.5;
    config.group_membership["women"] = {{"gender", "female"}};
    config.target_affinity_delta = 1.0;
    config.noise_sd = 0.0;

    std::vector<AnnotatorProfile> population = generate_population(config);
    SyntheticCorpus synth = generate_corpus(population, config);
    CorpusIndex index(synth.corpus);

    int compared = 0;
    for (const TextExample& e : synth.corpus.examples) {
        if (!e.gold_target_groups->contains("women")) continue;
        std::optional<double> member_latent, other_latent;
        for (const AnnotationRecord* r : index.records_of(e.example_id)) {
            const AnnotatorProfile* a = index.annotator(r->annotator_key);
            double latent = synth.latent.at({r->annotator_key, e.example_id});
            if (a->demographics.gender == "female") member_latent = latent;
            else other_latent = latent;
        }
        if (member_latent && other_latent) {
            CHECK(*member_latent - *other_latent == doctest::Approx(1.0).epsilon(1e-12));
            ++compared;
        }
    }
    CHECK(compared > 5);
}

TEST_CASE("gold target groups are exactly the groups whose triggers occur") {
    GeneratorConfig config = testutil::synth_base_config(23);
    config.n_annotators = 20;
    config.n_examples = 80;
    config.ratings_per_example = 3;
    config.words_per_text = 6;
    config.trigger_rate = 0.4;
    config.group_lexicon["women"] = {"trigw1", "trigw2"};
    config.group_lexicon["black"] = {"trigb1"};
    config.base_offense = {{"trigw1", 2.0}, {"trigw2", 1.0}, {"trigb1", 2.5}};

    SyntheticCorpus synth = generate_corpus(generate_population(config), config);
    bool saw_women = false, saw_empty = false;
    for (const TextExample& e : synth.corpus.examples) {
        std::set<std::string> expected;
        for (const std::string& word : tokenize_words(e.text)) {
            if (word == "trigw1" || word == "trigw2") expected.insert("women");
            if (word == "trigb1") expected.insert("black");
        }
        REQUIRE(e.gold_target_groups.has_value());
        CHECK(e.gold_target_groups->groups == expected);
        saw_women = saw_women || expected.count("women");
        saw_empty = saw_empty || expected.empty();
    }
    CHECK(saw_women);
    CHECK(saw_empty);
}

TEST_CASE("empirical mean rating matches the analytic latent expectation") {
    GeneratorConfig config = testutil::synth_base_config(31);
    // degenerate population so every record shares one latent mean
    for (auto& [field, dist] : config.field_distributions) dist = {{dist.front().first, 1.0}};
    config.content_type_probs = {{"social media", 1.0}};
    config.n_annotators = 25;
    config.n_examples = 800;
    config.ratings_per_example = 5;
    config.words_per_text = 1;
    config.trigger_rate = 1.0;
    config.group_lexicon["grp"] = {"trig"};
    config.base_offense["trig"] = 1.6;
    config.feature_effects[{"gender", config.field_distributions["gender"][0].first}] = 0.3;
    config.noise_sd = 0.8;

    SyntheticCorpus synth = generate_corpus(generate_population(config), config);
    const double mu = 1.9;  // base 1.6 + gender effect 0.3
    std::array<double, 5> p = rating_distribution(mu, config.noise_sd);
    double expectation = 0, second_moment = 0;
    for (int k = 0; k <= 4; ++k) {
        expectation += k * p[k];
        second_moment += k * k * p[k];
    }
    double variance = second_moment - expectation * expectation;

    double total = 0;
    for (const AnnotationRecord& r : synth.corpus.records) total += r.rating;
    double empirical = total / static_cast<double>(synth.corpus.records.size());
    double standard_error =
        std::sqrt(variance / static_cast<double>(synth.corpus.records.size()));
    CHECK(std::abs(empirical - expectation) <= 3.0 * standard_error);
}

TEST_CASE("corpus generation is seed deterministic end to end") {
    GeneratorConfig config = testutil::synth_base_config(12);
    config.n_annotators = 15;
    config.n_examples = 40;
    config.ratings_per_example = 3;
    config.group_lexicon["women"] = {"trigw"};
    config.base_offense["trigw"] = 2.0;
    config.noise_sd = 0.5;

    std::vector<AnnotatorProfile> population = generate_population(config);
    SyntheticCorpus s1 = generate_corpus(population, config);
    SyntheticCorpus s2 = generate_corpus(population, config);
    REQUIRE(s1.corpus.records.size() == s2.corpus.records.size());
    for (std::size_t i = 0; i < s1.corpus.records.size(); ++i) {
        CHECK(s1.corpus.records[i].rating == s2.corpus.records[i].rating);
        CHECK(s1.corpus.records[i].annotator_key == s2.corpus.records[i].annotator_key);
    }
    for (std::size_t i = 0; i < s1.corpus.examples.size(); ++i)
        CHECK(s1.corpus.examples[i].text == s2.corpus.examples[i].text);
    CHECK(s1.latent == s2.latent);
}

TEST_CASE("synthetic corpora round-trip through the ingestion format") {
    GeneratorConfig config = testutil::synth_base_config(44);
    config.n_annotators = 10;
    config.n_examples = 20;
    config.ratings_per_example = 3;
    config.group_lexicon["women"] = {"trigw"};
    config.base_offense["trigw"] = 2.0;

    SyntheticCorpus synth = generate_corpus(generate_population(config), config);
    TempDir dir("synth_roundtrip");
    save_synthetic_corpus(synth, dir.str());
    AnnotationCorpus loaded = load_corpus_dir(dir.str());
    CHECK(loaded.examples.size() == synth.corpus.examples.size());
    CHECK(loaded.records.size() == synth.corpus.records.size());
    CHECK(testutil::fs::exists(dir.path() / "latents.txt"));

    SUBCASE("generator config files round-trip too") {
        config.feature_effects[{"race", "black"}] = 0.7;
        config.group_membership["women"] = {{"gender", "female"}};
        config.save(dir.str("gen.cfg"));
        GeneratorConfig loaded_config = GeneratorConfig::load(dir.str("gen.cfg"));
        CHECK(loaded_config.n_annotators == config.n_annotators);
        CHECK(loaded_config.field_distributions == config.field_distributions);
        CHECK(loaded_config.feature_effects == config.feature_effects);
        CHECK(loaded_config.group_membership == config.group_membership);
        CHECK(loaded_config.base_offense == config.base_offense);

        SyntheticCorpus again = generate_corpus(generate_population(loaded_config), loaded_config);
        // same declarative config -> identical corpus up to the new effects
        CHECK(again.corpus.examples.size() == synth.corpus.examples.size());
    }
}

TEST_CASE("generator config validation") {
    GeneratorConfig config = testutil::synth_base_config(1);
    config.n_annotators = 4;
    config.n_examples = 10;
    config.ratings_per_example = 5;  // more raters than annotators
    config.group_lexicon["g"] = {"t"};
    CHECK_THROWS_AS(config.validate(), ValidationError);

    config.ratings_per_example = 2;
    config.field_distributions["gender"] = {{"female", 0.5}, {"male", 0.4}};  // sums to 0.9
    CHECK_THROWS_AS(config.validate(), ValidationError);
}
