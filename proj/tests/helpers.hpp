#pragma once

// Shared fixtures for the test suites: a temp-directory guard, file helpers,
// and builders for small corpora over the default schema.

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "annolens/corpus.hpp"
#include "annolens/synth.hpp"

namespace testutil {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = fs::temp_directory_path() /
                ("annolens_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }
    std::string str(const std::string& name = "") const {
        return name.empty() ? path_.string() : (path_ / name).string();
    }

private:
    fs::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline const annolens::DatasetSchema& default_schema() {
    static const annolens::DatasetSchema schema =
        annolens::DatasetSchema::load(std::string(ANNOLENS_DATA_DIR) + "/schema.txt");
    return schema;
}

// Reference profile: 55 - 64 year old white female, bachelor's degree,
// politically independent, parent, religion very important, straight,
// cisgender; uses social media/news/video/forums, has seen toxic comments,
// was personally targeted, tech somewhat positive, toxic frequently a problem.
inline annolens::AnnotatorProfile reference_annotator(const std::string& key = "a1") {
    annolens::AnnotatorProfile a;
    a.annotator_key = key;
    a.demographics = {"55 - 64", "female", "white", "a bachelor's degree", "independent",
                      true,      "very important", "straight", "cisgender"};
    a.survey.content_types = {"social media", "news sites", "video sites", "web forums"};
    a.survey.tech_impact = "somewhat positive";
    a.survey.seen_toxic = true;
    a.survey.personally_targeted = true;
    a.survey.toxic_problem = "frequently";
    return a;
}

struct CorpusBuilder {
    annolens::AnnotationCorpus corpus;

    CorpusBuilder() { corpus.schema = default_schema(); }

    annolens::AnnotatorProfile& add_annotator(const std::string& key) {
        corpus.annotators.push_back(reference_annotator(key));
        return corpus.annotators.back();
    }

    annolens::TextExample& add_example(const std::string& id, const std::string& text) {
        corpus.examples.push_back({id, text, std::nullopt});
        return corpus.examples.back();
    }

    void add_record(const std::string& annotator, const std::string& example, int rating) {
        corpus.records.push_back({annotator, example, rating});
    }
};

// Generator-config skeleton with uniform field distributions; tests customize
// the lexicon, effects, and sizes.
inline annolens::GeneratorConfig synth_base_config(std::uint64_t seed) {
    annolens::GeneratorConfig c;
    c.seed = seed;
    auto even = [](std::vector<std::string> values) {
        std::vector<std::pair<std::string, double>> dist;
        for (const std::string& v : values)
            dist.emplace_back(v, 1.0 / static_cast<double>(values.size()));
        return dist;
    };
    c.field_distributions["age_band"] = even({"18 - 24", "25 - 34", "55 - 64"});
    c.field_distributions["gender"] = even({"female", "male", "nonbinary"});
    c.field_distributions["race"] = even({"white", "black", "asian", "hispanic"});
    c.field_distributions["education"] = even({"a high school degree", "a bachelor's degree"});
    c.field_distributions["political_leaning"] = even({"liberal", "conservative", "independent"});
    c.field_distributions["is_parent"] = even({"yes", "no"});
    c.field_distributions["religion_importance"] =
        even({"not at all important", "somewhat important", "very important"});
    c.field_distributions["sexual_orientation"] = even({"straight", "gay or lesbian", "bisexual"});
    c.field_distributions["trans_status"] = even({"cisgender", "transgender"});
    c.field_distributions["tech_impact"] =
        even({"somewhat negative", "neutral", "somewhat positive"});
    c.field_distributions["seen_toxic"] = even({"yes", "no"});
    c.field_distributions["personally_targeted"] = even({"yes", "no"});
    c.field_distributions["toxic_problem"] = even({"never", "sometimes", "frequently"});
    c.content_type_probs = {{"social media", 0.6}, {"news sites", 0.4}, {"email", 0.3}};
    c.filler_words = {"lorem", "ipsum", "dolor", "sit", "amet", "consectetur", "adipiscing",
                      "elit", "sed", "tempor"};
    return c;
}

// Deterministic small corpus: each example rated by `raters` annotators whose
// demographics cycle through a few schema values.
inline annolens::AnnotationCorpus varied_corpus(int n_annotators, int n_examples, int raters,
                                                std::uint64_t seed = 7) {
    CorpusBuilder builder;
    const auto& schema = builder.corpus.schema;
    auto values = [&](const char* field) { return schema.require(field).values; };
    const auto genders = values("gender");
    const auto races = values("race");
    const auto ages = values("age_band");
    const auto politics = values("political_leaning");
    const auto problems = values("toxic_problem");

    for (int i = 0; i < n_annotators; ++i) {
        auto& a = builder.add_annotator("a" + std::to_string(i));
        a.demographics.gender = genders[i % genders.size()];
        a.demographics.race = races[i % races.size()];
        a.demographics.age_band = ages[i % ages.size()];
        a.demographics.political_leaning = politics[i % politics.size()];
        a.demographics.is_parent = i % 2 == 0;
        a.survey.toxic_problem = problems[i % problems.size()];
        a.survey.seen_toxic = i % 3 != 0;
    }
    std::mt19937_64 rng(seed);
    for (int e = 0; e < n_examples; ++e) {
        std::string id = "e" + std::to_string(e);
        builder.add_example(id, "sample text number " + std::to_string(e));
        for (int r = 0; r < raters; ++r) {
            int annotator = static_cast<int>((rng() >> 8) % n_annotators);
            while (true) {  // avoid duplicate (annotator, example) pairs
                bool taken = false;
                for (const auto& rec : builder.corpus.records)
                    taken = taken || (rec.example_id == id &&
                                      rec.annotator_key == "a" + std::to_string(annotator));
                if (!taken) break;
                annotator = (annotator + 1) % n_annotators;
            }
            builder.add_record("a" + std::to_string(annotator), id,
                               static_cast<int>(rng() % 5));
        }
    }
    annolens::validate_corpus(builder.corpus);
    return builder.corpus;
}

}  // namespace testutil
