#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "annolens/corpus.hpp"

namespace annolens {

// Declarative description of a synthetic annotator population and corpus with
// a known additive latent rating model:
//   latent = sum base_offense(trigger occurrences)
//          + sum feature_effects(annotator field values)
//          + target_affinity_delta * [annotator belongs to a gold target group]
//          + Gaussian(0, noise_sd), clipped to [0, 4].
// Stored ratings round the clipped latent to the nearest integer; the real
// value is retained so tests can separate rounding error from model error.
struct GeneratorConfig {
    int n_annotators = 100;
    int n_examples = 200;
    int ratings_per_example = 5;

    // value distribution per single-valued field (all demographic fields,
    // tech_impact, seen_toxic, personally_targeted, toxic_problem)
    std::map<std::string, std::vector<std::pair<std::string, double>>> field_distributions;
    // independent inclusion probability per content type
    std::map<std::string, double> content_type_probs;

    std::map<std::string, std::vector<std::string>> group_lexicon;  // group -> trigger words
    std::map<std::string, double> base_offense;                     // trigger word -> effect
    double target_affinity_delta = 0.0;
    std::map<std::pair<std::string, std::string>, double> feature_effects;  // (field, value)
    // group -> (field, value) pairs that define membership
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> group_membership;

    double noise_sd = 0.0;
    std::uint64_t seed = 0;
    int words_per_text = 8;
    double trigger_rate = 0.3;
    std::vector<std::string> filler_words;

    static GeneratorConfig load(const std::string& path);
    void save(const std::string& path) const;
    void validate() const;

    // Schema whose vocabularies are exactly the declared value supports.
    DatasetSchema derive_schema() const;

    bool is_member(const AnnotatorProfile& annotator, const std::string& group) const;
};

// Single-valued field accessor by schema field name (flags as yes/no).
std::string annotator_field_value(const AnnotatorProfile& annotator, const std::string& field);

// (field, value) pairs of the nine demographic fields, for breakdowns.
std::vector<std::pair<std::string, std::string>> annotator_attribute_pairs(
    const AnnotatorProfile& annotator);

std::vector<AnnotatorProfile> generate_population(const GeneratorConfig& config);

struct SyntheticCorpus {
    AnnotationCorpus corpus;
    // (annotator_key, example_id) -> clipped latent rating before rounding
    std::map<std::pair<std::string, std::string>, double> latent;
};

SyntheticCorpus generate_corpus(const std::vector<AnnotatorProfile>& population,
                                const GeneratorConfig& config);

// Writes the corpus in the ingestible on-disk format plus latents.txt.
void save_synthetic_corpus(const SyntheticCorpus& synth, const std::string& dir);

}  // namespace annolens
