#pragma once

#include <optional>
#include <string>
#include <vector>

#include "annolens/corpus.hpp"
#include "annolens/rating_model.hpp"

namespace annolens {

struct AblationResult {
    std::string label;
    FeatureMask mask;
    double individual_mae = 0.0;
    double aggregate_mae = 0.0;
    std::optional<double> variance_mae;
};

// Trains one model on the train split under the mask and evaluates the three
// rating MAEs on the validation split.
AblationResult evaluate_mask(const std::string& label, const FeatureMask& mask,
                             const AnnotationCorpus& train, const AnnotationCorpus& val,
                             const TrainConfig& config,
                             const TemplateGrammar& grammar = TemplateGrammar::builtin());

// One model per feature (mask = text + that feature), all rows sharing the
// splits and seed; sorted ascending by validation individual MAE. Feature
// names are the non-text FeatureMask flags.
std::vector<AblationResult> single_feature_sweep(
    const AnnotationCorpus& train, const AnnotationCorpus& val,
    const std::vector<std::string>& features, const TrainConfig& config,
    const TemplateGrammar& grammar = TemplateGrammar::builtin());

struct SelectionStep {
    std::string feature;
    double individual_mae = 0.0;  // after adding the feature
};

// Greedy forward selection over candidate features starting from a text-only
// model: each step adds the feature whose inclusion most reduces validation
// individual MAE, stopping after k features or when the best improvement
// falls below epsilon. Ties break alphabetically.
std::vector<SelectionStep> forward_selection(
    const AnnotationCorpus& train, const AnnotationCorpus& val,
    const std::vector<std::string>& candidates, std::size_t k, double epsilon,
    const TrainConfig& config, const TemplateGrammar& grammar = TemplateGrammar::builtin());

// One row per mask in input order, common splits and seed.
std::vector<AblationResult> masked_comparison(
    const AnnotationCorpus& train, const AnnotationCorpus& val,
    const std::vector<std::pair<std::string, FeatureMask>>& masks, const TrainConfig& config,
    const TemplateGrammar& grammar = TemplateGrammar::builtin());

std::string ablation_table_text(const std::vector<AblationResult>& rows);
std::string ablation_table_json(const std::vector<AblationResult>& rows);

}  // namespace annolens
