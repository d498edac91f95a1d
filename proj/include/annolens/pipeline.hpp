#pragma once

#include <optional>
#include <string>
#include <vector>

#include "annolens/corpus.hpp"
#include "annolens/metrics.hpp"
#include "annolens/rating_model.hpp"
#include "annolens/synth.hpp"
#include "annolens/target_model.hpp"

namespace annolens {

// Combined prediction for one example: predicted target groups, matched
// annotators among the example's raters, their predicted ratings, and the
// target/overall means. Overall mean uses predicted ratings of all raters,
// since true ratings are unavailable at deployment time.
struct TargetGroupReport {
    std::string example_id;
    TargetPhraseList predicted_phrases;
    TargetGroupSet predicted_groups;
    std::vector<std::string> matched_keys;
    std::vector<RatingPrediction> member_predictions;
    std::optional<double> target_mean;
    std::optional<double> target_variance;  // population variance, >= 2 members
    double overall_mean = 0.0;

    std::string to_json() const;
};

// When overall_from_truth is set, the overall mean comes from the recorded
// true ratings instead of predictions (predictions remain the default since
// truths are unavailable at deployment time).
TargetGroupReport run_combined(const TextExample& example, const AnnotationCorpus& corpus,
                               const CorpusIndex& index, const RatingModel& rating_model,
                               const TargetModel& target_model, const NormalizationMap& map,
                               const TemplateGrammar& grammar = TemplateGrammar::builtin(),
                               bool overall_from_truth = false);

// Convenience form that builds the corpus index itself.
TargetGroupReport run_combined(const TextExample& example, const AnnotationCorpus& corpus,
                               const RatingModel& rating_model, const TargetModel& target_model,
                               const NormalizationMap& map,
                               const TemplateGrammar& grammar = TemplateGrammar::builtin(),
                               bool overall_from_truth = false);

enum class TargetMetricMode { gold, predicted, both };

struct EvaluateOptions {
    TargetMetricMode mode = TargetMetricMode::both;
    const EmbeddingTable* embeddings = nullptr;           // enables wmd_mean
    const std::map<std::string, std::string>* category_map = nullptr;
    std::size_t breakdown_min_count = 5;
    bool wmd_filter_stopwords = false;
    const TemplateGrammar* grammar = nullptr;             // builtin when null
    const ExternalPredictorOptions* external = nullptr;   // exchange-dir predictor override
};

// The evaluation frame over every test record: true ratings, predicted
// ratings, predicted and gold target sets, and annotator attributes.
// Matched-member keys are left to apply_target_matches.
EvaluationFrame build_evaluation_frame(const AnnotationCorpus& corpus,
                                       const RatingModel& rating_model,
                                       const TargetModel& target_model,
                                       const NormalizationMap& map,
                                       const EvaluateOptions& options = {});

// Sets matched_keys from gold or predicted target sets; examples without the
// requested set get no matches.
void apply_target_matches(EvaluationFrame& frame, const AnnotationCorpus& corpus,
                          const NormalizationMap& map, bool use_gold);

// Computes the full MetricsReport from a prepared frame. Target metric blocks
// are filled per the mode; gold-derived quantities (match accuracy, WMD,
// error analysis) require gold sets and are skipped when none exist.
MetricsReport compute_report(EvaluationFrame frame, const AnnotationCorpus& corpus,
                             const NormalizationMap& map, const EvaluateOptions& options = {});

// End-to-end evaluation of the module chain on a test corpus. Throws
// ValidationError when mode is gold and an example lacks gold targets.
MetricsReport evaluate(const AnnotationCorpus& test_corpus, const RatingModel& rating_model,
                       const TargetModel& target_model, const NormalizationMap& map,
                       const EvaluateOptions& options = {});

struct DisagreementFlag {
    enum class Reason { target_majority_gap, high_target_variance };

    std::string example_id;
    double target_mean = 0.0;
    double overall_mean = 0.0;
    double gap = 0.0;  // |target_mean - overall_mean|
    std::optional<double> variance_among_targets;
    Reason reason = Reason::target_majority_gap;
};

// Emits a gap flag when gap >= gap_threshold and a variance flag when the
// target-member variance >= variance_threshold; sorted by gap descending.
std::vector<DisagreementFlag> flag_disagreement(const std::vector<TargetGroupReport>& reports,
                                                double gap_threshold, double variance_threshold);

void write_report_files(const MetricsReport& report, const std::string& dir);
std::string flags_to_text(const std::vector<DisagreementFlag>& flags);

}  // namespace annolens
