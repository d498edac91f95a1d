#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "annolens/corpus.hpp"
#include "annolens/target_model.hpp"

namespace annolens {

// Per-example evaluation data: true and predicted ratings keyed by the same
// annotators, plus optional target-group information.
struct ExampleEval {
    std::string example_id;
    std::vector<std::string> annotator_keys;
    Eigen::VectorXd truth;
    Eigen::VectorXd pred;
    std::optional<TargetGroupSet> gold_targets;
    std::optional<TargetGroupSet> predicted_targets;
    std::optional<TargetPhraseList> predicted_phrases;
    std::optional<std::set<std::string>> matched_keys;  // target-group members
};

struct EvaluationFrame {
    std::vector<ExampleEval> examples;
    // annotator key -> (field, value) pairs, for demographic breakdowns
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> annotator_attributes;
};

// Mean over all (annotator, example) pairs of |pred - true|.
double individual_mae(const EvaluationFrame& frame);

// Mean over examples of |mean(pred) - mean(true)|.
double aggregate_mae(const EvaluationFrame& frame);

// Mean over examples with >= 2 ratings of |popvar(pred) - popvar(true)|,
// population variance (divide by n). Throws if no example qualifies.
double variance_mae(const EvaluationFrame& frame);

// Individual-level MAE restricted to matched target-group members on examples
// where those members' true mean rating is >= 1.0 (at least somewhat
// offensive, on the 0-4 scale). Absent when no pair qualifies.
std::optional<double> target_offense_error(const EvaluationFrame& frame);

// Sub-frame holding only matched-member ratings; examples without matched
// members are dropped. Feeds the target-group variants of the MAE metrics.
EvaluationFrame restrict_to_matched(const EvaluationFrame& frame);

// Word embeddings used as the WMD ground metric. File format: one word per
// line followed by space-separated decimals.
struct EmbeddingTable {
    int dimension = 0;
    std::map<std::string, Eigen::VectorXd> vectors;

    static EmbeddingTable load(const std::string& path);
    // Out-of-vocabulary words map to the zero vector and are reported through
    // the diagnostics channel.
    Eigen::VectorXd lookup(const std::string& word, std::vector<std::string>* oov) const;
};

bool is_stopword(const std::string& word);

// Exact word mover's distance between the normalized bag-of-words
// distributions of two phrase lists under the Euclidean ground metric.
// Throws on an empty side (including all tokens filtered as stopwords).
double word_movers_distance(const TargetPhraseList& a, const TargetPhraseList& b,
                            const EmbeddingTable& embeddings, bool filter_stopwords = false,
                            std::vector<std::string>* oov_diagnostics = nullptr);

// Exact min-cost transport between discrete distributions (exposed for the
// WMD acceptance checks).
double solve_transport(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                       const Eigen::MatrixXd& cost);

struct MatchAccuracy {
    double exact = 0.0;
    double partial = 0.0;
};

// exact: fraction of pairs with set equality; partial: fraction with a
// non-empty intersection or with both sets empty.
MatchAccuracy match_accuracy(const std::vector<TargetGroupSet>& predicted,
                             const std::vector<TargetGroupSet>& gold);

enum class BreakdownAxis { annotator_demographic, predicted_target_group, target_set_size };

struct BreakdownRow {
    std::string key;
    double mae = 0.0;
    std::size_t count = 0;
    bool low_support = false;
};

// Individual MAE restricted to each bucket of the axis, sorted ascending by
// MAE. Buckets with fewer pairs than min_count are flagged low-support. The
// target-set-size axis uses the predicted set when present, else the gold set.
std::vector<BreakdownRow> group_breakdown(const EvaluationFrame& frame, BreakdownAxis axis,
                                          std::size_t min_count = 5);

struct TargetErrorRow {
    std::string group;
    std::size_t missed = 0;          // gold but not predicted
    std::size_t false_positive = 0;  // predicted but not gold
};

struct TargetErrorAnalysis {
    std::vector<TargetErrorRow> groups;
    std::vector<TargetErrorRow> categories;  // rollups via the group->category map
};

TargetErrorAnalysis target_error_analysis(const std::vector<TargetGroupSet>& predicted,
                                          const std::vector<TargetGroupSet>& gold,
                                          const std::map<std::string, std::string>& category_map);

// Loads a two-column TSV mapping canonical group -> category.
std::map<std::string, std::string> load_category_map(const std::string& path);

struct TargetMetricsBlock {
    std::optional<double> individual_mae;
    std::optional<double> aggregate_mae;
    std::optional<double> variance_mae;
    std::optional<double> offense_error;
};

// Every evaluation quantity produced by one run; serializes to a flat
// key/value text file and a structured JSON document, both byte-stable for
// fixed inputs.
struct MetricsReport {
    std::size_t n_examples = 0;
    std::size_t n_pairs = 0;
    double individual_mae = 0.0;
    double aggregate_mae = 0.0;
    std::optional<double> variance_mae;
    TargetMetricsBlock target_gold;
    TargetMetricsBlock target_predicted;
    std::optional<double> wmd_mean;
    std::optional<std::size_t> wmd_count;
    std::optional<double> exact_match;
    std::optional<double> partial_match;
    std::vector<BreakdownRow> demographic_breakdown;
    std::vector<BreakdownRow> target_group_breakdown;
    std::vector<BreakdownRow> set_size_breakdown;
    std::optional<TargetErrorAnalysis> error_analysis;

    std::string to_kv_text() const;
    std::string to_json() const;
};

}  // namespace annolens
