#include "annolens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace annolens {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

double population_variance(const std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

TargetPhraseList set_to_phrases(const TargetGroupSet& set) {
    TargetPhraseList list;
    for (const std::string& g : set.groups) list.phrases.push_back(g);
    return list;
}

}  // namespace

std::string TargetGroupReport::to_json() const {
    ordered_json j;
    j["example_id"] = example_id;
    j["predicted_phrases"] = predicted_phrases.to_string();
    j["predicted_groups"] = std::vector<std::string>(predicted_groups.groups.begin(),
                                                     predicted_groups.groups.end());
    j["matched_keys"] = matched_keys;
    ordered_json members = ordered_json::array();
    for (const RatingPrediction& p : member_predictions)
        members.push_back({{"annotator_key", p.annotator_key}, {"value", p.value}});
    j["member_predictions"] = std::move(members);
    j["target_mean"] = target_mean ? ordered_json(*target_mean) : ordered_json(nullptr);
    j["target_variance"] =
        target_variance ? ordered_json(*target_variance) : ordered_json(nullptr);
    j["overall_mean"] = overall_mean;
    return j.dump();
}

TargetGroupReport run_combined(const TextExample& example, const AnnotationCorpus& corpus,
                               const CorpusIndex& index, const RatingModel& rating_model,
                               const TargetModel& target_model, const NormalizationMap& map,
                               const TemplateGrammar& grammar, bool overall_from_truth) {
    TargetGroupReport report;
    report.example_id = example.example_id;
    report.predicted_phrases = predict_target_phrases(target_model, example.text);
    report.predicted_groups = normalize_groups(report.predicted_phrases, map);

    const auto& records = index.records_of(example.example_id);
    std::vector<double> all_values;
    for (const AnnotationRecord* record : records) {
        const AnnotatorProfile* annotator = index.annotator(record->annotator_key);
        if (!annotator) throw ValidationError("record references unknown annotator");
        ModelInput input = assemble_input(*annotator, example, corpus.schema, grammar,
                                          rating_model.mask, rating_model.mask.id);
        RatingPrediction prediction = predict_rating(rating_model, input);
        all_values.push_back(overall_from_truth ? static_cast<double>(record->rating)
                                                : prediction.value);

        std::set<std::string> tags = annotator_group_tags(*annotator, map);
        bool member = false;
        for (const std::string& g : report.predicted_groups.groups)
            member = member || tags.count(g) > 0;
        if (member) {
            report.matched_keys.push_back(annotator->annotator_key);
            report.member_predictions.push_back(prediction);
        }
    }

    if (!all_values.empty()) {
        double total = 0;
        for (double v : all_values) total += v;
        report.overall_mean = total / static_cast<double>(all_values.size());
    }
    if (!report.member_predictions.empty()) {
        std::vector<double> member_values;
        for (const RatingPrediction& p : report.member_predictions)
            member_values.push_back(p.value);
        double total = 0;
        for (double v : member_values) total += v;
        report.target_mean = total / static_cast<double>(member_values.size());
        if (member_values.size() >= 2)
            report.target_variance = population_variance(member_values);
    }
    return report;
}

TargetGroupReport run_combined(const TextExample& example, const AnnotationCorpus& corpus,
                               const RatingModel& rating_model, const TargetModel& target_model,
                               const NormalizationMap& map, const TemplateGrammar& grammar,
                               bool overall_from_truth) {
    CorpusIndex index(corpus);
    return run_combined(example, corpus, index, rating_model, target_model, map, grammar,
                        overall_from_truth);
}

EvaluationFrame build_evaluation_frame(const AnnotationCorpus& corpus,
                                       const RatingModel& rating_model,
                                       const TargetModel& target_model,
                                       const NormalizationMap& map,
                                       const EvaluateOptions& options) {
    const TemplateGrammar& grammar =
        options.grammar ? *options.grammar : TemplateGrammar::builtin();
    CorpusIndex index(corpus);

    EvaluationFrame frame;
    for (const AnnotatorProfile& a : corpus.annotators)
        frame.annotator_attributes[a.annotator_key] = annotator_attribute_pairs(a);

    // assemble inputs in corpus example order; one flat list so an external
    // predictor can answer a single exchange round
    std::vector<ModelInput> inputs;
    std::vector<std::pair<std::size_t, double>> targets;  // (example index, truth)
    for (const TextExample& example : corpus.examples) {
        ExampleEval eval;
        eval.example_id = example.example_id;
        if (example.gold_target_groups) eval.gold_targets = example.gold_target_groups;
        eval.predicted_phrases = predict_target_phrases(target_model, example.text);
        eval.predicted_targets = normalize_groups(*eval.predicted_phrases, map);
        frame.examples.push_back(std::move(eval));

        for (const AnnotationRecord* record : index.records_of(example.example_id)) {
            const AnnotatorProfile* annotator = index.annotator(record->annotator_key);
            inputs.push_back(assemble_input(*annotator, example, corpus.schema, grammar,
                                            rating_model.mask, rating_model.mask.id));
            targets.emplace_back(frame.examples.size() - 1,
                                 static_cast<double>(record->rating));
        }
    }

    std::vector<RatingPrediction> predictions;
    if (options.external) {
        predictions = external_predict(*options.external, inputs, rating_model.config.clip_lo,
                                       rating_model.config.clip_hi);
    } else {
        predictions.reserve(inputs.size());
        for (const ModelInput& input : inputs)
            predictions.push_back(predict_rating(rating_model, input));
    }

    std::vector<std::vector<double>> truths(frame.examples.size());
    std::vector<std::vector<double>> preds(frame.examples.size());
    std::vector<std::vector<std::string>> keys(frame.examples.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto [example_idx, truth] = targets[i];
        truths[example_idx].push_back(truth);
        preds[example_idx].push_back(predictions[i].value);
        keys[example_idx].push_back(predictions[i].annotator_key);
    }
    for (std::size_t i = 0; i < frame.examples.size(); ++i) {
        frame.examples[i].annotator_keys = std::move(keys[i]);
        frame.examples[i].truth = Eigen::Map<Eigen::VectorXd>(
            truths[i].data(), static_cast<Eigen::Index>(truths[i].size()));
        frame.examples[i].pred = Eigen::Map<Eigen::VectorXd>(
            preds[i].data(), static_cast<Eigen::Index>(preds[i].size()));
    }
    return frame;
}

void apply_target_matches(EvaluationFrame& frame, const AnnotationCorpus& corpus,
                          const NormalizationMap& map, bool use_gold) {
    CorpusIndex index(corpus);
    for (ExampleEval& e : frame.examples) {
        const std::optional<TargetGroupSet>& set = use_gold ? e.gold_targets : e.predicted_targets;
        e.matched_keys = std::set<std::string>{};
        if (!set || set->empty()) continue;
        for (const std::string& key : e.annotator_keys) {
            const AnnotatorProfile* annotator = index.annotator(key);
            if (!annotator) continue;
            std::set<std::string> tags = annotator_group_tags(*annotator, map);
            for (const std::string& g : set->groups)
                if (tags.count(g)) {
                    e.matched_keys->insert(key);
                    break;
                }
        }
    }
}

namespace {

TargetMetricsBlock target_block(const EvaluationFrame& frame) {
    TargetMetricsBlock block;
    EvaluationFrame restricted = restrict_to_matched(frame);
    if (!restricted.examples.empty()) {
        block.individual_mae = individual_mae(restricted);
        block.aggregate_mae = aggregate_mae(restricted);
        bool has_pairs = false;
        for (const ExampleEval& e : restricted.examples) has_pairs |= e.truth.size() >= 2;
        if (has_pairs) block.variance_mae = variance_mae(restricted);
    }
    block.offense_error = target_offense_error(frame);
    return block;
}

}  // namespace

MetricsReport compute_report(EvaluationFrame frame, const AnnotationCorpus& corpus,
                             const NormalizationMap& map, const EvaluateOptions& options) {
    MetricsReport report;
    report.n_examples = frame.examples.size();
    for (const ExampleEval& e : frame.examples)
        report.n_pairs += static_cast<std::size_t>(e.truth.size());

    report.individual_mae = individual_mae(frame);
    report.aggregate_mae = aggregate_mae(frame);
    bool any_multi = false;
    for (const ExampleEval& e : frame.examples) any_multi |= e.truth.size() >= 2;
    if (any_multi) report.variance_mae = variance_mae(frame);

    bool any_gold = false;
    bool all_gold = true;
    for (const ExampleEval& e : frame.examples) {
        any_gold |= e.gold_targets.has_value();
        all_gold &= e.gold_targets.has_value();
    }
    if (options.mode == TargetMetricMode::gold && !all_gold)
        throw ValidationError("gold target metrics requested but some examples have no gold "
                              "target groups");

    if (options.mode != TargetMetricMode::predicted && any_gold) {
        EvaluationFrame gold_frame = frame;
        // examples without gold sets contribute no gold-mode matches
        apply_target_matches(gold_frame, corpus, map, /*use_gold=*/true);
        report.target_gold = target_block(gold_frame);
    }
    if (options.mode != TargetMetricMode::gold) {
        EvaluationFrame pred_frame = frame;
        apply_target_matches(pred_frame, corpus, map, /*use_gold=*/false);
        report.target_predicted = target_block(pred_frame);
    }

    if (any_gold) {
        std::vector<TargetGroupSet> predicted, gold;
        for (const ExampleEval& e : frame.examples) {
            if (!e.gold_targets || !e.predicted_targets) continue;
            predicted.push_back(*e.predicted_targets);
            gold.push_back(*e.gold_targets);
        }
        if (!predicted.empty()) {
            MatchAccuracy acc = match_accuracy(predicted, gold);
            report.exact_match = acc.exact;
            report.partial_match = acc.partial;
            std::map<std::string, std::string> empty_map;
            report.error_analysis = target_error_analysis(
                predicted, gold, options.category_map ? *options.category_map : empty_map);
        }
        if (options.embeddings) {
            KahanSum wmd_sum;
            std::size_t wmd_n = 0;
            for (const ExampleEval& e : frame.examples) {
                if (!e.gold_targets || e.gold_targets->empty()) continue;
                if (!e.predicted_phrases || e.predicted_phrases->empty()) continue;
                wmd_sum.add(word_movers_distance(*e.predicted_phrases,
                                                 set_to_phrases(*e.gold_targets),
                                                 *options.embeddings,
                                                 options.wmd_filter_stopwords));
                ++wmd_n;
            }
            if (wmd_n > 0) {
                report.wmd_mean = wmd_sum.value() / static_cast<double>(wmd_n);
                report.wmd_count = wmd_n;
            }
        }
    }

    report.demographic_breakdown = group_breakdown(frame, BreakdownAxis::annotator_demographic,
                                                   options.breakdown_min_count);
    report.target_group_breakdown = group_breakdown(frame, BreakdownAxis::predicted_target_group,
                                                    options.breakdown_min_count);
    report.set_size_breakdown =
        group_breakdown(frame, BreakdownAxis::target_set_size, options.breakdown_min_count);
    return report;
}

MetricsReport evaluate(const AnnotationCorpus& test_corpus, const RatingModel& rating_model,
                       const TargetModel& target_model, const NormalizationMap& map,
                       const EvaluateOptions& options) {
    if (test_corpus.examples.empty()) throw ValidationError("evaluation corpus has no examples");
    EvaluationFrame frame =
        build_evaluation_frame(test_corpus, rating_model, target_model, map, options);
    return compute_report(std::move(frame), test_corpus, map, options);
}

std::vector<DisagreementFlag> flag_disagreement(const std::vector<TargetGroupReport>& reports,
                                                double gap_threshold, double variance_threshold) {
    if (gap_threshold <= 0 || variance_threshold <= 0)
        throw ValidationError("flag thresholds must be positive");
    std::vector<DisagreementFlag> flags;
    for (const TargetGroupReport& report : reports) {
        if (!report.target_mean) continue;
        double gap = std::abs(*report.target_mean - report.overall_mean);
        if (gap >= gap_threshold) {
            DisagreementFlag flag;
            flag.example_id = report.example_id;
            flag.target_mean = *report.target_mean;
            flag.overall_mean = report.overall_mean;
            flag.gap = gap;
            flag.variance_among_targets = report.target_variance;
            flag.reason = DisagreementFlag::Reason::target_majority_gap;
            flags.push_back(std::move(flag));
        }
        if (report.target_variance && *report.target_variance >= variance_threshold) {
            DisagreementFlag flag;
            flag.example_id = report.example_id;
            flag.target_mean = *report.target_mean;
            flag.overall_mean = report.overall_mean;
            flag.gap = gap;
            flag.variance_among_targets = report.target_variance;
            flag.reason = DisagreementFlag::Reason::high_target_variance;
            flags.push_back(std::move(flag));
        }
    }
    std::stable_sort(flags.begin(), flags.end(),
                     [](const DisagreementFlag& a, const DisagreementFlag& b) {
                         if (a.gap != b.gap) return a.gap > b.gap;
                         return a.example_id < b.example_id;
                     });
    return flags;
}

void write_report_files(const MetricsReport& report, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "report.txt", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report.txt in " + dir);
        out << report.to_kv_text();
    }
    {
        std::ofstream out(fs::path(dir) / "report.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report.json in " + dir);
        out << report.to_json();
    }
}

std::string flags_to_text(const std::vector<DisagreementFlag>& flags) {
    std::string out =
        "example_id\treason\tgap\ttarget_mean\toverall_mean\ttarget_variance\n";
    for (const DisagreementFlag& flag : flags) {
        out += flag.example_id;
        out += '\t';
        out += flag.reason == DisagreementFlag::Reason::target_majority_gap
                   ? "target-majority-gap"
                   : "high-target-variance";
        out += '\t';
        out += format_double(flag.gap);
        out += '\t';
        out += format_double(flag.target_mean);
        out += '\t';
        out += format_double(flag.overall_mean);
        out += '\t';
        out += flag.variance_among_targets ? format_double(*flag.variance_among_targets)
                                           : "absent";
        out += '\n';
    }
    return out;
}

}  // namespace annolens
