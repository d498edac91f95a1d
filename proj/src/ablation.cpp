#include "annolens/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "annolens/metrics.hpp"

namespace annolens {
namespace {

using ordered_json = nlohmann::ordered_json;

// Frame with true and predicted ratings only, enough for the three MAEs.
EvaluationFrame prediction_frame(const RatingModel& model, const AnnotationCorpus& val,
                                 const TemplateGrammar& grammar) {
    CorpusIndex index(val);
    EvaluationFrame frame;
    for (const TextExample& example : val.examples) {
        ExampleEval eval;
        eval.example_id = example.example_id;
        std::vector<double> truth, pred;
        for (const AnnotationRecord* record : index.records_of(example.example_id)) {
            const AnnotatorProfile* annotator = index.annotator(record->annotator_key);
            ModelInput input = assemble_input(*annotator, example, val.schema, grammar,
                                              model.mask, model.mask.id);
            eval.annotator_keys.push_back(record->annotator_key);
            truth.push_back(static_cast<double>(record->rating));
            pred.push_back(predict_value(model, input));
        }
        if (truth.empty()) continue;
        eval.truth = Eigen::Map<Eigen::VectorXd>(truth.data(),
                                                 static_cast<Eigen::Index>(truth.size()));
        eval.pred =
            Eigen::Map<Eigen::VectorXd>(pred.data(), static_cast<Eigen::Index>(pred.size()));
        frame.examples.push_back(std::move(eval));
    }
    return frame;
}

const std::vector<std::string>& selectable_features() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const std::string& n : FeatureMask::feature_names())
            if (n != "text") out.push_back(n);
        return out;
    }();
    return names;
}

void check_feature(const std::string& feature) {
    const auto& names = selectable_features();
    if (std::find(names.begin(), names.end(), feature) == names.end())
        throw ValidationError("unknown ablation feature '" + feature + "'");
}

}  // namespace

AblationResult evaluate_mask(const std::string& label, const FeatureMask& mask,
                             const AnnotationCorpus& train, const AnnotationCorpus& val,
                             const TrainConfig& config, const TemplateGrammar& grammar) {
    RatingModel model = train_rating_model(train, mask, config, grammar);
    EvaluationFrame frame = prediction_frame(model, val, grammar);
    if (frame.examples.empty()) throw ValidationError("validation split has no examples");

    AblationResult result;
    result.label = label;
    result.mask = mask;
    result.individual_mae = individual_mae(frame);
    result.aggregate_mae = aggregate_mae(frame);
    bool any_multi = false;
    for (const ExampleEval& e : frame.examples) any_multi |= e.truth.size() >= 2;
    if (any_multi) result.variance_mae = variance_mae(frame);
    return result;
}

std::vector<AblationResult> single_feature_sweep(const AnnotationCorpus& train,
                                                 const AnnotationCorpus& val,
                                                 const std::vector<std::string>& features,
                                                 const TrainConfig& config,
                                                 const TemplateGrammar& grammar) {
    for (const std::string& feature : features) check_feature(feature);
    std::vector<AblationResult> rows;
    rows.reserve(features.size());
    for (const std::string& feature : features) {
        FeatureMask mask = FeatureMask::text_only();
        mask.set(feature, true);
        rows.push_back(evaluate_mask(feature, mask, train, val, config, grammar));
    }
    std::sort(rows.begin(), rows.end(), [](const AblationResult& a, const AblationResult& b) {
        if (a.individual_mae != b.individual_mae) return a.individual_mae < b.individual_mae;
        return a.label < b.label;
    });
    return rows;
}

std::vector<SelectionStep> forward_selection(const AnnotationCorpus& train,
                                             const AnnotationCorpus& val,
                                             const std::vector<std::string>& candidates,
                                             std::size_t k, double epsilon,
                                             const TrainConfig& config,
                                             const TemplateGrammar& grammar) {
    if (epsilon < 0) throw ValidationError("epsilon must be non-negative");
    if (k > candidates.size())
        throw ValidationError("k exceeds the number of candidate features");
    std::vector<std::string> remaining = candidates;
    std::sort(remaining.begin(), remaining.end());
    for (const std::string& feature : remaining) check_feature(feature);

    FeatureMask current = FeatureMask::text_only();
    double current_mae =
        evaluate_mask("text", current, train, val, config, grammar).individual_mae;

    std::vector<SelectionStep> selected;
    while (selected.size() < k && !remaining.empty()) {
        std::string best_feature;
        double best_mae = std::numeric_limits<double>::infinity();
        for (const std::string& feature : remaining) {  // alphabetical; strict < keeps ties stable
            FeatureMask mask = current;
            mask.set(feature, true);
            double mae = evaluate_mask(feature, mask, train, val, config, grammar).individual_mae;
            if (mae < best_mae) {
                best_mae = mae;
                best_feature = feature;
            }
        }
        if (current_mae - best_mae < epsilon) break;
        current.set(best_feature, true);
        current_mae = best_mae;
        selected.push_back({best_feature, best_mae});
        remaining.erase(std::find(remaining.begin(), remaining.end(), best_feature));
    }
    return selected;
}

std::vector<AblationResult> masked_comparison(
    const AnnotationCorpus& train, const AnnotationCorpus& val,
    const std::vector<std::pair<std::string, FeatureMask>>& masks, const TrainConfig& config,
    const TemplateGrammar& grammar) {
    std::vector<AblationResult> rows;
    rows.reserve(masks.size());
    for (const auto& [label, mask] : masks)
        rows.push_back(evaluate_mask(label, mask, train, val, config, grammar));
    return rows;
}

std::string ablation_table_text(const std::vector<AblationResult>& rows) {
    std::size_t label_width = 7;
    for (const AblationResult& row : rows) label_width = std::max(label_width, row.label.size());
    char buf[64];
    std::string out;
    auto pad = [&](const std::string& s, std::size_t width) {
        std::string padded = s;
        padded.resize(width, ' ');
        return padded;
    };
    out += pad("feature", label_width) + "  individual_mae  aggregate_mae  variance_mae\n";
    for (const AblationResult& row : rows) {
        out += pad(row.label, label_width);
        std::snprintf(buf, sizeof(buf), "  %14.6f  %13.6f", row.individual_mae,
                      row.aggregate_mae);
        out += buf;
        if (row.variance_mae) {
            std::snprintf(buf, sizeof(buf), "  %12.6f", *row.variance_mae);
            out += buf;
        } else {
            out += "        absent";
        }
        out += '\n';
    }
    return out;
}

std::string ablation_table_json(const std::vector<AblationResult>& rows) {
    ordered_json arr = ordered_json::array();
    for (const AblationResult& row : rows) {
        ordered_json j;
        j["label"] = row.label;
        j["mask"] = row.mask.to_string();
        j["individual_mae"] = row.individual_mae;
        j["aggregate_mae"] = row.aggregate_mae;
        j["variance_mae"] =
            row.variance_mae ? ordered_json(*row.variance_mae) : ordered_json(nullptr);
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

}  // namespace annolens
