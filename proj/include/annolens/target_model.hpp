#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "annolens/corpus.hpp"
#include "annolens/rating_model.hpp"

namespace annolens {

// Ordered free-text list of target-group phrases; the textual form is a
// comma-separated list.
struct TargetPhraseList {
    std::vector<std::string> phrases;

    std::string to_string() const;
    static TargetPhraseList parse(const std::string& comma_separated);
    bool empty() const { return phrases.empty(); }
};

// Maps lowercased word-form variants of a demographic group to one canonical
// name. Canonical names are fixed points; a non-fixed-point canonical is a
// load error. Unknown phrases normalize to themselves (lowercased, trimmed).
class NormalizationMap {
public:
    static NormalizationMap load(const std::string& path);  // two-column TSV
    void save(const std::string& path) const;

    // Adds variant -> canonical, inserting the canonical self-mapping.
    void add(const std::string& variant, const std::string& canonical);

    // Lowercase + trim + lookup; falls back to the lowercased phrase itself.
    // When mapped is non-null it is set to whether the phrase had an entry.
    std::string normalize_phrase(const std::string& phrase, bool* mapped = nullptr) const;

    const std::set<std::string>& canonical_names() const { return canonical_; }
    bool is_canonical(const std::string& name) const { return canonical_.count(name) > 0; }
    std::size_t size() const { return entries_.size(); }

private:
    void check_fixed_points() const;

    std::map<std::string, std::string> entries_;
    std::set<std::string> canonical_;
};

// Standardizes a phrase list into a canonical group set. Unmapped phrases are
// kept verbatim (lowercased) and reported through the diagnostics channel.
TargetGroupSet normalize_groups(const TargetPhraseList& phrases, const NormalizationMap& map,
                                std::vector<std::string>* unmapped_diagnostics = nullptr);

// One-vs-rest logistic taggers over hashed text features; the vocabulary is
// the canonical name set of the normalization map used at training time.
struct GroupClassifier {
    std::string group;
    Eigen::VectorXd weights;
    double bias = 0.0;
};

struct TargetModel {
    std::vector<GroupClassifier> classifiers;  // sorted by group name
    double threshold = 0.5;
    TrainConfig config;

    std::vector<std::string> vocabulary() const;
};

// Trains per-group logistic classifiers with seeded SGD on log loss. Every
// gold label must be a canonical name of the map; examples without
// gold_target_groups are rejected, empty gold sets are allowed.
TargetModel train_target_model(const std::vector<TextExample>& labeled,
                               const NormalizationMap& map, const TrainConfig& config,
                               double threshold = 0.5);

// Per-group probabilities for a text.
std::map<std::string, double> target_probabilities(const TargetModel& model,
                                                   const std::string& text);

// Emits every group whose probability reaches the threshold, ordered by
// descending probability (alphabetical among ties), as a free-text list.
TargetPhraseList predict_target_phrases(const TargetModel& model, const std::string& text);

// The canonical group tags an annotator's demographic fields map to: race,
// gender, sexual orientation, trans status, religion, age band, and political
// leaning, each passed through the normalization map.
std::set<std::string> annotator_group_tags(const AnnotatorProfile& annotator,
                                           const NormalizationMap& map);

// Returns the annotators belonging to any group in the set (union semantics):
// those with a demographic field whose canonical form is in the group set.
std::vector<const AnnotatorProfile*> match_annotators(
    const TargetGroupSet& groups, const std::vector<AnnotatorProfile>& annotators,
    const NormalizationMap& map);

// Versioned little-endian checkpoint: vocabulary, threshold, weights.
void save_target_model(const TargetModel& model, const std::string& path);
TargetModel load_target_model(const std::string& path);

}  // namespace annolens
