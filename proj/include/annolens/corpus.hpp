#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "annolens/common.hpp"

namespace annolens {

// Canonical demographic group names a text may harm. Members are fixed
// points of the active NormalizationMap.
struct TargetGroupSet {
    std::set<std::string> groups;

    bool operator==(const TargetGroupSet&) const = default;
    bool empty() const { return groups.empty(); }
    bool contains(const std::string& g) const { return groups.count(g) > 0; }
};

struct DemographicProfile {
    std::string age_band;
    std::string gender;
    std::string race;
    std::string education;
    std::string political_leaning;
    bool is_parent = false;
    std::string religion_importance;
    std::string sexual_orientation;
    std::string trans_status;

    bool operator==(const DemographicProfile&) const = default;
};

struct SurveyResponse {
    std::vector<std::string> content_types;  // kept in schema order
    std::string tech_impact;
    bool seen_toxic = false;
    bool personally_targeted = false;
    std::string toxic_problem;

    bool operator==(const SurveyResponse&) const = default;
};

struct AnnotatorProfile {
    std::string annotator_key;
    std::optional<int> profile_id;  // assigned by assign_profile_ids
    DemographicProfile demographics;
    SurveyResponse survey;
};

struct TextExample {
    std::string example_id;
    std::string text;
    std::optional<TargetGroupSet> gold_target_groups;
};

struct AnnotationRecord {
    std::string annotator_key;
    std::string example_id;
    int rating = 0;  // 0 = not at all offensive .. 4 = very offensive
};

// Closed vocabularies for every categorical field, declared by the dataset.
// Field order and value order are meaningful: value order defines the total
// order of ordered categoricals and the rendering order of content types.
class DatasetSchema {
public:
    enum class FieldKind { categorical, ordered, flag, multi };

    struct Field {
        std::string name;
        FieldKind kind = FieldKind::categorical;
        std::vector<std::string> values;  // empty for flags (yes/no implied)

        bool allows(const std::string& v) const;
        bool operator==(const Field&) const = default;
    };

    static DatasetSchema load(const std::string& path);
    static DatasetSchema parse(const std::string& text, const std::string& origin);
    void save(const std::string& path) const;
    std::string to_text() const;

    const Field* find(const std::string& name) const;
    const Field& require(const std::string& name) const;
    const std::vector<Field>& fields() const { return fields_; }
    void add_field(Field f);

    bool operator==(const DatasetSchema&) const = default;

private:
    std::vector<Field> fields_;
};

// Names of the schema fields every corpus must declare.
namespace fields {
inline constexpr const char* kDemographic[] = {
    "age_band", "gender",   "race",
    "education", "political_leaning", "is_parent",
    "religion_importance", "sexual_orientation", "trans_status"};
inline constexpr const char* kSurveySingle[] = {"tech_impact", "seen_toxic",
                                                "personally_targeted", "toxic_problem"};
inline constexpr const char* kContentTypes = "content_types";
}  // namespace fields

struct AnnotationCorpus {
    DatasetSchema schema;
    std::vector<AnnotatorProfile> annotators;
    std::vector<TextExample> examples;
    std::vector<AnnotationRecord> records;
};

// Read-side lookup tables over an immutable corpus.
class CorpusIndex {
public:
    explicit CorpusIndex(const AnnotationCorpus& corpus);

    const AnnotatorProfile* annotator(const std::string& key) const;
    const TextExample* example(const std::string& id) const;
    const std::vector<const AnnotationRecord*>& records_of(const std::string& example_id) const;

private:
    std::map<std::string, const AnnotatorProfile*> annotators_;
    std::map<std::string, const TextExample*> examples_;
    std::map<std::string, std::vector<const AnnotationRecord*>> by_example_;
    std::vector<const AnnotationRecord*> empty_;
};

struct CorpusPaths {
    std::string annotators;
    std::string examples;
    std::string records;
    std::string schema;
};

// Loads and fully validates a corpus. Throws ValidationError naming the file,
// line number, and offending field or key on any malformed record, vocabulary
// violation, or dangling reference.
AnnotationCorpus load_corpus(const CorpusPaths& paths);

// Directory convention: annotators.txt, examples.txt, records.txt, schema.txt.
AnnotationCorpus load_corpus_dir(const std::string& dir);
void save_corpus_dir(const AnnotationCorpus& corpus, const std::string& dir);

// Re-checks every corpus invariant; throws ValidationError on violation.
void validate_corpus(const AnnotationCorpus& corpus);

// Canonical single-line serialization of an annotator's responses; byte
// identity of this string defines profile identity.
std::string canonical_response_tuple(const AnnotatorProfile& a);

// Assigns profile IDs so that byte-identical (demographics, survey) tuples
// share an ID. IDs follow the lexicographic order of the canonical tuple
// serialization, so assignment is deterministic and idempotent.
AnnotationCorpus assign_profile_ids(AnnotationCorpus corpus);

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct CorpusSplits {
    AnnotationCorpus train;
    AnnotationCorpus val;
    AnnotationCorpus test;
};

// Partitions examples (all records of an example travel together). Validation
// and test sizes are floor(fraction * N) with the remainder going to train.
// Same seed, same corpus -> same partition.
CorpusSplits split_corpus(const AnnotationCorpus& corpus, SplitFractions fractions,
                          std::uint64_t seed);

}  // namespace annolens
