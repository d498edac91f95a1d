#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "annolens/corpus.hpp"
#include "annolens/feature_mask.hpp"

namespace annolens {

// Clause wording and sentence scaffolds for rendering annotator responses as
// English. The builtin grammar is byte-identical to data/template_grammar.txt;
// an alternative file can be supplied via the --template-grammar CLI flag.
class TemplateGrammar {
public:
    static const TemplateGrammar& builtin();
    static TemplateGrammar load(const std::string& path);
    static TemplateGrammar parse(const std::string& text, const std::string& origin);

    // Exact (field, value) entry first, then the field's "*" pattern with
    // {value} substituted. Throws ValidationError if neither exists.
    std::string clause(const std::string& field, const std::string& value) const;
    const std::string& tmpl(const std::string& name) const;

    static const std::string& builtin_text();  // source text of the builtin grammar

private:
    std::map<std::pair<std::string, std::string>, std::string> exact_;
    std::map<std::string, std::string> wildcard_;
    std::map<std::string, std::string> templates_;
};

// The assembled model input. The rendered form is
//   [id_prefix ]survey [SEP] demographics [SEP] content
// with segments omitted when the mask disables all of their features. The
// structured fields carry the mask-filtered annotator responses for the
// featurizer, which must not re-parse the rendered sentences.
struct ModelInput {
    std::string example_id;
    std::string annotator_key;

    std::string id_prefix;  // "reader <profile_id>:" or empty
    std::string survey_sentence;
    std::string demographic_sentence;
    std::string content;
    std::string separator = "[SEP]";

    std::optional<int> profile_id;
    std::vector<std::pair<std::string, std::string>> categorical_values;  // (field, value)
    std::vector<std::string> content_type_values;

    std::string rendered() const;
};

// Renders the survey sentence pair: content sources first, then the four
// opinion clauses in fixed order. Content types are listed in schema order
// with Oxford-comma joining.
std::string render_survey_sentence(const SurveyResponse& survey, const DatasetSchema& schema,
                                   const TemplateGrammar& grammar,
                                   const FeatureMask& mask = FeatureMask::all_features());

// Renders the demographic sentence pair: age/race/gender adjectives with the
// education/politics/parenthood/religion clause list, then the
// orientation/trans-status sentence.
std::string render_demographic_sentence(const DemographicProfile& demo,
                                        const TemplateGrammar& grammar,
                                        const FeatureMask& mask = FeatureMask::all_features());

// Assembles the full model input for one (annotator, example) pair under the
// given mask. Throws ValidationError if include_id is set but no profile_id
// has been assigned, or if any segment contains the separator token.
ModelInput assemble_input(const AnnotatorProfile& annotator, const TextExample& example,
                          const DatasetSchema& schema, const TemplateGrammar& grammar,
                          const FeatureMask& mask, bool include_id);

}  // namespace annolens
