#include "annolens/templating.hpp"

#include <fstream>
#include <sstream>

namespace annolens {
namespace {

// Kept byte-identical to data/template_grammar.txt (checked by a unit test).
const char* const kBuiltinGrammar =
    "# Template grammar: frozen clause wording and sentence scaffolds.\n"
    "# Lines are tab-separated:\n"
    "#   template <name> <text>\n"
    "#   clause <field> <value> <text>     (value \"*\" matches any, {value} substituted)\n"
    "template\tid_prefix\treader {id}:\n"
    "template\tsurvey_content\tThe reader uses {list}.\n"
    "template\tsurvey_content_empty\tThe reader uses no online content sources.\n"
    "template\tsurvey_opinions\tThe reader {list}.\n"
    "template\tdemographic_main\tThe reader is {subject}.\n"
    "template\tdemographic_identity\tThe reader is {orientation} and {trans}.\n"
    "template\tsubject_placeholder\tsomeone\n"
    "clause\tage_band\t*\t{value} year old\n"
    "clause\teducation\t*\thas {value}\n"
    "clause\teducation\tprefer not to say\tprefers not to say their education level\n"
    "clause\tpolitical_leaning\t*\tis politically {value}\n"
    "clause\tpolitical_leaning\tprefer not to say\tprefers not to say their political leaning\n"
    "clause\tis_parent\tyes\tis a parent\n"
    "clause\tis_parent\tno\tis not a parent\n"
    "clause\treligion_importance\t*\tthinks religion is {value}\n"
    "clause\treligion_importance\tprefer not to say\tprefers not to say how important religion is\n"
    "clause\tseen_toxic\tyes\thas seen toxic comments\n"
    "clause\tseen_toxic\tno\thas not seen toxic comments\n"
    "clause\tpersonally_targeted\tyes\thas been personally targeted by toxic comments\n"
    "clause\tpersonally_targeted\tno\thas not been personally targeted by toxic comments\n"
    "clause\ttech_impact\t*\tthinks technology has a {value} impact on people's lives\n"
    "clause\ttoxic_problem\t*\tthinks toxic comments are {value} a problem\n";

std::string substitute(std::string text, const std::string& placeholder,
                       const std::string& value) {
    std::size_t pos;
    while ((pos = text.find(placeholder)) != std::string::npos)
        text.replace(pos, placeholder.size(), value);
    return text;
}

}  // namespace

const std::string& TemplateGrammar::builtin_text() {
    static const std::string text = kBuiltinGrammar;
    return text;
}

const TemplateGrammar& TemplateGrammar::builtin() {
    static const TemplateGrammar g = parse(kBuiltinGrammar, "<builtin>");
    return g;
}

TemplateGrammar TemplateGrammar::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open grammar file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

TemplateGrammar TemplateGrammar::parse(const std::string& text, const std::string& origin) {
    TemplateGrammar g;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::string where = origin + ":" + std::to_string(line_no);
        std::vector<std::string> parts = split(line, '\t');
        if (parts[0] == "template" && parts.size() == 3) {
            g.templates_[parts[1]] = parts[2];
        } else if (parts[0] == "clause" && parts.size() == 4) {
            if (parts[2] == "*")
                g.wildcard_[parts[1]] = parts[3];
            else
                g.exact_[{parts[1], parts[2]}] = parts[3];
        } else {
            throw ValidationError(where + ": malformed grammar line");
        }
    }
    for (const char* required :
         {"id_prefix", "survey_content", "survey_content_empty", "survey_opinions",
          "demographic_main", "demographic_identity", "subject_placeholder"})
        g.tmpl(required);
    return g;
}

std::string TemplateGrammar::clause(const std::string& field, const std::string& value) const {
    auto exact = exact_.find({field, value});
    if (exact != exact_.end()) return exact->second;
    auto wild = wildcard_.find(field);
    if (wild != wildcard_.end()) return substitute(wild->second, "{value}", value);
    throw ValidationError("grammar has no clause for field '" + field + "' value '" + value + "'");
}

const std::string& TemplateGrammar::tmpl(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end())
        throw ValidationError("grammar is missing template '" + name + "'");
    return it->second;
}

std::string render_survey_sentence(const SurveyResponse& survey, const DatasetSchema& schema,
                                   const TemplateGrammar& grammar, const FeatureMask& mask) {
    std::vector<std::string> sentences;

    if (mask.content_types) {
        // content types render in schema order even if the struct was hand-built
        const DatasetSchema::Field& ct = schema.require(fields::kContentTypes);
        std::vector<std::string> listed;
        for (const std::string& v : ct.values)
            for (const std::string& have : survey.content_types)
                if (have == v) listed.push_back(v);
        if (listed.empty())
            sentences.push_back(grammar.tmpl("survey_content_empty"));
        else
            sentences.push_back(
                substitute(grammar.tmpl("survey_content"), "{list}", oxford_join(listed)));
    }

    std::vector<std::string> opinions;
    if (mask.seen_toxic)
        opinions.push_back(grammar.clause("seen_toxic", survey.seen_toxic ? "yes" : "no"));
    if (mask.personally_targeted)
        opinions.push_back(
            grammar.clause("personally_targeted", survey.personally_targeted ? "yes" : "no"));
    if (mask.tech_impact) opinions.push_back(grammar.clause("tech_impact", survey.tech_impact));
    if (mask.toxic_problem)
        opinions.push_back(grammar.clause("toxic_problem", survey.toxic_problem));
    if (!opinions.empty())
        sentences.push_back(
            substitute(grammar.tmpl("survey_opinions"), "{list}", oxford_join(opinions)));

    std::string out;
    for (std::size_t i = 0; i < sentences.size(); ++i) out += (i ? " " : "") + sentences[i];
    return out;
}

std::string render_demographic_sentence(const DemographicProfile& demo,
                                        const TemplateGrammar& grammar, const FeatureMask& mask) {
    std::vector<std::string> sentences;

    std::vector<std::string> adjectives;
    if (mask.age) adjectives.push_back(grammar.clause("age_band", demo.age_band));
    if (mask.race) adjectives.push_back(demo.race);
    if (mask.gender) adjectives.push_back(demo.gender);

    std::vector<std::string> clauses;
    if (mask.education) clauses.push_back(grammar.clause("education", demo.education));
    if (mask.political_leaning)
        clauses.push_back(grammar.clause("political_leaning", demo.political_leaning));
    if (mask.parenthood) clauses.push_back(grammar.clause("is_parent", demo.is_parent ? "yes" : "no"));
    if (mask.religion_importance)
        clauses.push_back(grammar.clause("religion_importance", demo.religion_importance));

    std::string subject;
    if (!adjectives.empty()) {
        subject = "a";
        for (const std::string& adj : adjectives) subject += " " + adj;
    } else if (!clauses.empty()) {
        subject = grammar.tmpl("subject_placeholder");
    }
    if (!clauses.empty()) subject += " who " + oxford_join(clauses);
    if (!subject.empty())
        sentences.push_back(substitute(grammar.tmpl("demographic_main"), "{subject}", subject));

    if (mask.lgbt_status) {
        std::string identity = grammar.tmpl("demographic_identity");
        identity = substitute(identity, "{orientation}", demo.sexual_orientation);
        identity = substitute(identity, "{trans}", demo.trans_status);
        sentences.push_back(identity);
    }

    std::string out;
    for (std::size_t i = 0; i < sentences.size(); ++i) out += (i ? " " : "") + sentences[i];
    return out;
}

std::string ModelInput::rendered() const {
    std::vector<std::string> segments;
    if (!survey_sentence.empty()) segments.push_back(survey_sentence);
    if (!demographic_sentence.empty()) segments.push_back(demographic_sentence);
    if (!content.empty()) segments.push_back(content);
    std::string out = id_prefix;
    if (!out.empty() && !segments.empty()) out += " ";
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i) out += " " + separator + " ";
        out += segments[i];
    }
    return out;
}

ModelInput assemble_input(const AnnotatorProfile& annotator, const TextExample& example,
                          const DatasetSchema& schema, const TemplateGrammar& grammar,
                          const FeatureMask& mask, bool include_id) {
    ModelInput input;
    input.example_id = example.example_id;
    input.annotator_key = annotator.annotator_key;

    if (include_id) {
        if (!annotator.profile_id)
            throw ValidationError("annotator '" + annotator.annotator_key +
                                  "' has no assigned profile_id; run assign_profile_ids first");
        input.profile_id = annotator.profile_id;
        input.id_prefix = substitute(grammar.tmpl("id_prefix"), "{id}",
                                     std::to_string(*annotator.profile_id));
    }

    input.survey_sentence = render_survey_sentence(annotator.survey, schema, grammar, mask);
    input.demographic_sentence = render_demographic_sentence(annotator.demographics, grammar, mask);
    if (mask.text) input.content = example.text;

    const DemographicProfile& d = annotator.demographics;
    const SurveyResponse& s = annotator.survey;
    if (mask.gender) input.categorical_values.emplace_back("gender", d.gender);
    if (mask.race) input.categorical_values.emplace_back("race", d.race);
    if (mask.lgbt_status) {
        input.categorical_values.emplace_back("sexual_orientation", d.sexual_orientation);
        input.categorical_values.emplace_back("trans_status", d.trans_status);
    }
    if (mask.education) input.categorical_values.emplace_back("education", d.education);
    if (mask.age) input.categorical_values.emplace_back("age_band", d.age_band);
    if (mask.political_leaning)
        input.categorical_values.emplace_back("political_leaning", d.political_leaning);
    if (mask.religion_importance)
        input.categorical_values.emplace_back("religion_importance", d.religion_importance);
    if (mask.parenthood)
        input.categorical_values.emplace_back("is_parent", d.is_parent ? "yes" : "no");
    if (mask.tech_impact) input.categorical_values.emplace_back("tech_impact", s.tech_impact);
    if (mask.seen_toxic)
        input.categorical_values.emplace_back("seen_toxic", s.seen_toxic ? "yes" : "no");
    if (mask.personally_targeted)
        input.categorical_values.emplace_back("personally_targeted",
                                              s.personally_targeted ? "yes" : "no");
    if (mask.toxic_problem)
        input.categorical_values.emplace_back("toxic_problem", s.toxic_problem);
    if (mask.content_types) input.content_type_values = s.content_types;

    for (const std::string* segment :
         {&input.survey_sentence, &input.demographic_sentence, &input.content})
        if (segment->find(input.separator) != std::string::npos)
            throw ValidationError("input segment contains the separator token '" +
                                  input.separator + "' (example '" + example.example_id + "')");
    return input;
}

}  // namespace annolens
