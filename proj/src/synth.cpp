#include "annolens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace annolens {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string>& single_valued_fields() {
    static const std::vector<std::string> names = {
        "age_band", "gender", "race", "education", "political_leaning", "is_parent",
        "religion_importance", "sexual_orientation", "trans_status", "tech_impact",
        "seen_toxic", "personally_targeted", "toxic_problem"};
    return names;
}

std::string padded_id(const char* prefix, int i, int width) {
    std::string digits = std::to_string(i);
    std::string out = prefix;
    for (int k = static_cast<int>(digits.size()); k < width; ++k) out += '0';
    return out + digits;
}

double parse_number(const std::string& s, const std::string& where) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != s.size()) throw ValidationError(where + ": not a number: '" + s + "'");
    return v;
}

std::pair<std::string, std::string> parse_field_value(const std::string& s,
                                                      const std::string& where) {
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
        throw ValidationError(where + ": expected field=value, got '" + s + "'");
    return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

}  // namespace

std::string annotator_field_value(const AnnotatorProfile& a, const std::string& field) {
    const DemographicProfile& d = a.demographics;
    const SurveyResponse& s = a.survey;
    if (field == "age_band") return d.age_band;
    if (field == "gender") return d.gender;
    if (field == "race") return d.race;
    if (field == "education") return d.education;
    if (field == "political_leaning") return d.political_leaning;
    if (field == "is_parent") return d.is_parent ? "yes" : "no";
    if (field == "religion_importance") return d.religion_importance;
    if (field == "sexual_orientation") return d.sexual_orientation;
    if (field == "trans_status") return d.trans_status;
    if (field == "tech_impact") return s.tech_impact;
    if (field == "seen_toxic") return s.seen_toxic ? "yes" : "no";
    if (field == "personally_targeted") return s.personally_targeted ? "yes" : "no";
    if (field == "toxic_problem") return s.toxic_problem;
    throw ValidationError("unknown single-valued field '" + field + "'");
}

std::vector<std::pair<std::string, std::string>> annotator_attribute_pairs(
    const AnnotatorProfile& a) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const char* field : fields::kDemographic)
        out.emplace_back(field, annotator_field_value(a, field));
    return out;
}

void GeneratorConfig::validate() const {
    if (n_annotators < 0 || n_examples < 0)
        throw ValidationError("generator sizes must be non-negative");
    if (n_examples > 0) {
        if (ratings_per_example < 1)
            throw ValidationError("ratings_per_example must be at least 1");
        if (ratings_per_example > n_annotators)
            throw ValidationError("ratings_per_example exceeds the number of annotators");
    }
    if (noise_sd < 0) throw ValidationError("noise_sd must be non-negative");
    if (words_per_text < 1) throw ValidationError("words_per_text must be at least 1");
    if (trigger_rate < 0 || trigger_rate > 1)
        throw ValidationError("trigger_rate must lie in [0, 1]");

    for (const std::string& field : single_valued_fields()) {
        auto it = field_distributions.find(field);
        if (it == field_distributions.end())
            throw ValidationError("generator config missing distribution for field '" + field +
                                  "'");
        double total = 0;
        for (const auto& [value, p] : it->second) {
            if (p < 0) throw ValidationError("negative probability for field '" + field + "'");
            if (value.empty()) throw ValidationError("empty value in field '" + field + "'");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw ValidationError("probabilities for field '" + field + "' sum to " +
                                  std::to_string(total) + ", expected 1");
    }
    for (const auto& [field, values] : field_distributions) {
        const auto& known = single_valued_fields();
        if (std::find(known.begin(), known.end(), field) == known.end())
            throw ValidationError("distribution declared for unknown field '" + field + "'");
        (void)values;
    }
    for (const auto& [type, p] : content_type_probs)
        if (p < 0 || p > 1)
            throw ValidationError("content type probability for '" + type + "' outside [0, 1]");

    bool has_triggers = false;
    for (const auto& [group, words] : group_lexicon) {
        if (words.empty())
            throw ValidationError("group '" + group + "' has an empty trigger lexicon");
        has_triggers = true;
    }
    if (trigger_rate > 0 && n_examples > 0 && !has_triggers)
        throw ValidationError("positive trigger_rate but no group lexicon");
    if (trigger_rate < 1 && n_examples > 0 && filler_words.empty())
        throw ValidationError("trigger_rate below 1 requires filler words");

    for (const auto& [group, pairs] : group_membership) {
        for (const auto& [field, value] : pairs) {
            auto it = field_distributions.find(field);
            if (it == field_distributions.end())
                throw ValidationError("membership for group '" + group +
                                      "' references unknown field '" + field + "'");
            bool found = false;
            for (const auto& [v, p] : it->second) found = found || v == value;
            if (!found)
                throw ValidationError("membership for group '" + group + "' references value '" +
                                      value + "' outside the support of field '" + field + "'");
        }
    }
}

DatasetSchema GeneratorConfig::derive_schema() const {
    DatasetSchema schema;
    auto values_of = [&](const std::string& field) {
        std::vector<std::string> out;
        for (const auto& [value, p] : field_distributions.at(field)) out.push_back(value);
        return out;
    };
    using Kind = DatasetSchema::FieldKind;
    auto add = [&](const std::string& name, Kind kind) {
        DatasetSchema::Field f;
        f.name = name;
        f.kind = kind;
        if (kind != Kind::flag) f.values = values_of(name);
        schema.add_field(std::move(f));
    };
    add("age_band", Kind::categorical);
    add("gender", Kind::categorical);
    add("race", Kind::categorical);
    add("education", Kind::categorical);
    add("political_leaning", Kind::categorical);
    add("is_parent", Kind::flag);
    add("religion_importance", Kind::categorical);
    add("sexual_orientation", Kind::categorical);
    add("trans_status", Kind::categorical);
    {
        DatasetSchema::Field f;
        f.name = fields::kContentTypes;
        f.kind = Kind::multi;
        for (const auto& [type, p] : content_type_probs) f.values.push_back(type);
        if (f.values.empty()) f.values.push_back("none declared");
        schema.add_field(std::move(f));
    }
    add("tech_impact", Kind::ordered);
    add("seen_toxic", Kind::flag);
    add("personally_targeted", Kind::flag);
    add("toxic_problem", Kind::ordered);
    return schema;
}

bool GeneratorConfig::is_member(const AnnotatorProfile& annotator,
                                const std::string& group) const {
    auto it = group_membership.find(group);
    if (it == group_membership.end()) return false;
    for (const auto& [field, value] : it->second)
        if (annotator_field_value(annotator, field) == value) return true;
    return false;
}

std::vector<AnnotatorProfile> generate_population(const GeneratorConfig& config) {
    config.validate();
    std::mt19937_64 rng(derive_seed(config.seed, "population"));

    auto sample_field = [&](const std::string& field) {
        const auto& dist = config.field_distributions.at(field);
        double u = uniform_real(rng);
        double acc = 0;
        for (const auto& [value, p] : dist) {
            acc += p;
            if (u < acc) return value;
        }
        return dist.back().first;  // guard against rounding at u ~ 1
    };

    std::vector<AnnotatorProfile> population;
    population.reserve(static_cast<std::size_t>(config.n_annotators));
    const int width = static_cast<int>(std::to_string(std::max(1, config.n_annotators)).size());
    for (int i = 0; i < config.n_annotators; ++i) {
        AnnotatorProfile a;
        a.annotator_key = padded_id("a", i, width);
        DemographicProfile& d = a.demographics;
        d.age_band = sample_field("age_band");
        d.gender = sample_field("gender");
        d.race = sample_field("race");
        d.education = sample_field("education");
        d.political_leaning = sample_field("political_leaning");
        d.is_parent = sample_field("is_parent") == "yes";
        d.religion_importance = sample_field("religion_importance");
        d.sexual_orientation = sample_field("sexual_orientation");
        d.trans_status = sample_field("trans_status");
        SurveyResponse& s = a.survey;
        for (const auto& [type, p] : config.content_type_probs)
            if (uniform_real(rng) < p) s.content_types.push_back(type);
        s.tech_impact = sample_field("tech_impact");
        s.seen_toxic = sample_field("seen_toxic") == "yes";
        s.personally_targeted = sample_field("personally_targeted") == "yes";
        s.toxic_problem = sample_field("toxic_problem");
        population.push_back(std::move(a));
    }
    return population;
}

SyntheticCorpus generate_corpus(const std::vector<AnnotatorProfile>& population,
                                const GeneratorConfig& config) {
    config.validate();
    if (config.n_examples > 0 && population.empty())
        throw ValidationError("cannot generate examples from an empty population");

    std::mt19937_64 text_rng(derive_seed(config.seed, "texts"));
    std::mt19937_64 assign_rng(derive_seed(config.seed, "assignment"));
    std::mt19937_64 noise_rng(derive_seed(config.seed, "noise"));

    // flattened trigger pool in deterministic (group, declaration) order
    std::vector<std::pair<std::string, std::string>> trigger_pool;  // (word, group)
    for (const auto& [group, words] : config.group_lexicon)
        for (const std::string& w : words) trigger_pool.emplace_back(w, group);

    std::map<std::string, std::vector<std::string>> word_groups;  // word -> groups it triggers
    for (const auto& [word, group] : trigger_pool) word_groups[word].push_back(group);

    SyntheticCorpus out;
    out.corpus.schema = config.derive_schema();
    out.corpus.annotators = population;

    const int width = static_cast<int>(std::to_string(std::max(1, config.n_examples)).size());
    std::vector<std::size_t> indices(population.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

    for (int e = 0; e < config.n_examples; ++e) {
        TextExample example;
        example.example_id = padded_id("e", e, width);

        std::vector<std::string> words;
        TargetGroupSet gold;
        for (int w = 0; w < config.words_per_text; ++w) {
            bool trigger = !trigger_pool.empty() && uniform_real(text_rng) < config.trigger_rate;
            if (trigger) {
                const auto& [word, group] =
                    trigger_pool[uniform_index(text_rng, trigger_pool.size())];
                words.push_back(word);
                (void)group;
            } else {
                words.push_back(
                    config.filler_words[uniform_index(text_rng, config.filler_words.size())]);
            }
        }
        for (const std::string& w : words) {
            auto it = word_groups.find(w);
            if (it != word_groups.end())
                for (const std::string& g : it->second) gold.groups.insert(g);
        }
        std::string text;
        for (std::size_t i = 0; i < words.size(); ++i) text += (i ? " " : "") + words[i];
        example.text = text;
        example.gold_target_groups = gold;

        // choose raters uniformly without replacement
        for (int r = 0; r < config.ratings_per_example; ++r) {
            std::size_t j = r + static_cast<std::size_t>(
                                    uniform_index(assign_rng, indices.size() - r));
            std::swap(indices[r], indices[j]);
        }

        double text_offense = 0.0;
        for (const std::string& w : words) {
            auto it = config.base_offense.find(w);
            if (it != config.base_offense.end()) text_offense += it->second;
        }

        for (int r = 0; r < config.ratings_per_example; ++r) {
            const AnnotatorProfile& annotator = population[indices[r]];
            double latent = text_offense;
            for (const std::string& field : single_valued_fields()) {
                auto it = config.feature_effects.find({field, annotator_field_value(annotator, field)});
                if (it != config.feature_effects.end()) latent += it->second;
            }
            for (const std::string& type : annotator.survey.content_types) {
                auto it = config.feature_effects.find({std::string(fields::kContentTypes), type});
                if (it != config.feature_effects.end()) latent += it->second;
            }
            bool member = false;
            for (const std::string& g : gold.groups) member = member || config.is_member(annotator, g);
            if (member) latent += config.target_affinity_delta;
            if (config.noise_sd > 0) latent += config.noise_sd * gaussian(noise_rng);

            latent = std::clamp(latent, 0.0, 4.0);
            AnnotationRecord record;
            record.annotator_key = annotator.annotator_key;
            record.example_id = example.example_id;
            record.rating = static_cast<int>(std::llround(latent));
            out.corpus.records.push_back(record);
            out.latent[{annotator.annotator_key, example.example_id}] = latent;
        }
        out.corpus.examples.push_back(std::move(example));
    }

    validate_corpus(out.corpus);
    return out;
}

void save_synthetic_corpus(const SyntheticCorpus& synth, const std::string& dir) {
    save_corpus_dir(synth.corpus, dir);
    fs::path path = fs::path(dir) / "latents.txt";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    char buf[40];
    for (const auto& [key, latent] : synth.latent) {
        std::snprintf(buf, sizeof(buf), "%.12g", latent);
        out << key.first << '\t' << key.second << '\t' << buf << '\n';
    }
}

GeneratorConfig GeneratorConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open generator config: " + path);
    GeneratorConfig config;
    config.field_distributions.clear();

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::string where = path + ":" + std::to_string(line_no);

        // keys and values are separated by the last " = " on the line
        std::size_t sep = t.rfind(" = ");
        if (sep == std::string::npos)
            throw ValidationError(where + ": expected 'key = value'");
        std::string key = trim(t.substr(0, sep));
        std::string value = trim(t.substr(sep + 3));
        if (key.empty() || value.empty())
            throw ValidationError(where + ": empty key or value");

        std::size_t space = key.find(' ');
        std::string directive = space == std::string::npos ? key : key.substr(0, space);
        std::string arg = space == std::string::npos ? "" : trim(key.substr(space + 1));

        if (directive == "n_annotators") config.n_annotators = static_cast<int>(parse_number(value, where));
        else if (directive == "n_examples") config.n_examples = static_cast<int>(parse_number(value, where));
        else if (directive == "ratings_per_example") config.ratings_per_example = static_cast<int>(parse_number(value, where));
        else if (directive == "noise_sd") config.noise_sd = parse_number(value, where);
        else if (directive == "seed") config.seed = static_cast<std::uint64_t>(parse_number(value, where));
        else if (directive == "words_per_text") config.words_per_text = static_cast<int>(parse_number(value, where));
        else if (directive == "trigger_rate") config.trigger_rate = parse_number(value, where);
        else if (directive == "target_affinity_delta") config.target_affinity_delta = parse_number(value, where);
        else if (directive == "filler_words") {
            for (const std::string& w : split(value, '|')) {
                std::string word = trim(w);
                if (!word.empty()) config.filler_words.push_back(word);
            }
        } else if (directive == "distribution") {
            if (arg.empty()) throw ValidationError(where + ": distribution needs a field name");
            std::vector<std::pair<std::string, double>> dist;
            for (const std::string& item : split(value, '|')) {
                std::string entry = trim(item);
                std::size_t colon = entry.find_last_of(':');
                if (colon == std::string::npos)
                    throw ValidationError(where + ": expected value:probability, got '" + entry + "'");
                dist.emplace_back(trim(entry.substr(0, colon)),
                                  parse_number(trim(entry.substr(colon + 1)), where));
            }
            config.field_distributions[arg] = std::move(dist);
        } else if (directive == "content_type") {
            if (arg.empty()) throw ValidationError(where + ": content_type needs a type name");
            config.content_type_probs[arg] = parse_number(value, where);
        } else if (directive == "lexicon") {
            if (arg.empty()) throw ValidationError(where + ": lexicon needs a group name");
            std::vector<std::string> words;
            for (const std::string& w : split(value, '|')) {
                std::string word = trim(w);
                if (!word.empty()) words.push_back(word);
            }
            config.group_lexicon[arg] = std::move(words);
        } else if (directive == "offense") {
            if (arg.empty()) throw ValidationError(where + ": offense needs a trigger word");
            config.base_offense[arg] = parse_number(value, where);
        } else if (directive == "effect") {
            auto [field, field_value] = parse_field_value(arg, where);
            config.feature_effects[{field, field_value}] = parse_number(value, where);
        } else if (directive == "member") {
            if (arg.empty()) throw ValidationError(where + ": member needs a group name");
            for (const std::string& item : split(value, '|'))
                config.group_membership[arg].push_back(parse_field_value(trim(item), where));
        } else {
            throw ValidationError(where + ": unknown directive '" + directive + "'");
        }
    }
    config.validate();
    return config;
}

void GeneratorConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write generator config: " + path);
    char buf[40];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);  // exact double round-trip
        return std::string(buf);
    };
    out << "n_annotators = " << n_annotators << "\n";
    out << "n_examples = " << n_examples << "\n";
    out << "ratings_per_example = " << ratings_per_example << "\n";
    out << "noise_sd = " << num(noise_sd) << "\n";
    out << "seed = " << seed << "\n";
    out << "words_per_text = " << words_per_text << "\n";
    out << "trigger_rate = " << num(trigger_rate) << "\n";
    out << "target_affinity_delta = " << num(target_affinity_delta) << "\n";
    if (!filler_words.empty()) {
        out << "filler_words =";
        for (std::size_t i = 0; i < filler_words.size(); ++i)
            out << (i ? " | " : " ") << filler_words[i];
        out << "\n";
    }
    for (const auto& [field, dist] : field_distributions) {
        out << "distribution " << field << " =";
        for (std::size_t i = 0; i < dist.size(); ++i)
            out << (i ? " | " : " ") << dist[i].first << ":" << num(dist[i].second);
        out << "\n";
    }
    for (const auto& [type, p] : content_type_probs)
        out << "content_type " << type << " = " << num(p) << "\n";
    for (const auto& [group, words] : group_lexicon) {
        out << "lexicon " << group << " =";
        for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " | " : " ") << words[i];
        out << "\n";
    }
    for (const auto& [word, offense] : base_offense)
        out << "offense " << word << " = " << num(offense) << "\n";
    for (const auto& [key, effect] : feature_effects)
        out << "effect " << key.first << "=" << key.second << " = " << num(effect) << "\n";
    for (const auto& [group, pairs] : group_membership) {
        out << "member " << group << " =";
        for (std::size_t i = 0; i < pairs.size(); ++i)
            out << (i ? " | " : " ") << pairs[i].first << "=" << pairs[i].second;
        out << "\n";
    }
}

}  // namespace annolens
