#pragma once

#include <array>
#include <string>
#include <vector>

#include "annolens/common.hpp"

namespace annolens {

// Selects which feature groups a model may see. "text" is the example text,
// "id" the assigned profile ID, the rest are annotator fields; lgbt_status
// gates sexual orientation and trans status together.
struct FeatureMask {
    bool text = false;
    bool id = false;
    bool gender = false;
    bool race = false;
    bool lgbt_status = false;
    bool education = false;
    bool age = false;
    bool political_leaning = false;
    bool religion_importance = false;
    bool parenthood = false;
    bool tech_impact = false;
    bool content_types = false;
    bool seen_toxic = false;
    bool personally_targeted = false;
    bool toxic_problem = false;

    bool operator==(const FeatureMask&) const = default;

    static const std::vector<std::string>& feature_names() {
        static const std::vector<std::string> names = {
            "text", "id", "gender", "race", "lgbt_status", "education", "age",
            "political_leaning", "religion_importance", "parenthood", "tech_impact",
            "content_types", "seen_toxic", "personally_targeted", "toxic_problem"};
        return names;
    }

    bool get(const std::string& name) const { return *field_of(name); }
    void set(const std::string& name, bool value) { *const_cast<bool*>(field_of(name)) = value; }

    bool any() const {
        for (const std::string& n : feature_names())
            if (get(n)) return true;
        return false;
    }

    static FeatureMask text_only() {
        FeatureMask m;
        m.text = true;
        return m;
    }

    static FeatureMask all_features() {
        FeatureMask m;
        for (const std::string& n : feature_names()) m.set(n, true);
        return m;
    }

    static FeatureMask demographics_survey() {
        FeatureMask m = all_features();
        m.id = false;
        return m;
    }

    // Mask specs are '+'-separated tokens: feature names plus the shorthands
    // "demographics", "survey", and "all" (everything except id).
    static FeatureMask parse(const std::string& spec) {
        FeatureMask m;
        for (const std::string& raw : split(spec, '+')) {
            std::string token = trim(raw);
            if (token.empty()) continue;
            if (token == "all") {
                FeatureMask f = demographics_survey();
                for (const std::string& n : feature_names())
                    if (f.get(n)) m.set(n, true);
            } else if (token == "demographics") {
                for (const char* n : {"gender", "race", "lgbt_status", "education", "age",
                                      "political_leaning", "religion_importance", "parenthood"})
                    m.set(n, true);
            } else if (token == "survey") {
                for (const char* n : {"tech_impact", "content_types", "seen_toxic",
                                      "personally_targeted", "toxic_problem"})
                    m.set(n, true);
            } else {
                bool known = false;
                for (const std::string& n : feature_names()) known = known || n == token;
                if (!known) throw ValidationError("unknown feature '" + token + "' in mask spec");
                m.set(token, true);
            }
        }
        if (!m.any()) throw ValidationError("feature mask enables no features: '" + spec + "'");
        return m;
    }

    std::string to_string() const {
        std::string out;
        for (const std::string& n : feature_names())
            if (get(n)) out += (out.empty() ? "" : "+") + n;
        return out;
    }

private:
    const bool* field_of(const std::string& name) const {
        static const std::array<bool FeatureMask::*, 15> members = {
            &FeatureMask::text, &FeatureMask::id, &FeatureMask::gender, &FeatureMask::race,
            &FeatureMask::lgbt_status, &FeatureMask::education, &FeatureMask::age,
            &FeatureMask::political_leaning, &FeatureMask::religion_importance,
            &FeatureMask::parenthood, &FeatureMask::tech_impact, &FeatureMask::content_types,
            &FeatureMask::seen_toxic, &FeatureMask::personally_targeted,
            &FeatureMask::toxic_problem};
        const auto& names = feature_names();
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return &(this->*members[i]);
        throw ValidationError("unknown feature name '" + name + "'");
    }
};

}  // namespace annolens
