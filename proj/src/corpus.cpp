#include "annolens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace annolens {
namespace {

namespace fs = std::filesystem;

std::string escape_value(std::string_view v) {
    std::string out;
    out.reserve(v.size());
    for (char c : v) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape_value(std::string_view v, const std::string& where) {
    std::string out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != '\\') {
            out += v[i];
            continue;
        }
        if (i + 1 >= v.size()) throw ValidationError(where + ": dangling escape character");
        ++i;
        switch (v[i]) {
            case '\\': out += '\\'; break;
            case 't': out += '\t'; break;
            case 'n': out += '\n'; break;
            default: throw ValidationError(where + ": unknown escape sequence");
        }
    }
    return out;
}

// One line of a record file: key=value pairs joined by tabs.
class LineRecord {
public:
    LineRecord(const std::string& line, std::string where) : where_(std::move(where)) {
        for (const std::string& part : split(line, '\t')) {
            if (part.empty()) continue;
            std::size_t eq = part.find('=');
            if (eq == std::string::npos)
                throw ValidationError(where_ + ": malformed pair '" + part + "' (expected key=value)");
            std::string key = part.substr(0, eq);
            if (pairs_.count(key)) throw ValidationError(where_ + ": duplicate field '" + key + "'");
            pairs_[key] = unescape_value(part.substr(eq + 1), where_);
        }
    }

    const std::string& require(const std::string& key) const {
        auto it = pairs_.find(key);
        if (it == pairs_.end())
            throw ValidationError(where_ + ": missing field '" + key + "'");
        return it->second;
    }

    const std::string* find(const std::string& key) const {
        auto it = pairs_.find(key);
        return it == pairs_.end() ? nullptr : &it->second;
    }

    void check_known_keys(const std::vector<std::string>& known) const {
        for (const auto& [key, value] : pairs_) {
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ValidationError(where_ + ": unknown field '" + key + "'");
        }
    }

    const std::string& where() const { return where_; }

private:
    std::string where_;
    std::map<std::string, std::string> pairs_;
};

std::string location(const std::string& path, std::size_t line_no) {
    return fs::path(path).filename().string() + ":" + std::to_string(line_no);
}

bool parse_flag(const std::string& v, const std::string& where, const std::string& field) {
    if (v == "yes") return true;
    if (v == "no") return false;
    throw ValidationError(where + ": field '" + field + "': value '" + v +
                          "' not in vocabulary {yes, no}");
}

std::string flag_str(bool b) { return b ? "yes" : "no"; }

void check_vocab(const DatasetSchema& schema, const std::string& field, const std::string& value,
                 const std::string& where) {
    const DatasetSchema::Field& f = schema.require(field);
    if (value.empty())
        throw ValidationError(where + ": field '" + field + "' is empty");
    if (!f.allows(value))
        throw ValidationError(where + ": field '" + field + "': value '" + value +
                              "' not in vocabulary");
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

bool DatasetSchema::Field::allows(const std::string& v) const {
    if (kind == FieldKind::flag) return v == "yes" || v == "no";
    return std::find(values.begin(), values.end(), v) != values.end();
}

const DatasetSchema::Field* DatasetSchema::find(const std::string& name) const {
    for (const Field& f : fields_)
        if (f.name == name) return &f;
    return nullptr;
}

const DatasetSchema::Field& DatasetSchema::require(const std::string& name) const {
    const Field* f = find(name);
    if (!f) throw ValidationError("schema declares no field '" + name + "'");
    return *f;
}

void DatasetSchema::add_field(Field f) {
    if (find(f.name)) throw ValidationError("schema field '" + f.name + "' declared twice");
    for (const std::string& v : f.values) {
        if (v.empty()) throw ValidationError("schema field '" + f.name + "' has an empty value");
        if (v.find('\t') != std::string::npos || v.find('|') != std::string::npos)
            throw ValidationError("schema value '" + v + "' contains a reserved character");
        if (f.kind == FieldKind::multi && v.find(',') != std::string::npos)
            throw ValidationError("multi-valued field value '" + v + "' may not contain a comma");
    }
    fields_.push_back(std::move(f));
}

DatasetSchema DatasetSchema::parse(const std::string& text, const std::string& origin) {
    DatasetSchema schema;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::string where = origin + ":" + std::to_string(line_no);
        if (t.rfind("field ", 0) != 0)
            throw ValidationError(where + ": expected 'field <name> <kind>[: values]'");
        std::string rest = trim(t.substr(6));
        std::string head = rest;
        std::string values_part;
        std::size_t colon = rest.find(':');
        if (colon != std::string::npos) {
            head = trim(rest.substr(0, colon));
            values_part = trim(rest.substr(colon + 1));
        }
        std::size_t sp = head.find_last_of(' ');
        if (sp == std::string::npos)
            throw ValidationError(where + ": expected '<name> <kind>'");
        Field f;
        f.name = trim(head.substr(0, sp));
        std::string kind = trim(head.substr(sp + 1));
        if (kind == "categorical") f.kind = FieldKind::categorical;
        else if (kind == "ordered") f.kind = FieldKind::ordered;
        else if (kind == "flag") f.kind = FieldKind::flag;
        else if (kind == "multi") f.kind = FieldKind::multi;
        else throw ValidationError(where + ": unknown field kind '" + kind + "'");
        if (f.kind == FieldKind::flag) {
            if (!values_part.empty())
                throw ValidationError(where + ": flag fields take no vocabulary");
        } else {
            if (values_part.empty())
                throw ValidationError(where + ": field '" + f.name + "' declares no values");
            for (const std::string& v : split(values_part, '|')) {
                std::string tv = trim(v);
                if (tv.empty()) throw ValidationError(where + ": empty vocabulary value");
                if (std::find(f.values.begin(), f.values.end(), tv) != f.values.end())
                    throw ValidationError(where + ": duplicate vocabulary value '" + tv + "'");
                f.values.push_back(tv);
            }
        }
        schema.add_field(std::move(f));
    }

    for (const char* name : fields::kDemographic) schema.require(name);
    for (const char* name : fields::kSurveySingle) schema.require(name);
    schema.require(fields::kContentTypes);
    if (schema.require(fields::kContentTypes).kind != FieldKind::multi)
        throw ValidationError(origin + ": field 'content_types' must be multi-valued");
    for (const char* flag : {"is_parent", "seen_toxic", "personally_targeted"})
        if (schema.require(flag).kind != FieldKind::flag)
            throw ValidationError(origin + std::string(": field '") + flag + "' must be a flag");
    return schema;
}

DatasetSchema DatasetSchema::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open schema file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), fs::path(path).filename().string());
}

std::string DatasetSchema::to_text() const {
    std::string out;
    for (const Field& f : fields_) {
        out += "field " + f.name + " ";
        switch (f.kind) {
            case FieldKind::categorical: out += "categorical"; break;
            case FieldKind::ordered: out += "ordered"; break;
            case FieldKind::flag: out += "flag"; break;
            case FieldKind::multi: out += "multi"; break;
        }
        if (f.kind != FieldKind::flag) {
            out += ":";
            for (std::size_t i = 0; i < f.values.size(); ++i)
                out += (i == 0 ? " " : " | ") + f.values[i];
        }
        out += "\n";
    }
    return out;
}

void DatasetSchema::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write schema file: " + path);
    out << to_text();
}

CorpusIndex::CorpusIndex(const AnnotationCorpus& corpus) {
    for (const AnnotatorProfile& a : corpus.annotators) annotators_[a.annotator_key] = &a;
    for (const TextExample& e : corpus.examples) examples_[e.example_id] = &e;
    for (const AnnotationRecord& r : corpus.records) by_example_[r.example_id].push_back(&r);
}

const AnnotatorProfile* CorpusIndex::annotator(const std::string& key) const {
    auto it = annotators_.find(key);
    return it == annotators_.end() ? nullptr : it->second;
}

const TextExample* CorpusIndex::example(const std::string& id) const {
    auto it = examples_.find(id);
    return it == examples_.end() ? nullptr : it->second;
}

const std::vector<const AnnotationRecord*>& CorpusIndex::records_of(
    const std::string& example_id) const {
    auto it = by_example_.find(example_id);
    return it == by_example_.end() ? empty_ : it->second;
}

namespace {

const std::vector<std::string>& annotator_keys_known() {
    static const std::vector<std::string> k = {
        "annotator_key", "profile_id", "age_band", "gender", "race", "education",
        "political_leaning", "is_parent", "religion_importance", "sexual_orientation",
        "trans_status", "content_types", "tech_impact", "seen_toxic", "personally_targeted",
        "toxic_problem"};
    return k;
}

AnnotatorProfile parse_annotator(const LineRecord& rec, const DatasetSchema& schema) {
    rec.check_known_keys(annotator_keys_known());
    AnnotatorProfile a;
    a.annotator_key = rec.require("annotator_key");
    if (a.annotator_key.empty())
        throw ValidationError(rec.where() + ": field 'annotator_key' is empty");
    if (const std::string* pid = rec.find("profile_id")) {
        try {
            a.profile_id = std::stoi(*pid);
        } catch (const std::exception&) {
            throw ValidationError(rec.where() + ": field 'profile_id': value '" + *pid +
                                  "' is not an integer");
        }
        if (*a.profile_id < 0)
            throw ValidationError(rec.where() + ": field 'profile_id' must be >= 0");
    }

    DemographicProfile& d = a.demographics;
    auto cat = [&](const char* field) {
        const std::string& v = rec.require(field);
        check_vocab(schema, field, v, rec.where());
        return v;
    };
    d.age_band = cat("age_band");
    d.gender = cat("gender");
    d.race = cat("race");
    d.education = cat("education");
    d.political_leaning = cat("political_leaning");
    d.is_parent = parse_flag(rec.require("is_parent"), rec.where(), "is_parent");
    d.religion_importance = cat("religion_importance");
    d.sexual_orientation = cat("sexual_orientation");
    d.trans_status = cat("trans_status");

    SurveyResponse& s = a.survey;
    s.tech_impact = cat("tech_impact");
    s.seen_toxic = parse_flag(rec.require("seen_toxic"), rec.where(), "seen_toxic");
    s.personally_targeted =
        parse_flag(rec.require("personally_targeted"), rec.where(), "personally_targeted");
    s.toxic_problem = cat("toxic_problem");

    const DatasetSchema::Field& ct = schema.require(fields::kContentTypes);
    const std::string& raw = rec.require("content_types");
    std::set<std::string> seen;
    if (!raw.empty()) {
        for (const std::string& part : split(raw, ',')) {
            std::string v = trim(part);
            if (!ct.allows(v))
                throw ValidationError(rec.where() + ": field 'content_types': value '" + v +
                                      "' not in vocabulary");
            if (!seen.insert(v).second)
                throw ValidationError(rec.where() + ": field 'content_types': duplicate value '" +
                                      v + "'");
        }
    }
    // normalize to schema order so response tuples compare bytewise
    for (const std::string& v : ct.values)
        if (seen.count(v)) s.content_types.push_back(v);
    return a;
}

TextExample parse_example(const LineRecord& rec) {
    rec.check_known_keys({"example_id", "text", "target_groups"});
    TextExample e;
    e.example_id = rec.require("example_id");
    if (e.example_id.empty()) throw ValidationError(rec.where() + ": field 'example_id' is empty");
    e.text = rec.require("text");
    if (e.text.empty()) throw ValidationError(rec.where() + ": field 'text' is empty");
    if (const std::string* groups = rec.find("target_groups")) {
        TargetGroupSet set;
        if (!groups->empty())
            for (const std::string& g : split(*groups, ',')) {
                std::string t = trim(g);
                if (!t.empty()) set.groups.insert(t);
            }
        e.gold_target_groups = std::move(set);
    }
    return e;
}

AnnotationRecord parse_record(const LineRecord& rec) {
    rec.check_known_keys({"annotator_key", "example_id", "rating"});
    AnnotationRecord r;
    r.annotator_key = rec.require("annotator_key");
    r.example_id = rec.require("example_id");
    const std::string& raw = rec.require("rating");
    std::size_t pos = 0;
    int value = 0;
    try {
        value = std::stoi(raw, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != raw.size())
        throw ValidationError(rec.where() + ": field 'rating': value '" + raw +
                              "' is not an integer");
    if (value < 0 || value > 4)
        throw ValidationError(rec.where() + ": field 'rating': value '" + raw +
                              "' not in vocabulary {0, 1, 2, 3, 4}");
    r.rating = value;
    return r;
}

}  // namespace

AnnotationCorpus load_corpus(const CorpusPaths& paths) {
    AnnotationCorpus corpus;
    corpus.schema = DatasetSchema::load(paths.schema);

    std::set<std::string> annotator_keys;
    std::vector<std::string> lines = read_lines(paths.annotators);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        LineRecord rec(lines[i], location(paths.annotators, i + 1));
        AnnotatorProfile a = parse_annotator(rec, corpus.schema);
        if (!annotator_keys.insert(a.annotator_key).second)
            throw ValidationError(rec.where() + ": duplicate annotator_key '" + a.annotator_key +
                                  "'");
        corpus.annotators.push_back(std::move(a));
    }

    std::set<std::string> example_ids;
    lines = read_lines(paths.examples);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        LineRecord rec(lines[i], location(paths.examples, i + 1));
        TextExample e = parse_example(rec);
        if (!example_ids.insert(e.example_id).second)
            throw ValidationError(rec.where() + ": duplicate example_id '" + e.example_id + "'");
        corpus.examples.push_back(std::move(e));
    }

    std::set<std::pair<std::string, std::string>> record_keys;
    lines = read_lines(paths.records);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        LineRecord rec(lines[i], location(paths.records, i + 1));
        AnnotationRecord r = parse_record(rec);
        if (!annotator_keys.count(r.annotator_key))
            throw ValidationError(rec.where() + ": unknown annotator_key '" + r.annotator_key +
                                  "'");
        if (!example_ids.count(r.example_id))
            throw ValidationError(rec.where() + ": unknown example_id '" + r.example_id + "'");
        if (!record_keys.insert({r.annotator_key, r.example_id}).second)
            throw ValidationError(rec.where() + ": duplicate record for annotator '" +
                                  r.annotator_key + "' and example '" + r.example_id + "'");
        corpus.records.push_back(std::move(r));
    }

    validate_corpus(corpus);
    return corpus;
}

AnnotationCorpus load_corpus_dir(const std::string& dir) {
    fs::path base(dir);
    return load_corpus({(base / "annotators.txt").string(), (base / "examples.txt").string(),
                        (base / "records.txt").string(), (base / "schema.txt").string()});
}

void save_corpus_dir(const AnnotationCorpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    fs::path base(dir);
    corpus.schema.save((base / "schema.txt").string());

    std::ofstream ann((base / "annotators.txt").string(), std::ios::binary);
    if (!ann) throw std::runtime_error("cannot write " + (base / "annotators.txt").string());
    for (const AnnotatorProfile& a : corpus.annotators) {
        ann << "annotator_key=" << escape_value(a.annotator_key);
        if (a.profile_id) ann << "\tprofile_id=" << *a.profile_id;
        const DemographicProfile& d = a.demographics;
        ann << "\tage_band=" << escape_value(d.age_band) << "\tgender=" << escape_value(d.gender)
            << "\trace=" << escape_value(d.race) << "\teducation=" << escape_value(d.education)
            << "\tpolitical_leaning=" << escape_value(d.political_leaning)
            << "\tis_parent=" << flag_str(d.is_parent)
            << "\treligion_importance=" << escape_value(d.religion_importance)
            << "\tsexual_orientation=" << escape_value(d.sexual_orientation)
            << "\ttrans_status=" << escape_value(d.trans_status);
        const SurveyResponse& s = a.survey;
        std::string types;
        for (std::size_t i = 0; i < s.content_types.size(); ++i)
            types += (i ? "," : "") + s.content_types[i];
        ann << "\tcontent_types=" << escape_value(types)
            << "\ttech_impact=" << escape_value(s.tech_impact)
            << "\tseen_toxic=" << flag_str(s.seen_toxic)
            << "\tpersonally_targeted=" << flag_str(s.personally_targeted)
            << "\ttoxic_problem=" << escape_value(s.toxic_problem) << "\n";
    }

    std::ofstream ex((base / "examples.txt").string(), std::ios::binary);
    if (!ex) throw std::runtime_error("cannot write " + (base / "examples.txt").string());
    for (const TextExample& e : corpus.examples) {
        ex << "example_id=" << escape_value(e.example_id) << "\ttext=" << escape_value(e.text);
        if (e.gold_target_groups) {
            std::string groups;
            for (const std::string& g : e.gold_target_groups->groups)
                groups += (groups.empty() ? "" : ",") + g;
            ex << "\ttarget_groups=" << escape_value(groups);
        }
        ex << "\n";
    }

    std::ofstream recs((base / "records.txt").string(), std::ios::binary);
    if (!recs) throw std::runtime_error("cannot write " + (base / "records.txt").string());
    for (const AnnotationRecord& r : corpus.records)
        recs << "annotator_key=" << escape_value(r.annotator_key)
             << "\texample_id=" << escape_value(r.example_id) << "\trating=" << r.rating << "\n";
}

void validate_corpus(const AnnotationCorpus& corpus) {
    std::set<std::string> annotator_keys;
    for (const AnnotatorProfile& a : corpus.annotators) {
        if (a.annotator_key.empty()) throw ValidationError("annotator with empty key");
        if (!annotator_keys.insert(a.annotator_key).second)
            throw ValidationError("duplicate annotator_key '" + a.annotator_key + "'");
        if (a.profile_id && *a.profile_id < 0)
            throw ValidationError("annotator '" + a.annotator_key + "' has negative profile_id");
        auto check = [&](const char* field, const std::string& value) {
            check_vocab(corpus.schema, field, value, "annotator '" + a.annotator_key + "'");
        };
        check("age_band", a.demographics.age_band);
        check("gender", a.demographics.gender);
        check("race", a.demographics.race);
        check("education", a.demographics.education);
        check("political_leaning", a.demographics.political_leaning);
        check("religion_importance", a.demographics.religion_importance);
        check("sexual_orientation", a.demographics.sexual_orientation);
        check("trans_status", a.demographics.trans_status);
        check("tech_impact", a.survey.tech_impact);
        check("toxic_problem", a.survey.toxic_problem);
        const DatasetSchema::Field& ct = corpus.schema.require(fields::kContentTypes);
        for (const std::string& t : a.survey.content_types)
            if (!ct.allows(t))
                throw ValidationError("annotator '" + a.annotator_key + "': content type '" + t +
                                      "' not in vocabulary");
    }

    std::set<std::string> example_ids;
    for (const TextExample& e : corpus.examples) {
        if (e.example_id.empty()) throw ValidationError("example with empty id");
        if (e.text.empty()) throw ValidationError("example '" + e.example_id + "' has empty text");
        if (!example_ids.insert(e.example_id).second)
            throw ValidationError("duplicate example_id '" + e.example_id + "'");
    }

    std::set<std::pair<std::string, std::string>> record_keys;
    std::set<std::string> rated_examples;
    for (const AnnotationRecord& r : corpus.records) {
        if (!annotator_keys.count(r.annotator_key))
            throw ValidationError("record references unknown annotator_key '" + r.annotator_key +
                                  "'");
        if (!example_ids.count(r.example_id))
            throw ValidationError("record references unknown example_id '" + r.example_id + "'");
        if (r.rating < 0 || r.rating > 4)
            throw ValidationError("record rating '" + std::to_string(r.rating) +
                                  "' not in vocabulary {0, 1, 2, 3, 4}");
        if (!record_keys.insert({r.annotator_key, r.example_id}).second)
            throw ValidationError("duplicate record for annotator '" + r.annotator_key +
                                  "' and example '" + r.example_id + "'");
        rated_examples.insert(r.example_id);
    }
    for (const TextExample& e : corpus.examples)
        if (!rated_examples.count(e.example_id))
            throw ValidationError("example '" + e.example_id + "' has no annotation records");
}

std::string canonical_response_tuple(const AnnotatorProfile& a) {
    const char sep = '\x1f';
    const DemographicProfile& d = a.demographics;
    const SurveyResponse& s = a.survey;
    std::string types;
    for (std::size_t i = 0; i < s.content_types.size(); ++i)
        types += (i ? "," : "") + s.content_types[i];
    std::string out;
    for (const std::string& part :
         {d.age_band, d.gender, d.race, d.education, d.political_leaning, flag_str(d.is_parent),
          d.religion_importance, d.sexual_orientation, d.trans_status, types, s.tech_impact,
          flag_str(s.seen_toxic), flag_str(s.personally_targeted), s.toxic_problem}) {
        out += part;
        out += sep;
    }
    return out;
}

AnnotationCorpus assign_profile_ids(AnnotationCorpus corpus) {
    std::set<std::string> tuples;
    for (const AnnotatorProfile& a : corpus.annotators) tuples.insert(canonical_response_tuple(a));
    std::map<std::string, int> ids;
    int next = 0;
    for (const std::string& t : tuples) ids[t] = next++;
    for (AnnotatorProfile& a : corpus.annotators)
        a.profile_id = ids.at(canonical_response_tuple(a));
    return corpus;
}

CorpusSplits split_corpus(const AnnotationCorpus& corpus, SplitFractions fractions,
                          std::uint64_t seed) {
    if (fractions.train <= 0 || fractions.val <= 0 || fractions.test <= 0)
        throw ValidationError("split fractions must be positive");
    double sum = fractions.train + fractions.val + fractions.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("split fractions sum to " + std::to_string(sum) + ", expected 1");

    const std::size_t n = corpus.examples.size();
    // The 1e-9 nudge keeps exact-ratio fractions (e.g. 5000/107620) from
    // landing one ulp below an integer quota.
    auto quota = [n](double f) {
        return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    };
    std::size_t n_val = quota(fractions.val);
    std::size_t n_test = quota(fractions.test);
    if (n_val + n_test > n) throw ValidationError("split fractions leave no training examples");
    std::size_t n_train = n - n_val - n_test;

    std::vector<std::string> ids;
    ids.reserve(n);
    for (const TextExample& e : corpus.examples) ids.push_back(e.example_id);
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    deterministic_shuffle(ids, rng);

    std::map<std::string, int> bucket;  // 0 train, 1 val, 2 test
    for (std::size_t i = 0; i < ids.size(); ++i)
        bucket[ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

    CorpusSplits splits;
    AnnotationCorpus* outs[3] = {&splits.train, &splits.val, &splits.test};
    for (AnnotationCorpus* out : outs) out->schema = corpus.schema;

    for (const TextExample& e : corpus.examples)
        outs[bucket.at(e.example_id)]->examples.push_back(e);

    std::set<std::string> used_annotators[3];
    for (const AnnotationRecord& r : corpus.records) {
        int b = bucket.at(r.example_id);
        outs[b]->records.push_back(r);
        used_annotators[b].insert(r.annotator_key);
    }
    for (int b = 0; b < 3; ++b)
        for (const AnnotatorProfile& a : corpus.annotators)
            if (used_annotators[b].count(a.annotator_key)) outs[b]->annotators.push_back(a);

    return splits;
}

}  // namespace annolens
