#include "annolens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace annolens {
namespace {

using ordered_json = nlohmann::ordered_json;

void check_example(const ExampleEval& e) {
    if (e.annotator_keys.empty())
        throw ValidationError("evaluation frame: example '" + e.example_id + "' has no ratings");
    if (e.truth.size() != e.pred.size() ||
        static_cast<std::size_t>(e.truth.size()) != e.annotator_keys.size())
        throw ValidationError("evaluation frame: example '" + e.example_id +
                              "' has mismatched rating vectors");
}

double population_variance(const Eigen::VectorXd& v) {
    double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

double individual_mae(const EvaluationFrame& frame) {
    KahanSum sum;
    std::size_t n = 0;
    for (const ExampleEval& e : frame.examples) {
        check_example(e);
        for (Eigen::Index i = 0; i < e.truth.size(); ++i) {
            sum.add(std::abs(e.pred[i] - e.truth[i]));
            ++n;
        }
    }
    if (n == 0) throw ValidationError("individual_mae over an empty frame");
    return sum.value() / static_cast<double>(n);
}

double aggregate_mae(const EvaluationFrame& frame) {
    KahanSum sum;
    std::size_t n = 0;
    for (const ExampleEval& e : frame.examples) {
        check_example(e);
        sum.add(std::abs(e.pred.mean() - e.truth.mean()));
        ++n;
    }
    if (n == 0) throw ValidationError("aggregate_mae over an empty frame");
    return sum.value() / static_cast<double>(n);
}

double variance_mae(const EvaluationFrame& frame) {
    KahanSum sum;
    std::size_t n = 0;
    for (const ExampleEval& e : frame.examples) {
        check_example(e);
        if (e.truth.size() < 2) continue;
        sum.add(std::abs(population_variance(e.pred) - population_variance(e.truth)));
        ++n;
    }
    if (n == 0) throw ValidationError("variance_mae: no example has two or more ratings");
    return sum.value() / static_cast<double>(n);
}

std::optional<double> target_offense_error(const EvaluationFrame& frame) {
    KahanSum sum;
    std::size_t n = 0;
    for (const ExampleEval& e : frame.examples) {
        check_example(e);
        if (!e.matched_keys || e.matched_keys->empty()) continue;
        KahanSum member_truth;
        std::size_t members = 0;
        for (Eigen::Index i = 0; i < e.truth.size(); ++i)
            if (e.matched_keys->count(e.annotator_keys[i])) {
                member_truth.add(e.truth[i]);
                ++members;
            }
        if (members == 0) continue;
        if (member_truth.value() / static_cast<double>(members) < 1.0) continue;
        for (Eigen::Index i = 0; i < e.truth.size(); ++i)
            if (e.matched_keys->count(e.annotator_keys[i])) {
                sum.add(std::abs(e.pred[i] - e.truth[i]));
                ++n;
            }
    }
    if (n == 0) return std::nullopt;
    return sum.value() / static_cast<double>(n);
}

EvaluationFrame restrict_to_matched(const EvaluationFrame& frame) {
    EvaluationFrame out;
    out.annotator_attributes = frame.annotator_attributes;
    for (const ExampleEval& e : frame.examples) {
        check_example(e);
        if (!e.matched_keys || e.matched_keys->empty()) continue;
        ExampleEval kept = e;
        kept.annotator_keys.clear();
        std::vector<double> truth, pred;
        for (Eigen::Index i = 0; i < e.truth.size(); ++i) {
            if (!e.matched_keys->count(e.annotator_keys[i])) continue;
            kept.annotator_keys.push_back(e.annotator_keys[i]);
            truth.push_back(e.truth[i]);
            pred.push_back(e.pred[i]);
        }
        if (kept.annotator_keys.empty()) continue;
        kept.truth = Eigen::Map<Eigen::VectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size()));
        kept.pred = Eigen::Map<Eigen::VectorXd>(pred.data(), static_cast<Eigen::Index>(pred.size()));
        out.examples.push_back(std::move(kept));
    }
    return out;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open embedding file: " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        std::vector<double> values;
        double v;
        while (ss >> v) values.push_back(v);
        if (values.empty())
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": word '" + word + "' has no vector");
        for (double x : values)
            if (!std::isfinite(x))
                throw ValidationError(path + ":" + std::to_string(line_no) +
                                      ": non-finite embedding value");
        if (table.dimension == 0) table.dimension = static_cast<int>(values.size());
        if (static_cast<int>(values.size()) != table.dimension)
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": embedding dimension mismatch");
        table.vectors[to_lower(word)] =
            Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
    if (table.vectors.empty()) throw ValidationError("embedding file is empty: " + path);
    return table;
}

Eigen::VectorXd EmbeddingTable::lookup(const std::string& word,
                                       std::vector<std::string>* oov) const {
    auto it = vectors.find(to_lower(word));
    if (it != vectors.end()) return it->second;
    if (oov) oov->push_back(word);
    return Eigen::VectorXd::Zero(dimension);
}

bool is_stopword(const std::string& word) {
    static const std::set<std::string> kStopwords = {
        "a",   "an",  "and", "are", "as",  "at",  "be",  "by",  "for", "from",
        "in",  "is",  "it",  "of",  "on",  "or",  "the", "to",  "was", "were",
        "who", "that", "this", "with"};
    return kStopwords.count(word) > 0;
}

double word_movers_distance(const TargetPhraseList& a, const TargetPhraseList& b,
                            const EmbeddingTable& embeddings, bool filter_stopwords,
                            std::vector<std::string>* oov_diagnostics) {
    auto bag = [&](const TargetPhraseList& list, const char* side) {
        std::map<std::string, double> counts;
        double total = 0.0;
        for (const std::string& phrase : list.phrases)
            for (const std::string& word : tokenize_words(phrase)) {
                if (filter_stopwords && is_stopword(word)) continue;
                counts[word] += 1.0;
                total += 1.0;
            }
        if (counts.empty())
            throw ValidationError(std::string("word_movers_distance: ") + side +
                                  " phrase list is empty");
        for (auto& [word, c] : counts) c /= total;
        return counts;
    };

    std::map<std::string, double> left = bag(a, "first");
    std::map<std::string, double> right = bag(b, "second");

    const int n = static_cast<int>(left.size());
    const int m = static_cast<int>(right.size());
    Eigen::VectorXd supply(n), demand(m);
    std::vector<Eigen::VectorXd> left_vecs, right_vecs;
    left_vecs.reserve(n);
    right_vecs.reserve(m);
    int i = 0;
    for (const auto& [word, mass] : left) {
        supply[i++] = mass;
        left_vecs.push_back(embeddings.lookup(word, oov_diagnostics));
    }
    int j = 0;
    for (const auto& [word, mass] : right) {
        demand[j++] = mass;
        right_vecs.push_back(embeddings.lookup(word, oov_diagnostics));
    }

    Eigen::MatrixXd cost(n, m);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) cost(r, c) = (left_vecs[r] - right_vecs[c]).norm();
    return solve_transport(supply, demand, cost);
}

MatchAccuracy match_accuracy(const std::vector<TargetGroupSet>& predicted,
                             const std::vector<TargetGroupSet>& gold) {
    if (predicted.size() != gold.size())
        throw ValidationError("match_accuracy: collections differ in length");
    if (predicted.empty()) throw ValidationError("match_accuracy over empty collections");
    std::size_t exact = 0;
    std::size_t partial = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].groups == gold[i].groups) ++exact;
        if (predicted[i].empty() && gold[i].empty()) {
            ++partial;  // vacuous agreement
            continue;
        }
        bool intersects = false;
        for (const std::string& g : predicted[i].groups)
            intersects = intersects || gold[i].contains(g);
        if (intersects) ++partial;
    }
    const double n = static_cast<double>(predicted.size());
    return {static_cast<double>(exact) / n, static_cast<double>(partial) / n};
}

std::vector<BreakdownRow> group_breakdown(const EvaluationFrame& frame, BreakdownAxis axis,
                                          std::size_t min_count) {
    std::map<std::string, std::pair<KahanSum, std::size_t>> buckets;
    auto accumulate_pair = [&](const std::string& key, double err) {
        auto& [sum, count] = buckets[key];
        sum.add(err);
        ++count;
    };

    for (const ExampleEval& e : frame.examples) {
        check_example(e);
        switch (axis) {
            case BreakdownAxis::annotator_demographic:
                for (Eigen::Index i = 0; i < e.truth.size(); ++i) {
                    auto attrs = frame.annotator_attributes.find(e.annotator_keys[i]);
                    if (attrs == frame.annotator_attributes.end()) continue;
                    double err = std::abs(e.pred[i] - e.truth[i]);
                    for (const auto& [field, value] : attrs->second)
                        accumulate_pair(field + "=" + value, err);
                }
                break;
            case BreakdownAxis::predicted_target_group: {
                if (!e.predicted_targets) continue;
                for (const std::string& group : e.predicted_targets->groups)
                    for (Eigen::Index i = 0; i < e.truth.size(); ++i)
                        accumulate_pair(group, std::abs(e.pred[i] - e.truth[i]));
                break;
            }
            case BreakdownAxis::target_set_size: {
                const std::optional<TargetGroupSet>& set =
                    e.predicted_targets ? e.predicted_targets : e.gold_targets;
                if (!set) continue;
                std::string key = std::to_string(set->groups.size());
                for (Eigen::Index i = 0; i < e.truth.size(); ++i)
                    accumulate_pair(key, std::abs(e.pred[i] - e.truth[i]));
                break;
            }
        }
    }

    std::vector<BreakdownRow> rows;
    rows.reserve(buckets.size());
    for (const auto& [key, acc] : buckets) {
        BreakdownRow row;
        row.key = key;
        row.count = acc.second;
        row.mae = acc.first.value() / static_cast<double>(acc.second);
        row.low_support = acc.second < min_count;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const BreakdownRow& a, const BreakdownRow& b) {
        if (a.mae != b.mae) return a.mae < b.mae;
        return a.key < b.key;
    });
    return rows;
}

TargetErrorAnalysis target_error_analysis(const std::vector<TargetGroupSet>& predicted,
                                          const std::vector<TargetGroupSet>& gold,
                                          const std::map<std::string, std::string>& category_map) {
    if (predicted.size() != gold.size())
        throw ValidationError("target_error_analysis: collections differ in length");
    std::map<std::string, TargetErrorRow> by_group;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        for (const std::string& g : gold[i].groups)
            if (!predicted[i].contains(g)) ++by_group[g].missed;
        for (const std::string& g : predicted[i].groups)
            if (!gold[i].contains(g)) ++by_group[g].false_positive;
    }

    TargetErrorAnalysis out;
    std::map<std::string, TargetErrorRow> by_category;
    for (auto& [group, row] : by_group) {
        row.group = group;
        auto cat = category_map.find(group);
        std::string category = cat == category_map.end() ? "other" : cat->second;
        by_category[category].missed += row.missed;
        by_category[category].false_positive += row.false_positive;
        out.groups.push_back(row);
    }
    for (auto& [category, row] : by_category) {
        row.group = category;
        out.categories.push_back(row);
    }
    return out;
}

std::map<std::string, std::string> load_category_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open category map: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 2)
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected two tab-separated columns (group, category)");
        out[to_lower(trim(cols[0]))] = to_lower(trim(cols[1]));
    }
    return out;
}

namespace {

void emit(std::string& out, const std::string& key, const std::optional<double>& v) {
    out += key;
    out += '\t';
    out += v ? format_double(*v) : "absent";
    out += '\n';
}

void emit_block(std::string& out, const std::string& prefix, const TargetMetricsBlock& block) {
    emit(out, prefix + ".individual_mae", block.individual_mae);
    emit(out, prefix + ".aggregate_mae", block.aggregate_mae);
    emit(out, prefix + ".variance_mae", block.variance_mae);
    emit(out, prefix + ".target_offense_error", block.offense_error);
}

ordered_json json_optional(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json json_block(const TargetMetricsBlock& block) {
    ordered_json j;
    j["individual_mae"] = json_optional(block.individual_mae);
    j["aggregate_mae"] = json_optional(block.aggregate_mae);
    j["variance_mae"] = json_optional(block.variance_mae);
    j["target_offense_error"] = json_optional(block.offense_error);
    return j;
}

ordered_json json_rows(const std::vector<BreakdownRow>& rows) {
    ordered_json arr = ordered_json::array();
    for (const BreakdownRow& row : rows) {
        ordered_json j;
        j["key"] = row.key;
        j["individual_mae"] = row.mae;
        j["count"] = row.count;
        j["low_support"] = row.low_support;
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace

std::string MetricsReport::to_kv_text() const {
    std::string out;
    out += "n_examples\t" + std::to_string(n_examples) + "\n";
    out += "n_pairs\t" + std::to_string(n_pairs) + "\n";
    out += "individual_mae\t" + format_double(individual_mae) + "\n";
    out += "aggregate_mae\t" + format_double(aggregate_mae) + "\n";
    emit(out, "variance_mae", variance_mae);
    emit_block(out, "target_gold", target_gold);
    emit_block(out, "target_predicted", target_predicted);
    emit(out, "wmd_mean", wmd_mean);
    out += "wmd_count\t" + (wmd_count ? std::to_string(*wmd_count) : std::string("absent")) + "\n";
    emit(out, "exact_match", exact_match);
    emit(out, "partial_match", partial_match);
    auto rows = [&](const char* name, const std::vector<BreakdownRow>& table) {
        for (const BreakdownRow& row : table)
            out += std::string(name) + "." + row.key + "\t" + format_double(row.mae) + "\t" +
                   std::to_string(row.count) + (row.low_support ? "\tlow_support" : "") + "\n";
    };
    rows("breakdown.demographic", demographic_breakdown);
    rows("breakdown.target_group", target_group_breakdown);
    rows("breakdown.set_size", set_size_breakdown);
    if (error_analysis) {
        for (const TargetErrorRow& row : error_analysis->groups)
            out += "target_errors.group." + row.group + "\tmissed=" +
                   std::to_string(row.missed) + "\tfalse_positive=" +
                   std::to_string(row.false_positive) + "\n";
        for (const TargetErrorRow& row : error_analysis->categories)
            out += "target_errors.category." + row.group + "\tmissed=" +
                   std::to_string(row.missed) + "\tfalse_positive=" +
                   std::to_string(row.false_positive) + "\n";
    }
    return out;
}

std::string MetricsReport::to_json() const {
    ordered_json j;
    j["n_examples"] = n_examples;
    j["n_pairs"] = n_pairs;
    j["individual_mae"] = individual_mae;
    j["aggregate_mae"] = aggregate_mae;
    j["variance_mae"] = json_optional(variance_mae);
    j["target_gold"] = json_block(target_gold);
    j["target_predicted"] = json_block(target_predicted);
    j["wmd_mean"] = json_optional(wmd_mean);
    j["wmd_count"] = wmd_count ? ordered_json(*wmd_count) : ordered_json(nullptr);
    j["exact_match"] = json_optional(exact_match);
    j["partial_match"] = json_optional(partial_match);
    j["breakdowns"]["demographic"] = json_rows(demographic_breakdown);
    j["breakdowns"]["target_group"] = json_rows(target_group_breakdown);
    j["breakdowns"]["set_size"] = json_rows(set_size_breakdown);
    if (error_analysis) {
        ordered_json groups = ordered_json::array();
        for (const TargetErrorRow& row : error_analysis->groups)
            groups.push_back({{"group", row.group},
                              {"missed", row.missed},
                              {"false_positive", row.false_positive}});
        ordered_json categories = ordered_json::array();
        for (const TargetErrorRow& row : error_analysis->categories)
            categories.push_back({{"category", row.group},
                                  {"missed", row.missed},
                                  {"false_positive", row.false_positive}});
        j["target_errors"] = {{"groups", std::move(groups)},
                              {"categories", std::move(categories)}};
    } else {
        j["target_errors"] = nullptr;
    }
    return j.dump(2) + "\n";
}

}  // namespace annolens
