#include "annolens/target_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binio.hpp"

namespace annolens {
namespace {

using namespace binio;

constexpr std::uint32_t kTargetMagic = 0x4d544c41;  // "ALTM"
constexpr std::uint32_t kTargetVersion = 1;

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// Text-only featurization shared with the rating model's hashed text block.
FeatureVector text_features(const std::string& text, const TrainConfig& config) {
    ModelInput input;
    input.content = text;
    return featurize(input, FeatureMask::text_only(), config);
}

double sparse_dot(const Eigen::VectorXd& weights, const FeatureVector& x) {
    double acc = 0.0;
    for (const auto& [idx, value] : x.entries) acc += weights[idx] * value;
    return acc;
}

}  // namespace

std::string TargetPhraseList::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < phrases.size(); ++i) out += (i ? ", " : "") + phrases[i];
    return out;
}

TargetPhraseList TargetPhraseList::parse(const std::string& comma_separated) {
    TargetPhraseList list;
    for (const std::string& part : split(comma_separated, ',')) {
        std::string phrase = trim(part);
        if (!phrase.empty()) list.phrases.push_back(std::move(phrase));
    }
    return list;
}

NormalizationMap NormalizationMap::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open normalization map: " + path);
    NormalizationMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 2)
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected two tab-separated columns (variant, canonical)");
        std::string variant = to_lower(trim(cols[0]));
        std::string canonical = to_lower(trim(cols[1]));
        if (variant.empty() || canonical.empty())
            throw ValidationError(path + ":" + std::to_string(line_no) + ": empty column");
        auto existing = map.entries_.find(variant);
        if (existing != map.entries_.end() && existing->second != canonical)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": variant '" + variant +
                                  "' maps to both '" + existing->second + "' and '" + canonical +
                                  "'");
        map.entries_[variant] = canonical;
        map.canonical_.insert(canonical);
    }
    // canonical names must be fixed points; absent self-entries are implied
    for (const std::string& c : map.canonical_) {
        auto it = map.entries_.find(c);
        if (it == map.entries_.end())
            map.entries_[c] = c;
        else if (it->second != c)
            throw ValidationError("normalization map: canonical name '" + c +
                                  "' is not a fixed point (maps to '" + it->second + "')");
    }
    map.check_fixed_points();
    return map;
}

void NormalizationMap::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write normalization map: " + path);
    for (const auto& [variant, canonical] : entries_) out << variant << '\t' << canonical << '\n';
}

void NormalizationMap::add(const std::string& variant, const std::string& canonical) {
    std::string v = to_lower(trim(variant));
    std::string c = to_lower(trim(canonical));
    if (v.empty() || c.empty()) throw ValidationError("empty normalization map entry");
    auto existing = entries_.find(v);
    if (existing != entries_.end() && existing->second != c)
        throw ValidationError("variant '" + v + "' already maps to '" + existing->second + "'");
    if (v != c && canonical_.count(v))
        throw ValidationError("cannot remap canonical name '" + v + "'");
    entries_[v] = c;
    entries_[c] = c;
    canonical_.insert(c);
    check_fixed_points();
}

void NormalizationMap::check_fixed_points() const {
    for (const std::string& c : canonical_) {
        auto it = entries_.find(c);
        if (it == entries_.end() || it->second != c)
            throw ValidationError("normalization map: canonical name '" + c +
                                  "' is not a fixed point");
    }
}

std::string NormalizationMap::normalize_phrase(const std::string& phrase, bool* mapped) const {
    std::string key = to_lower(trim(phrase));
    auto it = entries_.find(key);
    if (mapped) *mapped = it != entries_.end();
    return it == entries_.end() ? key : it->second;
}

TargetGroupSet normalize_groups(const TargetPhraseList& phrases, const NormalizationMap& map,
                                std::vector<std::string>* unmapped_diagnostics) {
    TargetGroupSet out;
    for (const std::string& phrase : phrases.phrases) {
        bool mapped = false;
        std::string canonical = map.normalize_phrase(phrase, &mapped);
        if (canonical.empty()) continue;
        if (!mapped && unmapped_diagnostics) unmapped_diagnostics->push_back(canonical);
        out.groups.insert(std::move(canonical));
    }
    return out;
}

std::vector<std::string> TargetModel::vocabulary() const {
    std::vector<std::string> out;
    out.reserve(classifiers.size());
    for (const GroupClassifier& c : classifiers) out.push_back(c.group);
    return out;
}

TargetModel train_target_model(const std::vector<TextExample>& labeled,
                               const NormalizationMap& map, const TrainConfig& config,
                               double threshold) {
    if (labeled.empty()) throw ValidationError("no labeled examples for target training");
    if (threshold <= 0.0 || threshold >= 1.0)
        throw ValidationError("target threshold must lie in (0, 1)");
    if (config.learning_rate <= 0) throw ValidationError("learning_rate must be positive");

    for (const TextExample& e : labeled) {
        if (!e.gold_target_groups)
            throw ValidationError("example '" + e.example_id + "' has no gold target groups");
        for (const std::string& g : e.gold_target_groups->groups)
            if (!map.is_canonical(g))
                throw ValidationError("gold target group '" + g +
                                      "' is not a canonical name of the normalization map");
    }

    std::vector<FeatureVector> features;
    features.reserve(labeled.size());
    for (const TextExample& e : labeled) features.push_back(text_features(e.text, config));

    TargetModel model;
    model.threshold = threshold;
    model.config = config;

    const std::size_t batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
    for (const std::string& group : map.canonical_names()) {
        GroupClassifier clf;
        clf.group = group;
        clf.weights = Eigen::VectorXd::Zero(config.dimension);
        clf.bias = 0.0;

        std::vector<double> labels(labeled.size());
        for (std::size_t i = 0; i < labeled.size(); ++i)
            labels[i] = labeled[i].gold_target_groups->contains(group) ? 1.0 : 0.0;

        std::vector<std::size_t> order(labeled.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 rng(derive_seed(config.seed, group));

        std::vector<double> grads;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            deterministic_shuffle(order, rng);
            for (std::size_t start = 0; start < order.size(); start += batch_size) {
                std::size_t end = std::min(start + batch_size, order.size());
                grads.clear();
                for (std::size_t i = start; i < end; ++i) {
                    std::size_t idx = order[i];
                    double p = sigmoid(sparse_dot(clf.weights, features[idx]) + clf.bias);
                    grads.push_back(p - labels[idx]);  // d(logloss)/dz
                }
                const double scale = config.learning_rate / static_cast<double>(end - start);
                for (std::size_t i = start; i < end; ++i) {
                    std::size_t idx = order[i];
                    double step = scale * grads[i - start];
                    for (const auto& [fidx, value] : features[idx].entries)
                        clf.weights[fidx] -= step * value;
                    clf.bias -= step;
                }
            }
        }
        if (!std::isfinite(clf.bias))
            throw std::runtime_error("target training diverged for group '" + group + "'");
        model.classifiers.push_back(std::move(clf));
    }
    return model;
}

std::map<std::string, double> target_probabilities(const TargetModel& model,
                                                   const std::string& text) {
    FeatureVector x = text_features(text, model.config);
    std::map<std::string, double> out;
    for (const GroupClassifier& clf : model.classifiers)
        out[clf.group] = sigmoid(sparse_dot(clf.weights, x) + clf.bias);
    return out;
}

TargetPhraseList predict_target_phrases(const TargetModel& model, const std::string& text) {
    std::map<std::string, double> probs = target_probabilities(model, text);
    std::vector<std::pair<double, std::string>> kept;
    for (const auto& [group, p] : probs)
        if (p >= model.threshold) kept.push_back({p, group});
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;  // alphabetical among ties
    });
    TargetPhraseList list;
    for (const auto& [p, group] : kept) list.phrases.push_back(group);
    return list;
}

std::set<std::string> annotator_group_tags(const AnnotatorProfile& annotator,
                                           const NormalizationMap& map) {
    const DemographicProfile& d = annotator.demographics;
    std::set<std::string> tags;
    for (const std::string& field_value :
         {d.race, d.gender, d.sexual_orientation, d.trans_status, d.religion_importance,
          d.age_band, d.political_leaning})
        tags.insert(map.normalize_phrase(field_value));
    return tags;
}

std::vector<const AnnotatorProfile*> match_annotators(
    const TargetGroupSet& groups, const std::vector<AnnotatorProfile>& annotators,
    const NormalizationMap& map) {
    std::vector<const AnnotatorProfile*> matched;
    if (groups.empty()) return matched;
    for (const AnnotatorProfile& a : annotators) {
        std::set<std::string> tags = annotator_group_tags(a, map);
        bool member = false;
        for (const std::string& g : groups.groups) member = member || tags.count(g) > 0;
        if (member) matched.push_back(&a);
    }
    return matched;
}

void save_target_model(const TargetModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    write_u32(out, kTargetMagic);
    write_u32(out, kTargetVersion);
    write_u64(out, static_cast<std::uint64_t>(model.config.dimension));
    write_u32(out, static_cast<std::uint32_t>(model.config.ngram_orders.size()));
    for (int order : model.config.ngram_orders) write_u32(out, static_cast<std::uint32_t>(order));
    write_f64(out, model.config.learning_rate);
    write_u32(out, static_cast<std::uint32_t>(model.config.epochs));
    write_u32(out, static_cast<std::uint32_t>(model.config.batch_size));
    write_u64(out, model.config.seed);
    write_f64(out, model.threshold);
    write_u32(out, static_cast<std::uint32_t>(model.classifiers.size()));
    for (const GroupClassifier& clf : model.classifiers) {
        write_str(out, clf.group);
        write_f64(out, clf.bias);
        write_u64(out, static_cast<std::uint64_t>(clf.weights.size()));
        for (Eigen::Index i = 0; i < clf.weights.size(); ++i) write_f64(out, clf.weights[i]);
    }
    if (!out) throw std::runtime_error("failed while writing checkpoint: " + path);
}

TargetModel load_target_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    if (read_u32(in, path) != kTargetMagic)
        throw ValidationError("not a target model checkpoint: " + path);
    std::uint32_t version = read_u32(in, path);
    if (version != kTargetVersion)
        throw ValidationError("unsupported target checkpoint version " + std::to_string(version));

    TargetModel model;
    model.config.dimension = static_cast<int>(read_u64(in, path));
    std::uint32_t n_orders = read_u32(in, path);
    model.config.ngram_orders.clear();
    for (std::uint32_t i = 0; i < n_orders; ++i)
        model.config.ngram_orders.push_back(static_cast<int>(read_u32(in, path)));
    model.config.learning_rate = read_f64(in, path);
    model.config.epochs = static_cast<int>(read_u32(in, path));
    model.config.batch_size = static_cast<int>(read_u32(in, path));
    model.config.seed = read_u64(in, path);
    model.threshold = read_f64(in, path);
    std::uint32_t n_groups = read_u32(in, path);
    for (std::uint32_t g = 0; g < n_groups; ++g) {
        GroupClassifier clf;
        clf.group = read_str(in, path);
        clf.bias = read_f64(in, path);
        std::uint64_t n_weights = read_u64(in, path);
        if (n_weights != static_cast<std::uint64_t>(model.config.dimension))
            throw ValidationError("checkpoint weight count does not match dimension: " + path);
        clf.weights.resize(static_cast<Eigen::Index>(n_weights));
        for (std::uint64_t i = 0; i < n_weights; ++i)
            clf.weights[static_cast<Eigen::Index>(i)] = read_f64(in, path);
        model.classifiers.push_back(std::move(clf));
    }
    return model;
}

}  // namespace annolens
