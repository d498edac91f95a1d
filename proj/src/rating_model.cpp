#include "annolens/rating_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "binio.hpp"

namespace annolens {
namespace {

namespace fs = std::filesystem;
using namespace binio;

bool mask_allows_field(const FeatureMask& mask, const std::string& field) {
    if (field == "gender") return mask.gender;
    if (field == "race") return mask.race;
    if (field == "sexual_orientation" || field == "trans_status") return mask.lgbt_status;
    if (field == "education") return mask.education;
    if (field == "age_band") return mask.age;
    if (field == "political_leaning") return mask.political_leaning;
    if (field == "religion_importance") return mask.religion_importance;
    if (field == "is_parent") return mask.parenthood;
    if (field == "tech_impact") return mask.tech_impact;
    if (field == "seen_toxic") return mask.seen_toxic;
    if (field == "personally_targeted") return mask.personally_targeted;
    if (field == "toxic_problem") return mask.toxic_problem;
    return false;
}

double sparse_dot(const Eigen::VectorXd& weights, const FeatureVector& x) {
    double acc = 0.0;
    for (const auto& [idx, value] : x.entries) acc += weights[idx] * value;
    return acc;
}

constexpr std::uint32_t kRatingMagic = 0x4d524c41;  // "ALRM"
constexpr std::uint32_t kRatingVersion = 1;

std::uint32_t mask_bits(const FeatureMask& mask) {
    std::uint32_t bits = 0;
    const auto& names = FeatureMask::feature_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (mask.get(names[i])) bits |= 1u << i;
    return bits;
}

FeatureMask mask_from_bits(std::uint32_t bits) {
    FeatureMask mask;
    const auto& names = FeatureMask::feature_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (bits & (1u << i)) mask.set(names[i], true);
    return mask;
}

}  // namespace

int text_block_size(int dimension) { return dimension - dimension / 4; }

FeatureVector featurize(const ModelInput& input, const FeatureMask& mask,
                        const TrainConfig& config) {
    if (config.dimension < 4) throw ValidationError("feature dimension must be at least 4");
    const int dim = config.dimension;
    const int text_dim = text_block_size(dim);
    const int cat_dim = dim - text_dim;

    std::map<int, double> acc;
    if (mask.text && !input.content.empty()) {
        std::vector<std::string> tokens = tokenize_words(input.content);
        for (int order : config.ngram_orders) {
            if (order < 1) continue;
            for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
                std::string gram = "t:";
                for (int k = 0; k < order; ++k) {
                    if (k) gram += '\x1e';
                    gram += tokens[i + k];
                }
                acc[static_cast<int>(fnv1a64(gram) % text_dim)] += 1.0;
            }
        }
    }

    auto categorical = [&](const std::string& name) {
        acc[text_dim + static_cast<int>(fnv1a64("c:" + name) % cat_dim)] += 1.0;
    };
    for (const auto& [field, value] : input.categorical_values)
        if (mask_allows_field(mask, field)) categorical(field + "=" + value);
    if (mask.content_types)
        for (const std::string& type : input.content_type_values)
            categorical("content_types=" + type);
    if (mask.id && input.profile_id) categorical("id=" + std::to_string(*input.profile_id));

    FeatureVector out;
    out.dimension = dim;
    out.entries.assign(acc.begin(), acc.end());
    return out;
}

double squared_error_loss(const Eigen::VectorXd& weights, double bias,
                          const std::vector<TrainingExample>& batch) {
    if (batch.empty()) return 0.0;
    double acc = 0.0;
    for (const TrainingExample& ex : batch) {
        double err = sparse_dot(weights, ex.features) + bias - ex.target;
        acc += err * err;
    }
    return acc / static_cast<double>(batch.size());
}

void squared_error_gradient(const Eigen::VectorXd& weights, double bias,
                            const std::vector<TrainingExample>& batch,
                            Eigen::VectorXd* grad_weights, double* grad_bias) {
    grad_weights->setZero(weights.size());
    *grad_bias = 0.0;
    if (batch.empty()) return;
    const double scale = 2.0 / static_cast<double>(batch.size());
    for (const TrainingExample& ex : batch) {
        double err = sparse_dot(weights, ex.features) + bias - ex.target;
        for (const auto& [idx, value] : ex.features.entries)
            (*grad_weights)[idx] += scale * err * value;
        *grad_bias += scale * err;
    }
}

std::vector<TrainingExample> build_training_set(const AnnotationCorpus& corpus,
                                                const FeatureMask& mask, const TrainConfig& config,
                                                const TemplateGrammar& grammar) {
    CorpusIndex index(corpus);
    std::vector<TrainingExample> out;
    out.reserve(corpus.records.size());
    for (const AnnotationRecord& record : corpus.records) {
        const AnnotatorProfile* annotator = index.annotator(record.annotator_key);
        const TextExample* example = index.example(record.example_id);
        if (!annotator || !example)
            throw ValidationError("record references unknown annotator or example");
        ModelInput input =
            assemble_input(*annotator, *example, corpus.schema, grammar, mask, mask.id);
        TrainingExample ex;
        ex.features = featurize(input, mask, config);
        ex.target = static_cast<double>(record.rating);
        out.push_back(std::move(ex));
    }
    return out;
}

RatingModel train_rating_model(const AnnotationCorpus& corpus, const FeatureMask& mask,
                               const TrainConfig& config, const TemplateGrammar& grammar) {
    if (!mask.any()) throw ValidationError("feature mask enables no features");
    if (corpus.records.empty()) throw ValidationError("training corpus has no records");
    if (config.learning_rate <= 0) throw ValidationError("learning_rate must be positive");
    if (config.epochs < 0) throw ValidationError("epochs must be >= 0");
    if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");

    std::vector<TrainingExample> data = build_training_set(corpus, mask, config, grammar);

    RatingModel model;
    model.config = config;
    model.mask = mask;
    model.weights = Eigen::VectorXd::Zero(config.dimension);
    model.bias = 0.0;

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(config.seed);

    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
    std::vector<double> errors;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        deterministic_shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t end = std::min(start + batch_size, order.size());
            errors.clear();
            double check = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const TrainingExample& ex = data[order[i]];
                double err = sparse_dot(model.weights, ex.features) + model.bias - ex.target;
                errors.push_back(err);
                check += err * err;
            }
            if (!std::isfinite(check))
                throw std::runtime_error(
                    "training diverged: non-finite squared error at epoch " +
                    std::to_string(epoch) + "; reduce the learning rate");
            const double scale =
                config.learning_rate * 2.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const TrainingExample& ex = data[order[i]];
                const double step = scale * errors[i - start];
                for (const auto& [idx, value] : ex.features.entries)
                    model.weights[idx] -= step * value;
                model.bias -= step;
            }
        }
    }
    return model;
}

double predict_value(const RatingModel& model, const ModelInput& input) {
    if (model.weights.size() != model.config.dimension)
        throw ValidationError("model weight length does not match its feature dimension");
    FeatureVector x = featurize(input, model.mask, model.config);
    double raw = sparse_dot(model.weights, x) + model.bias;
    return std::clamp(raw, model.config.clip_lo, model.config.clip_hi);
}

RatingPrediction predict_rating(const RatingModel& model, const ModelInput& input) {
    return {input.example_id, input.annotator_key, predict_value(model, input)};
}

std::vector<RatingPrediction> predict_batch(
    const RatingModel& model,
    const std::vector<std::pair<const AnnotatorProfile*, const TextExample*>>& pairs,
    const DatasetSchema& schema, const TemplateGrammar& grammar) {
    std::vector<RatingPrediction> out;
    out.reserve(pairs.size());
    for (const auto& [annotator, example] : pairs) {
        ModelInput input =
            assemble_input(*annotator, *example, schema, grammar, model.mask, model.mask.id);
        out.push_back(predict_rating(model, input));
    }
    return out;
}

std::vector<RatingPrediction> external_predict(const ExternalPredictorOptions& options,
                                               const std::vector<ModelInput>& inputs,
                                               double clip_lo, double clip_hi) {
    if (options.exchange_dir.empty()) throw ValidationError("exchange directory not set");
    fs::create_directories(options.exchange_dir);
    fs::path dir(options.exchange_dir);
    fs::path request_path = dir / "requests.txt";
    fs::path response_path = dir / "responses.txt";
    std::error_code ec;
    fs::remove(response_path, ec);  // stale responses would short-circuit the poll

    {
        fs::path tmp = dir / "requests.txt.tmp";
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write request file in " + options.exchange_dir);
        for (const ModelInput& input : inputs)
            out << input.example_id << '\t' << input.annotator_key << '\t' << input.rendered()
                << '\n';
        out.close();
        fs::rename(tmp, request_path);
    }

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(options.timeout_seconds));
    while (!fs::exists(response_path)) {
        if (std::chrono::steady_clock::now() >= deadline)
            throw std::runtime_error("external predictor timed out after " +
                                     std::to_string(options.timeout_seconds) + " s waiting for " +
                                     response_path.string());
        std::this_thread::sleep_for(
            std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(options.poll_interval_seconds)));
    }

    std::ifstream in(response_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open response file " + response_path.string());
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty()) continue;
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(t, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        if (pos != t.size())
            throw ValidationError("responses.txt:" + std::to_string(line_no) +
                                  ": not a decimal value: '" + t + "'");
        values.push_back(v);
    }
    if (values.size() != inputs.size())
        throw ValidationError("external predictor returned " + std::to_string(values.size()) +
                              " values for " + std::to_string(inputs.size()) + " requests");

    std::vector<RatingPrediction> out;
    out.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (values[i] < clip_lo - 1e-9 || values[i] > clip_hi + 1e-9)
            throw ValidationError("external prediction " + std::to_string(values[i]) +
                                  " outside [" + std::to_string(clip_lo) + ", " +
                                  std::to_string(clip_hi) + "]");
        out.push_back({inputs[i].example_id, inputs[i].annotator_key, values[i]});
    }
    return out;
}

void save_rating_model(const RatingModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    write_u32(out, kRatingMagic);
    write_u32(out, kRatingVersion);
    write_u64(out, static_cast<std::uint64_t>(model.config.dimension));
    write_u32(out, static_cast<std::uint32_t>(model.config.ngram_orders.size()));
    for (int order : model.config.ngram_orders) write_u32(out, static_cast<std::uint32_t>(order));
    write_f64(out, model.config.learning_rate);
    write_u32(out, static_cast<std::uint32_t>(model.config.epochs));
    write_u32(out, static_cast<std::uint32_t>(model.config.batch_size));
    write_u64(out, model.config.seed);
    write_f64(out, model.config.clip_lo);
    write_f64(out, model.config.clip_hi);
    write_u32(out, mask_bits(model.mask));
    write_f64(out, model.bias);
    write_u64(out, static_cast<std::uint64_t>(model.weights.size()));
    for (Eigen::Index i = 0; i < model.weights.size(); ++i) write_f64(out, model.weights[i]);
    if (!out) throw std::runtime_error("failed while writing checkpoint: " + path);
}

RatingModel load_rating_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    if (read_u32(in, path) != kRatingMagic)
        throw ValidationError("not a rating model checkpoint: " + path);
    std::uint32_t version = read_u32(in, path);
    if (version != kRatingVersion)
        throw ValidationError("unsupported rating checkpoint version " + std::to_string(version));

    RatingModel model;
    model.config.dimension = static_cast<int>(read_u64(in, path));
    std::uint32_t n_orders = read_u32(in, path);
    model.config.ngram_orders.clear();
    for (std::uint32_t i = 0; i < n_orders; ++i)
        model.config.ngram_orders.push_back(static_cast<int>(read_u32(in, path)));
    model.config.learning_rate = read_f64(in, path);
    model.config.epochs = static_cast<int>(read_u32(in, path));
    model.config.batch_size = static_cast<int>(read_u32(in, path));
    model.config.seed = read_u64(in, path);
    model.config.clip_lo = read_f64(in, path);
    model.config.clip_hi = read_f64(in, path);
    model.mask = mask_from_bits(read_u32(in, path));
    model.bias = read_f64(in, path);
    std::uint64_t n_weights = read_u64(in, path);
    if (n_weights != static_cast<std::uint64_t>(model.config.dimension))
        throw ValidationError("checkpoint weight count does not match dimension: " + path);
    model.weights.resize(static_cast<Eigen::Index>(n_weights));
    for (std::uint64_t i = 0; i < n_weights; ++i)
        model.weights[static_cast<Eigen::Index>(i)] = read_f64(in, path);
    for (Eigen::Index i = 0; i < model.weights.size(); ++i)
        if (!std::isfinite(model.weights[i]))
            throw ValidationError("checkpoint contains non-finite weights: " + path);
    return model;
}

}  // namespace annolens
