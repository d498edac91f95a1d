#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "annolens/corpus.hpp"
#include "annolens/feature_mask.hpp"
#include "annolens/templating.hpp"

namespace annolens {

struct TrainConfig {
    int dimension = 1 << 18;
    std::vector<int> ngram_orders = {1, 2};
    double learning_rate = 0.01;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double clip_lo = 0.0;
    double clip_hi = 4.0;
};

// Sparse feature vector: sorted unique indices, finite values.
struct FeatureVector {
    int dimension = 0;
    std::vector<std::pair<int, double>> entries;
};

// Index-space layout: the lower 3/4 of the dimension holds hashed text
// n-grams, the upper quarter holds one-hot categorical features.
int text_block_size(int dimension);

// Hashes the content into the text block (lowercase unigrams + bigrams,
// value = occurrence count) and each enabled annotator response into the
// categorical block (value 1). Deterministic for a fixed config; hash
// collisions are accepted as in standard feature hashing.
FeatureVector featurize(const ModelInput& input, const FeatureMask& mask,
                        const TrainConfig& config);

struct RatingModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    TrainConfig config;
    FeatureMask mask;
};

struct RatingPrediction {
    std::string example_id;
    std::string annotator_key;
    double value = 0.0;  // clipped to [clip_lo, clip_hi]
};

struct TrainingExample {
    FeatureVector features;
    double target = 0.0;
};

// Mean squared error of the linear model (no clipping) over a batch.
double squared_error_loss(const Eigen::VectorXd& weights, double bias,
                          const std::vector<TrainingExample>& batch);

// Analytic gradient of squared_error_loss with respect to (weights, bias).
void squared_error_gradient(const Eigen::VectorXd& weights, double bias,
                            const std::vector<TrainingExample>& batch,
                            Eigen::VectorXd* grad_weights, double* grad_bias);

// Builds one training example per annotation record (rating as regression
// target) under the mask. Requires assigned profile IDs when mask.id is set.
std::vector<TrainingExample> build_training_set(const AnnotationCorpus& corpus,
                                                const FeatureMask& mask, const TrainConfig& config,
                                                const TemplateGrammar& grammar);

// Mini-batch SGD on squared error from zero initialization. Records are
// reshuffled each epoch with a generator seeded from config.seed, so equal
// seeds give byte-identical weights. Aborts with a diagnostic if the loss
// leaves the finite range.
RatingModel train_rating_model(const AnnotationCorpus& corpus, const FeatureMask& mask,
                               const TrainConfig& config,
                               const TemplateGrammar& grammar = TemplateGrammar::builtin());

// clip(w.x + b, clip_lo, clip_hi)
double predict_value(const RatingModel& model, const ModelInput& input);
RatingPrediction predict_rating(const RatingModel& model, const ModelInput& input);

std::vector<RatingPrediction> predict_batch(
    const RatingModel& model,
    const std::vector<std::pair<const AnnotatorProfile*, const TextExample*>>& pairs,
    const DatasetSchema& schema, const TemplateGrammar& grammar = TemplateGrammar::builtin());

// File-exchange protocol for plugging in external predictors: writes
// requests.txt (tab-separated example_id, annotator_key, rendered input),
// then polls for responses.txt holding one decimal value per request line.
// Writers should create the response file atomically (write-then-rename).
struct ExternalPredictorOptions {
    std::string exchange_dir;
    double timeout_seconds = 600.0;
    double poll_interval_seconds = 0.05;
};

std::vector<RatingPrediction> external_predict(const ExternalPredictorOptions& options,
                                               const std::vector<ModelInput>& inputs,
                                               double clip_lo = 0.0, double clip_hi = 4.0);

// Versioned little-endian checkpoint: dimension, mask, bias, weights.
void save_rating_model(const RatingModel& model, const std::string& path);
RatingModel load_rating_model(const std::string& path);

}  // namespace annolens
