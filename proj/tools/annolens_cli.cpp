// annolens command line: corpus ingestion, synthetic generation, model
// training, combined prediction, evaluation, disagreement flagging, and
// feature ablations.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "annolens/ablation.hpp"
#include "annolens/pipeline.hpp"
#include "annolens/synth.hpp"

namespace fs = std::filesystem;
using namespace annolens;

namespace {

struct CommonModelFlags {
    std::string grammar_path;
    int dimension = 1 << 18;
    double learning_rate = 0.01;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--template-grammar", grammar_path,
                        "Template grammar file (defaults to the builtin grammar)");
        cmd->add_option("--dim", dimension, "Feature hashing dimension");
        cmd->add_option("--lr", learning_rate, "SGD learning rate");
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--batch", batch_size, "Mini-batch size");
        cmd->add_option("--seed", seed, "Random seed");
    }

    TrainConfig config() const {
        TrainConfig c;
        c.dimension = dimension;
        c.learning_rate = learning_rate;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.seed = seed;
        return c;
    }

    TemplateGrammar grammar() const {
        return grammar_path.empty() ? TemplateGrammar::builtin()
                                    : TemplateGrammar::load(grammar_path);
    }
};

std::optional<ExternalPredictorOptions> exchange_options(const std::string& flag_dir,
                                                         double timeout) {
    std::string dir = flag_dir;
    if (dir.empty()) {
        const char* env = std::getenv("ANNOLENS_EXCHANGE_DIR");
        if (env && *env) dir = env;
    }
    if (dir.empty()) return std::nullopt;
    ExternalPredictorOptions options;
    options.exchange_dir = dir;
    options.timeout_seconds = timeout;
    return options;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"annolens: annotator rating and target-group modeling toolkit"};
    app.require_subcommand(1);

    // --- ingest ---
    struct {
        std::string annotators, examples, records, schema, out;
    } ingest;
    CLI::App* ingest_cmd = app.add_subcommand("ingest", "Validate a corpus and assign profile IDs");
    ingest_cmd->add_option("--annotators", ingest.annotators)->required();
    ingest_cmd->add_option("--examples", ingest.examples)->required();
    ingest_cmd->add_option("--records", ingest.records)->required();
    ingest_cmd->add_option("--schema", ingest.schema)->required();
    ingest_cmd->add_option("--out", ingest.out, "Output corpus directory")->required();

    // --- split ---
    struct {
        std::string corpus, out;
        double train = 0.8, val = 0.1, test = 0.1;
        std::uint64_t seed = 0;
    } split_args;
    CLI::App* split_cmd = app.add_subcommand("split", "Partition a corpus by example");
    split_cmd->add_option("--corpus", split_args.corpus)->required();
    split_cmd->add_option("--train", split_args.train, "Train fraction");
    split_cmd->add_option("--val", split_args.val, "Validation fraction");
    split_cmd->add_option("--test", split_args.test, "Test fraction");
    split_cmd->add_option("--seed", split_args.seed);
    split_cmd->add_option("--out", split_args.out, "Output directory (train/ val/ test/)")
        ->required();

    // --- train-rating ---
    struct {
        std::string corpus, mask = "all", out;
        CommonModelFlags common;
    } train_rating;
    CLI::App* train_rating_cmd =
        app.add_subcommand("train-rating", "Train the per-annotator rating model");
    train_rating_cmd->add_option("--corpus", train_rating.corpus)->required();
    train_rating_cmd->add_option("--mask", train_rating.mask,
                                 "Feature mask spec, e.g. text+demographics+survey");
    train_rating_cmd->add_option("--out", train_rating.out, "Checkpoint path")->required();
    train_rating.common.attach(train_rating_cmd);

    // --- train-target ---
    struct {
        std::string corpus, map, out;
        double threshold = 0.5;
        CommonModelFlags common;
    } train_target;
    CLI::App* train_target_cmd =
        app.add_subcommand("train-target", "Train the target-group prediction model");
    train_target_cmd->add_option("--corpus", train_target.corpus)->required();
    train_target_cmd->add_option("--map", train_target.map, "Normalization map file")->required();
    train_target_cmd->add_option("--threshold", train_target.threshold);
    train_target_cmd->add_option("--out", train_target.out, "Checkpoint path")->required();
    train_target.common.attach(train_target_cmd);

    // --- predict ---
    struct {
        std::string corpus, rating_model, target_model, map, out, grammar_path, exchange_dir;
        double exchange_timeout = 600.0;
    } predict_args;
    CLI::App* predict_cmd =
        app.add_subcommand("predict", "Predict ratings (and optionally target groups)");
    predict_cmd->add_option("--corpus", predict_args.corpus)->required();
    predict_cmd->add_option("--rating-model", predict_args.rating_model)->required();
    predict_cmd->add_option("--target-model", predict_args.target_model);
    predict_cmd->add_option("--map", predict_args.map);
    predict_cmd->add_option("--template-grammar", predict_args.grammar_path);
    predict_cmd->add_option("--exchange-dir", predict_args.exchange_dir,
                            "External-predictor exchange directory (or ANNOLENS_EXCHANGE_DIR)");
    predict_cmd->add_option("--exchange-timeout", predict_args.exchange_timeout);
    predict_cmd->add_option("--out", predict_args.out, "Output directory")->required();

    // --- evaluate ---
    struct {
        std::string corpus, rating_model, target_model, map, embeddings, categories, out;
        std::string grammar_path, exchange_dir;
        double exchange_timeout = 600.0;
        bool gold = false, predicted = false, both = false;
        std::size_t min_count = 5;
        bool wmd_filter_stopwords = false;
    } eval_args;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Compute the full metrics report");
    eval_cmd->add_option("--corpus", eval_args.corpus)->required();
    eval_cmd->add_option("--rating-model", eval_args.rating_model)->required();
    eval_cmd->add_option("--target-model", eval_args.target_model)->required();
    eval_cmd->add_option("--map", eval_args.map)->required();
    eval_cmd->add_flag("--gold-targets", eval_args.gold, "Target metrics from gold sets only");
    eval_cmd->add_flag("--predicted-targets", eval_args.predicted,
                       "Target metrics from predicted sets only");
    eval_cmd->add_flag("--both", eval_args.both, "Both target metric variants (default)");
    eval_cmd->add_option("--embeddings", eval_args.embeddings, "Embedding file for WMD");
    eval_cmd->add_option("--categories", eval_args.categories, "Group -> category map file");
    eval_cmd->add_option("--min-count", eval_args.min_count, "Low-support breakdown threshold");
    eval_cmd->add_flag("--wmd-filter-stopwords", eval_args.wmd_filter_stopwords);
    eval_cmd->add_option("--template-grammar", eval_args.grammar_path);
    eval_cmd->add_option("--exchange-dir", eval_args.exchange_dir);
    eval_cmd->add_option("--exchange-timeout", eval_args.exchange_timeout);
    eval_cmd->add_option("--out", eval_args.out, "Output directory")->required();

    // --- flag ---
    struct {
        std::string corpus, rating_model, target_model, map, out, grammar_path;
        double gap_threshold = 1.0;
        double variance_threshold = 1.0;
        bool overall_from_truth = false;
    } flag_args;
    CLI::App* flag_cmd =
        app.add_subcommand("flag", "Flag examples where the target group disagrees");
    flag_cmd->add_option("--corpus", flag_args.corpus)->required();
    flag_cmd->add_option("--rating-model", flag_args.rating_model)->required();
    flag_cmd->add_option("--target-model", flag_args.target_model)->required();
    flag_cmd->add_option("--map", flag_args.map)->required();
    flag_cmd->add_option("--gap-threshold", flag_args.gap_threshold);
    flag_cmd->add_option("--variance-threshold", flag_args.variance_threshold);
    flag_cmd->add_flag("--overall-from-truth", flag_args.overall_from_truth,
                       "Compare target means against recorded ratings instead of predictions");
    flag_cmd->add_option("--template-grammar", flag_args.grammar_path);
    flag_cmd->add_option("--out", flag_args.out, "Flags output file")->required();

    // --- ablate ---
    struct {
        std::string train_dir, val_dir, out;
        std::string features;
        std::string spec;
        std::size_t k = 3;
        double epsilon = 0.0;
        CommonModelFlags common;
    } ablate_args;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Feature ablation experiments");
    ablate_cmd->require_subcommand(1);
    CLI::App* ablate_single = ablate_cmd->add_subcommand("single", "Single-feature sweep");
    CLI::App* ablate_forward = ablate_cmd->add_subcommand("forward", "Forward feature selection");
    CLI::App* ablate_masks = ablate_cmd->add_subcommand("masks", "Named-mask comparison");
    for (CLI::App* sub : {ablate_single, ablate_forward, ablate_masks}) {
        sub->add_option("--train", ablate_args.train_dir, "Training corpus directory")->required();
        sub->add_option("--val", ablate_args.val_dir, "Validation corpus directory")->required();
        sub->add_option("--out", ablate_args.out, "Output directory")->required();
        ablate_args.common.attach(sub);
    }
    ablate_single->add_option("--features", ablate_args.features,
                              "Comma-separated feature names (default: all)");
    ablate_forward->add_option("--features", ablate_args.features);
    ablate_forward->add_option("--k", ablate_args.k, "Maximum features to select");
    ablate_forward->add_option("--epsilon", ablate_args.epsilon, "Minimum improvement per step");
    ablate_masks->add_option("--spec", ablate_args.spec, "File of name<TAB>mask-spec lines")
        ->required();

    // --- synth ---
    struct {
        std::string config, out;
    } synth_args;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth_cmd->add_option("--config", synth_args.config, "Generator config file")->required();
    synth_cmd->add_option("--out", synth_args.out, "Output corpus directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest_cmd) {
            AnnotationCorpus corpus = load_corpus(
                {ingest.annotators, ingest.examples, ingest.records, ingest.schema});
            corpus = assign_profile_ids(std::move(corpus));
            save_corpus_dir(corpus, ingest.out);
            std::cout << "ingested " << corpus.annotators.size() << " annotators, "
                      << corpus.examples.size() << " examples, " << corpus.records.size()
                      << " records -> " << ingest.out << "\n";
        } else if (*split_cmd) {
            AnnotationCorpus corpus = load_corpus_dir(split_args.corpus);
            CorpusSplits splits = split_corpus(
                corpus, {split_args.train, split_args.val, split_args.test}, split_args.seed);
            save_corpus_dir(splits.train, (fs::path(split_args.out) / "train").string());
            save_corpus_dir(splits.val, (fs::path(split_args.out) / "val").string());
            save_corpus_dir(splits.test, (fs::path(split_args.out) / "test").string());
            std::cout << "split " << corpus.examples.size() << " examples into "
                      << splits.train.examples.size() << "/" << splits.val.examples.size() << "/"
                      << splits.test.examples.size() << "\n";
        } else if (*train_rating_cmd) {
            AnnotationCorpus corpus = load_corpus_dir(train_rating.corpus);
            FeatureMask mask = FeatureMask::parse(train_rating.mask);
            if (mask.id) corpus = assign_profile_ids(std::move(corpus));
            TemplateGrammar grammar = train_rating.common.grammar();
            RatingModel model =
                train_rating_model(corpus, mask, train_rating.common.config(), grammar);
            save_rating_model(model, train_rating.out);
            std::cout << "trained rating model (mask " << mask.to_string() << ") -> "
                      << train_rating.out << "\n";
        } else if (*train_target_cmd) {
            AnnotationCorpus corpus = load_corpus_dir(train_target.corpus);
            NormalizationMap map = NormalizationMap::load(train_target.map);
            std::vector<TextExample> labeled;
            for (const TextExample& e : corpus.examples)
                if (e.gold_target_groups) labeled.push_back(e);
            if (labeled.empty())
                throw ValidationError("corpus has no examples with gold target groups");
            TargetModel model = train_target_model(labeled, map, train_target.common.config(),
                                                   train_target.threshold);
            save_target_model(model, train_target.out);
            std::cout << "trained target model over " << model.classifiers.size()
                      << " groups -> " << train_target.out << "\n";
        } else if (*predict_cmd) {
            AnnotationCorpus corpus = load_corpus_dir(predict_args.corpus);
            RatingModel rating_model = load_rating_model(predict_args.rating_model);
            if (rating_model.mask.id) corpus = assign_profile_ids(std::move(corpus));
            TemplateGrammar grammar = predict_args.grammar_path.empty()
                                          ? TemplateGrammar::builtin()
                                          : TemplateGrammar::load(predict_args.grammar_path);
            CorpusIndex index(corpus);
            fs::create_directories(predict_args.out);

            std::vector<ModelInput> inputs;
            for (const TextExample& example : corpus.examples)
                for (const AnnotationRecord* record : index.records_of(example.example_id))
                    inputs.push_back(assemble_input(*index.annotator(record->annotator_key),
                                                    example, corpus.schema, grammar,
                                                    rating_model.mask, rating_model.mask.id));
            std::vector<RatingPrediction> predictions;
            auto exchange =
                exchange_options(predict_args.exchange_dir, predict_args.exchange_timeout);
            if (exchange) {
                predictions = external_predict(*exchange, inputs, rating_model.config.clip_lo,
                                               rating_model.config.clip_hi);
            } else {
                for (const ModelInput& input : inputs)
                    predictions.push_back(predict_rating(rating_model, input));
            }
            std::string lines;
            for (const RatingPrediction& p : predictions)
                lines += p.example_id + "\t" + p.annotator_key + "\t" + format_value(p.value) +
                         "\n";
            write_text_file((fs::path(predict_args.out) / "predictions.txt").string(), lines);

            if (!predict_args.target_model.empty()) {
                if (predict_args.map.empty())
                    throw ValidationError("--target-model requires --map");
                TargetModel target_model = load_target_model(predict_args.target_model);
                NormalizationMap map = NormalizationMap::load(predict_args.map);
                std::string jsonl;
                std::string phrase_lines;
                for (const TextExample& example : corpus.examples) {
                    TargetGroupReport report = run_combined(example, corpus, index, rating_model,
                                                            target_model, map, grammar);
                    jsonl += report.to_json() + "\n";
                    phrase_lines +=
                        example.example_id + "\t" + report.predicted_phrases.to_string() + "\n";
                }
                write_text_file((fs::path(predict_args.out) / "combined.jsonl").string(), jsonl);
                write_text_file((fs::path(predict_args.out) / "target_phrases.txt").string(),
                                phrase_lines);
            }
            std::cout << "wrote " << predictions.size() << " predictions -> " << predict_args.out
                      << "\n";
        } else if (*eval_cmd) {
            if (eval_args.gold + eval_args.predicted + eval_args.both > 1)
                throw ValidationError(
                    "choose one of --gold-targets, --predicted-targets, --both");
            AnnotationCorpus corpus = load_corpus_dir(eval_args.corpus);
            RatingModel rating_model = load_rating_model(eval_args.rating_model);
            if (rating_model.mask.id) corpus = assign_profile_ids(std::move(corpus));
            TargetModel target_model = load_target_model(eval_args.target_model);
            NormalizationMap map = NormalizationMap::load(eval_args.map);

            EvaluateOptions options;
            if (eval_args.gold) options.mode = TargetMetricMode::gold;
            else if (eval_args.predicted) options.mode = TargetMetricMode::predicted;
            else options.mode = TargetMetricMode::both;
            options.breakdown_min_count = eval_args.min_count;
            options.wmd_filter_stopwords = eval_args.wmd_filter_stopwords;

            TemplateGrammar grammar = eval_args.grammar_path.empty()
                                          ? TemplateGrammar::builtin()
                                          : TemplateGrammar::load(eval_args.grammar_path);
            options.grammar = &grammar;
            EmbeddingTable embeddings;
            if (!eval_args.embeddings.empty()) {
                embeddings = EmbeddingTable::load(eval_args.embeddings);
                options.embeddings = &embeddings;
            }
            std::map<std::string, std::string> categories;
            if (!eval_args.categories.empty()) {
                categories = load_category_map(eval_args.categories);
                options.category_map = &categories;
            }
            auto exchange = exchange_options(eval_args.exchange_dir, eval_args.exchange_timeout);
            if (exchange) options.external = &*exchange;

            MetricsReport report = evaluate(corpus, rating_model, target_model, map, options);
            write_report_files(report, eval_args.out);
            std::cout << "individual_mae " << format_value(report.individual_mae)
                      << "  aggregate_mae " << format_value(report.aggregate_mae);
            if (report.variance_mae)
                std::cout << "  variance_mae " << format_value(*report.variance_mae);
            std::cout << "\nreport -> " << eval_args.out << "\n";
        } else if (*flag_cmd) {
            AnnotationCorpus corpus = load_corpus_dir(flag_args.corpus);
            RatingModel rating_model = load_rating_model(flag_args.rating_model);
            if (rating_model.mask.id) corpus = assign_profile_ids(std::move(corpus));
            TargetModel target_model = load_target_model(flag_args.target_model);
            NormalizationMap map = NormalizationMap::load(flag_args.map);
            TemplateGrammar grammar = flag_args.grammar_path.empty()
                                          ? TemplateGrammar::builtin()
                                          : TemplateGrammar::load(flag_args.grammar_path);
            CorpusIndex index(corpus);
            std::vector<TargetGroupReport> reports;
            for (const TextExample& example : corpus.examples)
                reports.push_back(run_combined(example, corpus, index, rating_model, target_model,
                                               map, grammar, flag_args.overall_from_truth));
            std::vector<DisagreementFlag> flags = flag_disagreement(
                reports, flag_args.gap_threshold, flag_args.variance_threshold);
            write_text_file(flag_args.out, flags_to_text(flags));
            std::cout << flags.size() << " flags -> " << flag_args.out << "\n";
        } else if (*ablate_cmd) {
            AnnotationCorpus train = load_corpus_dir(ablate_args.train_dir);
            AnnotationCorpus val = load_corpus_dir(ablate_args.val_dir);
            TrainConfig config = ablate_args.common.config();
            TemplateGrammar grammar = ablate_args.common.grammar();

            std::vector<std::string> features;
            if (!ablate_args.features.empty()) {
                for (const std::string& f : split(ablate_args.features, ','))
                    if (!trim(f).empty()) features.push_back(trim(f));
            } else {
                for (const std::string& n : FeatureMask::feature_names())
                    if (n != "text") features.push_back(n);
            }

            fs::create_directories(ablate_args.out);
            if (*ablate_single) {
                // profile IDs are needed whenever the id feature is in play
                train = assign_profile_ids(std::move(train));
                val = assign_profile_ids(std::move(val));
                std::vector<AblationResult> rows =
                    single_feature_sweep(train, val, features, config, grammar);
                write_text_file((fs::path(ablate_args.out) / "ablation.txt").string(),
                                ablation_table_text(rows));
                write_text_file((fs::path(ablate_args.out) / "ablation.json").string(),
                                ablation_table_json(rows));
                std::cout << ablation_table_text(rows);
            } else if (*ablate_forward) {
                train = assign_profile_ids(std::move(train));
                val = assign_profile_ids(std::move(val));
                std::vector<SelectionStep> steps = forward_selection(
                    train, val, features, ablate_args.k, ablate_args.epsilon, config, grammar);
                std::string text = "step\tfeature\tindividual_mae\n";
                for (std::size_t i = 0; i < steps.size(); ++i)
                    text += std::to_string(i + 1) + "\t" + steps[i].feature + "\t" +
                            format_value(steps[i].individual_mae) + "\n";
                write_text_file((fs::path(ablate_args.out) / "forward_selection.txt").string(),
                                text);
                std::cout << text;
            } else if (*ablate_masks) {
                std::ifstream spec(ablate_args.spec, std::ios::binary);
                if (!spec) throw ValidationError("cannot open mask spec: " + ablate_args.spec);
                std::vector<std::pair<std::string, FeatureMask>> masks;
                std::string line;
                bool needs_ids = false;
                while (std::getline(spec, line)) {
                    if (trim(line).empty() || line[0] == '#') continue;
                    std::vector<std::string> cols = split(line, '\t');
                    if (cols.size() != 2)
                        throw ValidationError("mask spec lines must be name<TAB>mask");
                    masks.emplace_back(trim(cols[0]), FeatureMask::parse(trim(cols[1])));
                    needs_ids = needs_ids || masks.back().second.id;
                }
                if (needs_ids) {
                    train = assign_profile_ids(std::move(train));
                    val = assign_profile_ids(std::move(val));
                }
                std::vector<AblationResult> rows =
                    masked_comparison(train, val, masks, config, grammar);
                write_text_file((fs::path(ablate_args.out) / "ablation.txt").string(),
                                ablation_table_text(rows));
                write_text_file((fs::path(ablate_args.out) / "ablation.json").string(),
                                ablation_table_json(rows));
                std::cout << ablation_table_text(rows);
            }
        } else if (*synth_cmd) {
            GeneratorConfig config = GeneratorConfig::load(synth_args.config);
            std::vector<AnnotatorProfile> population = generate_population(config);
            SyntheticCorpus synth = generate_corpus(population, config);
            save_synthetic_corpus(synth, synth_args.out);
            std::cout << "generated " << synth.corpus.annotators.size() << " annotators, "
                      << synth.corpus.examples.size() << " examples, "
                      << synth.corpus.records.size() << " records -> " << synth_args.out << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
