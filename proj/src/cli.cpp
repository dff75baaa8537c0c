#include "titlecat/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "titlecat/common.hpp"
#include "titlecat/synthetic.hpp"

namespace titlecat::cli {

namespace {

std::string file_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

features::EmbeddingTable restrict_table(const features::EmbeddingTable& table,
                                        const features::Vocabulary& vocab) {
    features::EmbeddingTable out;
    out.dimension = table.dimension;
    for (const auto& token : vocab.tokens()) {
        if (const Eigen::VectorXd* vec = table.find(token)) out.add(token, *vec);
    }
    return out;
}

std::vector<features::TokenSequence> tokenize_titles(const corpus::Dataset& dataset,
                                                     features::Locale locale, bool secondary) {
    std::vector<features::TokenSequence> seqs;
    seqs.reserve(dataset.size());
    for (const auto& p : dataset.products) {
        seqs.push_back(features::tokenize(secondary ? p.title_secondary : p.title_primary, locale));
    }
    return seqs;
}

NeuralPayload payload_from(const neural::ClassifierNetwork& network) {
    NeuralPayload payload;
    payload.encoder = network.spec().encoder;
    payload.heads = network.spec().heads;
    payload.embedding_dim_primary = network.spec().embedding_dim_primary;
    payload.embedding_dim_secondary = network.spec().embedding_dim_secondary;
    payload.theta = network.parameters();
    if (!network.spec().encoder.train_embeddings) {
        payload.frozen_primary = network.frozen_primary();
        payload.frozen_secondary = network.frozen_secondary();
    }
    return payload;
}

std::string config_summary(const RunConfig& config) {
    std::ostringstream out;
    out << "family=" << config.model_family;
    if (config.model_family == "neural") {
        out << " encoder=" << config.encoder << " hidden=" << config.hidden_size
            << " dense=" << config.dense_size << " mask=" << (config.masking ? 1 : 0)
            << " independent_heads=" << (config.independent_heads ? 1 : 0)
            << " lr=" << config.learning_rate << " batch=" << config.batch_size
            << " epochs=" << config.max_epochs << " patience=" << config.patience;
    } else {
        out << " C=" << config.linear_c << " epochs=" << config.max_epochs;
    }
    return out.str();
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory: " + dir);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
}

}  // namespace

corpus::LoadSchema make_schema(const RunConfig& config) {
    corpus::LoadSchema schema;
    schema.title_primary = config.col_title;
    schema.title_secondary = config.col_title2;
    schema.category = config.col_category;
    schema.subcategory = config.col_subcategory;
    if (config.delimiter.size() != 1) {
        throw ConfigError("--delimiter must be a single character");
    }
    schema.delimiter = config.delimiter[0];
    schema.locale = features::parse_locale(config.locale);
    schema.namespace_subcategories = config.namespace_subcategories;
    return schema;
}

void validate_config(const RunConfig& config, const std::string& command) {
    if (config.model_family != "linear" && config.model_family != "neural") {
        throw ConfigError("--model must be linear or neural");
    }
    features::parse_locale(config.locale);
    if (config.delimiter.size() != 1) throw ConfigError("--delimiter must be a single character");

    const bool trains = command == "train" || command == "crossval";
    if (!trains) return;

    if (config.model_family == "linear") {
        if (config.masking_explicit && config.masking) {
            throw ConfigError("--mask requires --model neural (the linear baseline has no masked head)");
        }
        if (config.independent_heads) {
            throw ConfigError("--independent-heads requires --model neural");
        }
        if (config.bilingual) {
            throw ConfigError("--bilingual requires --model neural (dual-tower encoder)");
        }
        if (config.embeddings_primary.empty() && config.random_embedding_dim == 0) {
            throw ConfigError("linear training needs --embeddings-primary or --random-embeddings");
        }
    } else {
        if (config.bilingual) {
            if (config.encoder_explicit && config.encoder != "dual_tower") {
                throw ConfigError("--bilingual requires --encoder dual_tower");
            }
            if (config.col_title2.empty()) {
                throw ConfigError("--bilingual requires a secondary title column (--col-title2)");
            }
            if (config.embeddings_secondary.empty() && config.random_embedding_dim == 0) {
                throw ConfigError(
                    "--bilingual requires --embeddings-secondary or --random-embeddings");
            }
        }
        if (config.encoder == "dual_tower" && config.col_title2.empty()) {
            throw ConfigError("--encoder dual_tower requires a secondary title column (--col-title2)");
        }
        if (config.independent_heads && config.masking_explicit && config.masking) {
            throw ConfigError(
                "--independent-heads trains two single-head networks; masking needs the shared "
                "two-head form");
        }
    }
    if (config.learning_rate <= 0 || config.batch_size < 1 || config.max_epochs < 1 ||
        config.patience < 1) {
        throw ConfigError("training hyperparameters must be positive");
    }
    if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
        throw ConfigError("--train-fraction must lie in (0,1)");
    }
    if (config.linear_c <= 0) throw ConfigError("--C must be positive");
    if (command == "crossval" && config.folds < 2) throw ConfigError("--folds must be >= 2");
    if (command == "train" && config.out_dir.empty()) {
        throw ConfigError("train requires --out (directory for the model container)");
    }
}

std::string model_display_name(const RunConfig& config) {
    if (config.model_family == "linear") return "linear";
    std::string name = config.bilingual && !config.encoder_explicit ? "dual_tower" : config.encoder;
    if (config.independent_heads) name += "+independent";
    name += config.masking && !config.independent_heads ? "+mask" : "+no-mask";
    return name;
}

TrainedModel train_from_config(const RunConfig& config, const corpus::Dataset& train,
                               const corpus::Dataset& val, std::uint64_t seed) {
    features::Locale locale = features::parse_locale(config.locale);
    TrainedModel out;
    ModelContainer& container = out.container;
    container.family = config.model_family;
    container.locale = locale;
    container.seed = seed;
    container.config_summary = config_summary(config);
    container.sequence_cap = config.sequence_cap;
    container.taxonomy = train.taxonomy;
    container.vocab_primary = features::fit_tfidf(tokenize_titles(train, locale, false));

    if (config.model_family == "linear") {
        features::EmbeddingTable table;
        if (!config.embeddings_primary.empty()) {
            table = features::load_embeddings(config.embeddings_primary);
            if (config.inline_embeddings) {
                container.embedding_inline = restrict_table(table, container.vocab_primary);
            } else {
                container.embedding_ref = EmbeddingRef{
                    config.embeddings_primary, fnv1a64_file(config.embeddings_primary),
                    table.dimension};
            }
        } else {
            table = features::random_embedding_table(container.vocab_primary.tokens(),
                                                     config.random_embedding_dim,
                                                     mix_seed(seed, 0x7ab1e));
            container.embedding_inline = table;  // nothing on disk backs a random table
        }

        std::vector<features::DocVector> docs;
        std::vector<std::string> cats, subs;
        docs.reserve(train.size());
        for (const auto& p : train.products) {
            docs.push_back(features::embed_title_weighted(
                features::tokenize(p.title_primary, locale), container.vocab_primary, table));
            cats.push_back(p.category);
            subs.push_back(p.subcategory);
        }
        linear::LinearTrainLog log_cat, log_sub;
        auto cat_model = linear::train_linear_ovr(docs, cats, config.linear_c, config.max_epochs,
                                                  mix_seed(seed, 0xcab), &log_cat);
        auto sub_model = linear::train_linear_ovr(docs, subs, config.linear_c, config.max_epochs,
                                                  mix_seed(seed, 0x5ab), &log_sub);
        container.masking = false;
        container.linear_category = cat_model;
        container.linear_subcategory = sub_model;

        std::ostringstream log;
        log << "epoch,objective_cat,objective_sub\n";
        for (std::size_t e = 0; e < log_cat.epoch_objective.size(); ++e) {
            log << (e + 1) << ',' << log_cat.epoch_objective[e] << ','
                << log_sub.epoch_objective[e] << '\n';
        }
        out.training_log_csv = log.str();
        out.classifier = make_linear_classifier(container.taxonomy, container.vocab_primary,
                                                std::move(table), locale, std::move(cat_model),
                                                std::move(sub_model));
        return out;
    }

    // neural family
    neural::NetworkSpec spec;
    spec.encoder.variant = neural::parse_encoder_variant(
        config.bilingual && !config.encoder_explicit ? "dual_tower" : config.encoder);
    spec.encoder.hidden_size = config.hidden_size;
    spec.encoder.dense_size = config.dense_size;
    spec.encoder.sequence_cap = config.sequence_cap;
    spec.encoder.train_embeddings = !config.freeze_embeddings;
    spec.masking_enabled = config.masking && !config.independent_heads;
    spec.locale = locale;

    const bool dual = spec.encoder.variant == neural::EncoderVariant::dual_tower;
    if (dual) {
        container.vocab_secondary = features::fit_tfidf(tokenize_titles(train, locale, true));
    }

    std::optional<features::EmbeddingTable> table_primary, table_secondary;
    if (!config.embeddings_primary.empty()) {
        table_primary = features::load_embeddings(config.embeddings_primary);
    } else if (config.random_embedding_dim > 0) {
        table_primary = features::random_embedding_table(container.vocab_primary.tokens(),
                                                         config.random_embedding_dim,
                                                         mix_seed(seed, 0x7ab1e));
    }
    if (dual) {
        if (!config.embeddings_secondary.empty()) {
            table_secondary = features::load_embeddings(config.embeddings_secondary);
        } else if (config.random_embedding_dim > 0) {
            table_secondary = features::random_embedding_table(
                container.vocab_secondary->tokens(), config.random_embedding_dim,
                mix_seed(seed, 0x7ab2e));
        }
    }
    spec.embedding_dim_primary = table_primary ? table_primary->dimension : config.embedding_dim;
    spec.embedding_dim_secondary =
        table_secondary ? table_secondary->dimension : config.embedding_dim;

    neural::TrainConfig train_config;
    train_config.learning_rate = config.learning_rate;
    train_config.batch_size = config.batch_size;
    train_config.max_epochs = config.max_epochs;
    train_config.patience = config.patience;

    std::ostringstream log;
    log << "model,epoch,train_loss,val_metric,seconds\n";
    auto build_and_train = [&](neural::HeadSelection heads, std::uint64_t salt,
                               const std::string& log_name) {
        neural::NetworkSpec head_spec = spec;
        head_spec.heads = heads;
        neural::ClassifierNetwork network(
            train.taxonomy, head_spec, container.vocab_primary, container.vocab_secondary,
            mix_seed(seed, salt), table_primary ? &*table_primary : nullptr,
            table_secondary ? &*table_secondary : nullptr);
        neural::TrainConfig tc = train_config;
        tc.seed = mix_seed(seed, salt + 1);
        neural::TrainLog train_log = neural::train_network(network, train, val, tc);
        for (const auto& row : train_log.epochs) {
            log << log_name << ',' << row.epoch << ',' << row.train_loss << ',' << row.val_metric
                << ',' << row.seconds << '\n';
        }
        return network;
    };

    container.masking = spec.masking_enabled;
    if (config.independent_heads) {
        container.independent_heads = true;
        auto net_cat = build_and_train(neural::HeadSelection::category_only, 0x10, "category");
        auto net_sub = build_and_train(neural::HeadSelection::subcategory_only, 0x20, "subcategory");
        container.networks.push_back(payload_from(net_cat));
        container.networks.push_back(payload_from(net_sub));
        out.classifier = make_independent_classifier(std::move(net_cat), std::move(net_sub));
    } else {
        auto network = build_and_train(neural::HeadSelection::both, 0x10, "shared");
        container.networks.push_back(payload_from(network));
        out.classifier = make_neural_classifier(std::move(network));
    }
    out.training_log_csv = log.str();
    return out;
}

eval::TrainerFn make_trainer(const RunConfig& config) {
    return [config](const corpus::Dataset& train, const corpus::Dataset& val,
                    std::uint64_t seed) -> std::unique_ptr<eval::Classifier> {
        TrainedModel trained = train_from_config(config, train, val, seed);
        return std::move(trained.classifier);
    };
}

int cmd_stats(const RunConfig& config, std::ostream& out) {
    corpus::Dataset dataset = corpus::load_dataset(config.data_paths.at(0), make_schema(config));
    features::Locale locale = features::parse_locale(config.locale);
    corpus::CorpusStats stats = corpus::corpus_stats(dataset, config.ngram,
                                                     static_cast<std::size_t>(config.min_count),
                                                     locale);
    out << "titles:           " << stats.title_count << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", stats.mean_title_length);
    out << "mean length:      " << buf << " words\n";
    out << "length quantiles: ";
    for (std::size_t i = 0; i < stats.length_quantiles.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%g", stats.length_quantiles[i]);
        out << (i ? " / " : "") << buf;
    }
    out << "  (min/25%/50%/75%/max)\n";
    out << config.ngram << "-grams with count >= " << config.min_count << ": "
        << stats.ngram_counts.size() << '\n';

    std::vector<std::pair<std::string, std::size_t>> ranked(stats.ngram_counts.begin(),
                                                            stats.ngram_counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::size_t shown = std::min<std::size_t>(ranked.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) {
        out << "  " << ranked[i].first << "  " << ranked[i].second << '\n';
    }

    if (!config.histogram_path.empty()) {
        std::map<std::size_t, std::size_t> hist;
        for (const auto& p : dataset.products) {
            ++hist[features::tokenize(p.title_primary, locale).size()];
        }
        std::ostringstream text;
        text << "length,count\n";
        for (const auto& [len, count] : hist) text << len << ',' << count << '\n';
        write_text_file(config.histogram_path, text.str());
    }
    if (!config.export_taxonomy_path.empty()) {
        corpus::export_taxonomy(dataset.taxonomy, config.export_taxonomy_path);
    }
    if (!config.export_vocab_path.empty()) {
        auto vocab = features::fit_tfidf(tokenize_titles(dataset, locale, false));
        features::export_vocabulary(vocab, config.export_vocab_path);
    }
    return 0;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
    corpus::Dataset dataset = corpus::load_dataset(config.data_paths.at(0), make_schema(config));
    auto [train, val] = corpus::train_val_split(dataset, config.train_fraction, config.seed);
    TrainedModel trained = train_from_config(config, train, val, config.seed);

    eval::MetricsReport report = eval::evaluate(*trained.classifier, val);
    trained.container.val_rank_metric = report.rank;

    ensure_out_dir(config.out_dir);
    std::string model_path = config.out_dir + "/model.tcm";
    save_model(trained.container, model_path);
    write_text_file(config.out_dir + "/train_log.csv", trained.training_log_csv);

    out << "model: " << model_display_name(config) << '\n';
    out << "saved: " << model_path << '\n';
    out << eval::render_report(report);
    return 0;
}

int cmd_crossval(const RunConfig& config, std::ostream& out) {
    corpus::Dataset dataset = corpus::load_dataset(config.data_paths.at(0), make_schema(config));
    eval::CrossvalResult result = eval::run_crossval(make_trainer(config), dataset, config.folds,
                                                     config.seed, config.train_fraction);
    out << eval::render_crossval_table(model_display_name(config), result);
    if (!config.out_dir.empty()) {
        ensure_out_dir(config.out_dir);
        write_text_file(config.out_dir + "/crossval.csv",
                        eval::crossval_csv(model_display_name(config), result));
    }
    return 0;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
    ModelContainer container = load_model(config.model_path);
    auto classifier = make_classifier(container);
    std::vector<std::pair<std::string, corpus::Dataset>> external;
    for (const auto& path : config.data_paths) {
        corpus::LoadSchema schema = make_schema(config);
        schema.source_name = file_stem(path);
        external.emplace_back(file_stem(path), corpus::load_dataset(path, schema));
    }
    auto rows = eval::cross_platform_eval(*classifier, external);
    out << eval::render_transfer_table(rows);
    if (!config.out_dir.empty()) {
        ensure_out_dir(config.out_dir);
        write_text_file(config.out_dir + "/transfer.csv", eval::transfer_csv(rows));
    }
    return 0;
}

int cmd_predict(const RunConfig& config, std::ostream& out) {
    ModelContainer container = load_model(config.model_path);
    auto classifier = make_classifier(container);

    std::vector<std::string> titles;
    if (!config.title.empty()) {
        titles.push_back(config.title);
    } else {
        std::ifstream in(config.input_path, std::ios::binary);
        if (!in) throw DataError("cannot open titles file: " + config.input_path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            titles.push_back(line);
        }
    }
    for (const auto& title : titles) {
        std::string trimmed = title;
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.pop_back();
        if (trimmed.empty()) {
            out << "ERROR\tempty title\n";
            continue;
        }
        corpus::Product product;
        product.title_primary = trimmed;
        eval::Prediction pred = classifier->predict(product);
        out << pred.category << '\t' << pred.subcategory;
        if (config.show_probs) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f", pred.category_prob,
                          pred.subcategory_prob);
            out << buf;
        }
        out << '\n';
    }
    return 0;
}

int cmd_audit(const RunConfig& config, std::ostream& out) {
    ModelContainer container = load_model(config.model_path);
    auto classifier = make_classifier(container);
    corpus::Dataset dataset = corpus::load_dataset(config.data_paths.at(0), make_schema(config));
    auto entries = eval::misprediction_report(*classifier, dataset,
                                              static_cast<std::size_t>(std::max(config.limit, 0)));
    out << eval::render_audit_table(entries);
    if (!config.out_dir.empty()) {
        ensure_out_dir(config.out_dir);
        write_text_file(config.out_dir + "/audit.csv", eval::audit_csv(entries));
    }
    return 0;
}

int cmd_synth(const RunConfig& config, std::ostream& out) {
    synthetic::SyntheticSpec spec;
    spec.titles_per_subcategory = config.synth_titles;
    spec.bilingual = config.synth_bilingual;
    spec.seed = config.seed;
    corpus::Dataset dataset = synthetic::generate(spec);
    synthetic::write_csv(dataset, config.synth_out, spec.bilingual);
    out << "wrote " << dataset.size() << " products ("
        << dataset.taxonomy.category_count() << " categories, "
        << dataset.taxonomy.subcategory_count() << " subcategories) to " << config.synth_out
        << '\n';
    return 0;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"titlecat — two-level product-title classification"};
    app.require_subcommand(1);
    RunConfig cfg;

    CLI::Option* encoder_opt = nullptr;
    CLI::Option* mask_opt = nullptr;

    auto add_data_opts = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--data", cfg.data_paths, "dataset file(s)");
        if (required) opt->required();
        sub->add_option("--col-title", cfg.col_title, "primary title column name");
        sub->add_option("--col-title2", cfg.col_title2, "secondary title column name");
        sub->add_option("--col-category", cfg.col_category, "category column name");
        sub->add_option("--col-subcategory", cfg.col_subcategory, "subcategory column name");
        sub->add_option("--delimiter", cfg.delimiter, "field delimiter (single character)");
        sub->add_option("--locale", cfg.locale, "lowercasing locale: turkish|generic");
        sub->add_flag("--namespace-subcategories", cfg.namespace_subcategories,
                      "prefix subcategory labels with their category");
    };
    auto add_model_opts = [&](CLI::App* sub) {
        sub->add_option("--model", cfg.model_family, "model family: linear|neural");
        encoder_opt = sub->add_option("--encoder", cfg.encoder,
                                      "encoder: mean_pool|bi_recurrent|dual_tower");
        sub->add_option("--hidden", cfg.hidden_size, "recurrent hidden units");
        sub->add_option("--dense", cfg.dense_size, "shared dense layer width");
        sub->add_option("--seq-cap", cfg.sequence_cap, "token cap per title");
        sub->add_option("--embedding-dim", cfg.embedding_dim,
                        "embedding size when no table is supplied");
        sub->add_flag("--freeze-embeddings", cfg.freeze_embeddings,
                      "do not fine-tune embedding vectors");
        mask_opt = sub->add_flag("--mask,!--no-mask", cfg.masking,
                                 "masked softmax on the subcategory head");
        sub->add_flag("--bilingual", cfg.bilingual, "dual-tower over both title languages");
        sub->add_flag("--independent-heads", cfg.independent_heads,
                      "two independently trained single-head networks");
        sub->add_option("--embeddings-primary", cfg.embeddings_primary,
                        "primary-language embedding file");
        sub->add_option("--embeddings-secondary", cfg.embeddings_secondary,
                        "secondary-language embedding file");
        sub->add_option("--random-embeddings", cfg.random_embedding_dim,
                        "use a seeded random embedding table of this dimension");
        sub->add_flag("--inline-embeddings", cfg.inline_embeddings,
                      "bundle embedding vectors into the model container");
    };
    auto add_train_opts = [&](CLI::App* sub) {
        sub->add_option("--lr", cfg.learning_rate, "Adam learning rate");
        sub->add_option("--batch-size", cfg.batch_size, "mini-batch size");
        sub->add_option("--epochs", cfg.max_epochs, "maximum training epochs");
        sub->add_option("--patience", cfg.patience, "early-stopping patience");
        sub->add_option("--train-fraction", cfg.train_fraction, "train share of the split");
        sub->add_option("--C", cfg.linear_c, "linear-model regularization constant");
    };
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->set_config("--config", "", "key=value configuration file");
    };

    CLI::App* stats = app.add_subcommand("stats", "corpus statistics and n-gram counts");
    add_data_opts(stats, true);
    add_common(stats);
    stats->add_option("--ngram", cfg.ngram, "n-gram order");
    stats->add_option("--min-count", cfg.min_count, "n-gram count threshold");
    stats->add_option("--hist", cfg.histogram_path, "write title-length histogram here");
    stats->add_option("--export-taxonomy", cfg.export_taxonomy_path, "write taxonomy file here");
    stats->add_option("--export-vocab", cfg.export_vocab_path, "write (token, df, idf) file here");

    CLI::App* train = app.add_subcommand("train", "train a model and save its container");
    add_data_opts(train, true);
    add_model_opts(train);
    add_train_opts(train);
    add_common(train);

    CLI::App* crossval = app.add_subcommand("crossval", "stratified k-fold cross-validation");
    add_data_opts(crossval, true);
    add_model_opts(crossval);
    add_train_opts(crossval);
    add_common(crossval);
    crossval->add_option("--folds", cfg.folds, "number of folds");

    CLI::App* evalcmd = app.add_subcommand("eval", "cross-platform evaluation of a saved model");
    add_data_opts(evalcmd, true);
    add_common(evalcmd);
    evalcmd->add_option("--model-path", cfg.model_path, "model container")->required();

    CLI::App* predict = app.add_subcommand("predict", "classify titles with a saved model");
    add_common(predict);
    predict->add_option("--model-path", cfg.model_path, "model container")->required();
    predict->add_option("--title", cfg.title, "single title to classify");
    predict->add_option("--input", cfg.input_path, "file with one title per line");
    predict->add_flag("--probs", cfg.show_probs, "append probability columns");

    CLI::App* audit = app.add_subcommand("audit", "misprediction report for a saved model");
    add_data_opts(audit, true);
    add_common(audit);
    audit->add_option("--model-path", cfg.model_path, "model container")->required();
    audit->add_option("--limit", cfg.limit, "maximum rows (0 = all)");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic benchmark corpus");
    add_common(synth);
    synth->add_option("--out-file", cfg.synth_out, "output CSV path")->required();
    synth->add_option("--titles-per-subcategory", cfg.synth_titles, "titles per subcategory");
    synth->add_flag("--bilingual", cfg.synth_bilingual, "split the keyword signal across languages");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    cfg.encoder_explicit = encoder_opt && encoder_opt->count() > 0;
    cfg.masking_explicit = mask_opt && mask_opt->count() > 0;

    std::string command;
    for (CLI::App* sub : {stats, train, crossval, evalcmd, predict, audit, synth}) {
        if (sub->parsed()) command = sub->get_name();
    }

    try {
        validate_config(cfg, command);
        if (command == "predict" && cfg.title.empty() && cfg.input_path.empty()) {
            throw ConfigError("predict needs --title or --input");
        }
        if (command == "stats") return cmd_stats(cfg, out);
        if (command == "train") return cmd_train(cfg, out);
        if (command == "crossval") return cmd_crossval(cfg, out);
        if (command == "eval") return cmd_eval(cfg, out);
        if (command == "predict") return cmd_predict(cfg, out);
        if (command == "audit") return cmd_audit(cfg, out);
        if (command == "synth") return cmd_synth(cfg, out);
        throw ConfigError("no command given");
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const TrainError& e) {
        err << "training error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace titlecat::cli
