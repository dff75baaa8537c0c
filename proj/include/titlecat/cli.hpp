#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "titlecat/container.hpp"
#include "titlecat/corpus.hpp"
#include "titlecat/eval.hpp"

namespace titlecat::cli {

// Everything a command needs, assembled from defaults, an optional
// key=value config file and command-line flags (flag > file > default).
struct RunConfig {
    // data
    std::vector<std::string> data_paths;
    std::string col_title = "title";
    std::string col_title2;
    std::string col_category = "category";
    std::string col_subcategory = "subcategory";
    std::string delimiter = ",";
    std::string locale = "turkish";
    bool namespace_subcategories = false;

    // model
    std::string model_family = "neural";
    std::string encoder = "bi_recurrent";
    bool encoder_explicit = false;
    int hidden_size = 200;
    int dense_size = 100;
    int sequence_cap = 32;
    int embedding_dim = 64;
    bool freeze_embeddings = false;
    bool masking = true;
    bool masking_explicit = false;
    bool bilingual = false;
    bool independent_heads = false;

    // embeddings
    std::string embeddings_primary;
    std::string embeddings_secondary;
    int random_embedding_dim = 0;
    bool inline_embeddings = false;

    // training
    double learning_rate = 1e-3;
    int batch_size = 16;
    int max_epochs = 100;
    int patience = 10;
    double train_fraction = 0.9;
    double linear_c = 1.0;
    int folds = 5;
    std::uint64_t seed = 0;

    // io / per-command
    std::string out_dir;
    std::string model_path;
    std::string input_path;
    std::string title;
    bool show_probs = false;
    int limit = 50;
    int ngram = 2;
    int min_count = 1;
    std::string histogram_path;
    std::string export_taxonomy_path;
    std::string export_vocab_path;

    // synth
    int synth_titles = 200;
    bool synth_bilingual = false;
    std::string synth_out;
};

corpus::LoadSchema make_schema(const RunConfig& config);

// Total validation of flag combinations; throws ConfigError naming the
// offending combination.
void validate_config(const RunConfig& config, const std::string& command);

std::string model_display_name(const RunConfig& config);

struct TrainedModel {
    ModelContainer container;
    std::unique_ptr<eval::Classifier> classifier;
    std::string training_log_csv;
};

TrainedModel train_from_config(const RunConfig& config, const corpus::Dataset& train,
                               const corpus::Dataset& val, std::uint64_t seed);

eval::TrainerFn make_trainer(const RunConfig& config);

int cmd_stats(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_crossval(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);
int cmd_predict(const RunConfig& config, std::ostream& out);
int cmd_audit(const RunConfig& config, std::ostream& out);
int cmd_synth(const RunConfig& config, std::ostream& out);

// Full argument-vector entry point (excluding argv[0]). Exit codes:
// 0 success, 1 usage/config error, 2 data error, 3 training/numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace titlecat::cli
