#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adler/data.hpp"
#include "adler/models.hpp"
#include "adler/optimizers.hpp"

namespace adler {

struct DatasetDesc {
    std::string kind;  // gaussian_blobs | two_spirals | idx
    std::size_t n = 0;
    std::size_t test_n = 0;
    int c = 0;
    double noise = 0.0;
    // idx only
    std::string images, labels, test_images, test_labels;
};

struct TrainConfig {
    ModelSpec model;
    DatasetDesc dataset;
    OptimizerConfig optimizer;
    LossKind loss = LossKind::SoftmaxCrossEntropy;
    std::size_t batch_size = 64;
    std::size_t epochs = 1;
    std::uint64_t seed = 1;
    std::string out;

    void validate() const;
};

TrainConfig parse_config_json(const std::string& json_text);
TrainConfig load_config(const std::string& path);
/// Canonical serialization; parse -> serialize is idempotent.
std::string config_to_json(const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct RunResult {
    ParamSet final_params;
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
    double total_wall_ms = 0.0;
    bool diverged = false;
    std::string steps_path, epochs_path;
};

/// Pair of train/test datasets derived deterministically from the config.
std::pair<Dataset, Dataset> build_datasets(const TrainConfig& config);

/// Full training loop; writes steps.jsonl / epochs.jsonl under config.out
/// when set. Non-finite losses abort the run (rethrown unless
/// allow_divergence, which instead flags the result).
RunResult run_training(const TrainConfig& config, bool allow_divergence = false);

struct GridArm {
    double lr = 0.0;
    double final_train_loss = 0.0;
    double final_test_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double wall_ms = 0.0;
    bool diverged = false;
};

struct GridResult {
    std::vector<GridArm> arms;
    std::size_t best_by_train_loss = 0;
    std::size_t best_by_test_acc = 0;
    double total_wall_ms = 0.0;
};

/// Runs SGD once per rate with identical seed and data order; best arm by
/// final training loss (accuracy winner reported separately).
GridResult grid_search(const TrainConfig& config, const std::vector<double>& lr_grid);

/// Flattens one or more steps.jsonl files into a single CSV of
/// (series, k, h_I, eta, eta_hat) rows.
void export_plot_data(const std::vector<std::string>& metrics_paths, const std::string& out_csv);

/// Metrics comparison for the determinism guarantee: wall-time fields are
/// excluded, everything else must match exactly.
bool metrics_equal_ignoring_walltime(const std::string& path_a, const std::string& path_b);

double accuracy(const Tensor& preds, const std::vector<int>& labels);

}  // namespace adler
