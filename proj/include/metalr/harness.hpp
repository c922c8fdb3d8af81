// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: pretrain -> head reinit -> fine-tune -> evaluate,
// over seeds and schemes, plus the exhaustive bi-level grid oracle used to
// sanity-check the online method on tiny problems.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metalr/baselines.hpp"
#include "metalr/config.hpp"
#include "metalr/model.hpp"
#include "metalr/optimizer.hpp"
#include "metalr/tasks.hpp"

namespace metalr {

struct SchemeSpec {
    enum class Kind { MetaLR, AllLayers, LastLayer, LayerwiseSweep };
    Kind kind = Kind::MetaLR;
    std::string label = "metalr";
    double alpha0 = 1e-3;
    HyperLRPolicy policy = HyperLRPolicy::proportional(0.1);
    ValidationMode mode = ValidationMode::SeparateSet;
};

struct ExperimentConfig {
    KeyValueConfig raw;

    // task
    std::string task_kind = "synthetic";  // synthetic | csv | idx
    SynthTaskParams synth;
    std::string source_csv, target_csv;
    std::string source_images, source_labels, target_images, target_labels;
    double test_fraction = 0.25;

    // model
    std::string model_kind = "mlp";  // mlp | cnn
    std::vector<std::size_t> hidden = {24};
    std::vector<std::size_t> conv_channels = {4};
    std::size_t kernel = 3;
    std::size_t head_reinit = 1;  // 0 skips the reinit step

    // pretrain (on the source domain)
    std::size_t pretrain_iterations = 1000;
    double pretrain_alpha = 3e-3;
    std::size_t pretrain_batch = 32;

    // fine-tune scheme
    SchemeSpec scheme;
    double lr_lo = 1e-6;
    double lr_hi = 1e-2;

    std::size_t iterations = 2000;
    std::size_t batch = 32;

    // oracle verb; the tiny problem has O(1) curvature, so its interesting
    // step sizes live in a wider band than the transfer-task clamp
    std::uint64_t oracle_seed = 7;
    double oracle_noise = 0.5;
    std::size_t oracle_n_train = 64;
    std::size_t oracle_n_val = 64;
    std::size_t oracle_inner_iterations = 200;
    std::size_t oracle_batch = 16;
    double oracle_grid_min = 1e-3;
    double oracle_grid_max = 1.0;
    std::size_t oracle_grid_points = 12;
    std::size_t oracle_metalr_iterations = 400;
    double oracle_alpha0 = 3e-3;
    double oracle_beta = 0.1;
    double oracle_lr_lo = 1e-4;
    double oracle_lr_hi = 1.0;

    std::vector<std::uint64_t> seeds = {0};
    std::string out_dir = "out";
    bool trace = true;
};

ExperimentConfig parse_experiment_config(const KeyValueConfig& raw);
ExperimentConfig load_experiment_config(const std::string& path);

// Builds the experiment's transfer task (shared across seeds).
TransferTask build_task(const ExperimentConfig& cfg);
// Fresh model for one seed, shaped for the task's inputs.
Model build_model_for_task(const ExperimentConfig& cfg, const TransferTask& task, std::uint64_t seed);

struct SeedOutcome {
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;
    double final_train_loss = 0.0;
    double final_val_loss = 0.0;
    double wall_clock_s = 0.0;
    std::string trace_path;  // empty unless a trace was written
};

struct RunReport {
    std::string scheme_label;
    std::string fingerprint;
    std::vector<SeedOutcome> per_seed;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // 0 for a single seed
    double mean_wall_clock_s = 0.0;
};

// One seed of the pretrain -> reinit -> fine-tune -> evaluate pipeline.
// Returns the outcome and leaves the fine-tuned model in `model_out` when the
// caller wants it. trace_path may be empty to skip trace emission.
SeedOutcome run_pipeline_seed(const ExperimentConfig& cfg, const TransferTask& task,
                              const SchemeSpec& scheme, std::uint64_t seed, const std::string& trace_path,
                              Model* model_out = nullptr, LRTrace* trace_out = nullptr);

// Full multi-seed run of the configured scheme; emits metrics, traces, and a
// text summary under cfg.out_dir.
RunReport run(const ExperimentConfig& cfg);

// The four meta-LR variants (constant/proportional hyper-LR x separate/
// training-batch validation) plus the all-layers baseline, all on the same
// seeds. Emits one combined table as well as per-scheme metrics.
std::vector<RunReport> ablation_grid(const ExperimentConfig& cfg);

void emit_report(const RunReport& report, const std::string& out_dir);
RunReport read_metrics_csv(const std::string& path);

// ---------------------------------------------------------------------------
// bi-level grid oracle on tiny problems

struct TinyProblem {
    Model model;
    Dataset train;
    Dataset val;
    LossKind loss = LossKind::MeanSquaredError;
    std::size_t inner_iterations = 200;
    std::size_t batch_size = 16;
    std::uint64_t stream_seed = 0;
};

struct OracleResult {
    std::vector<std::string> layers;
    std::vector<double> grid;
    std::vector<double> best_alpha;
    double best_val_loss = 0.0;
    // row-major over one grid axis per layer, length grid.size()^layers
    std::vector<double> val_loss_surface;
};

// Exhaustive inner training per grid point; the ground truth the online
// method is compared against. Rejects grids beyond 10^4 combinations and
// problems deeper than 2 layers.
OracleResult bilevel_oracle(const TinyProblem& problem, const std::vector<double>& alpha_grid);

// Validation loss of one inner run at a fixed per-layer step-size vector.
double tiny_problem_val_loss(const TinyProblem& problem, const std::vector<double>& per_layer_alpha);

// Two-layer scalar chain regression with label noise; curvature is scaled so
// the interesting step sizes sit inside [1e-4, 1e-2].
TinyProblem reference_tiny_problem(const ExperimentConfig& cfg);

struct OracleComparison {
    OracleResult oracle;
    std::vector<double> metalr_final_alpha;   // time-averaged over the last quarter
    double metalr_val_loss = 0.0;             // inner run at the averaged alphas
    double initial_val_loss = 0.0;            // inner run at the uniform alpha0
};

// Runs the oracle and the online method on the same tiny problem and emits
// the surface + summary under cfg.out_dir.
OracleComparison run_oracle(const ExperimentConfig& cfg);

}  // namespace metalr
