// SPDX-License-Identifier: Apache-2.0
#include "metalr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "metalr/common.hpp"
#include "metalr/evaluate.hpp"
#include "metalr/stats.hpp"

namespace metalr {

namespace {

const std::vector<std::string>& allowed_keys() {
    static const std::vector<std::string> keys = {
        "task.kind", "task.seed", "task.input_dim", "task.feature_dim", "task.classes", "task.n_source",
        "task.n_target", "task.n_target_test", "task.noise", "task.val_fraction",
        "task.head_correlation", "task.source_csv",
        "task.target_csv", "task.source_images", "task.source_labels", "task.target_images",
        "task.target_labels", "task.test_fraction",
        "model.kind", "model.hidden", "model.conv_channels", "model.kernel", "model.head_reinit",
        "pretrain.iterations", "pretrain.alpha", "pretrain.batch",
        "scheme.kind", "scheme.alpha0", "scheme.policy", "scheme.beta", "scheme.eta", "scheme.validation",
        "scheme.lr_lo", "scheme.lr_hi",
        "train.iterations", "train.batch",
        "oracle.seed", "oracle.noise", "oracle.n_train", "oracle.n_val", "oracle.inner_iterations",
        "oracle.batch", "oracle.grid_min", "oracle.grid_max", "oracle.grid_points",
        "oracle.metalr_iterations", "oracle.alpha0", "oracle.beta", "oracle.lr_lo", "oracle.lr_hi",
        "seeds", "out", "trace",
    };
    return keys;
}

SchemeSpec parse_scheme(const KeyValueConfig& raw) {
    SchemeSpec scheme;
    const std::string kind = raw.get_string("scheme.kind", "metalr");
    scheme.alpha0 = raw.get_double("scheme.alpha0", 1e-3);
    if (kind == "metalr") {
        scheme.kind = SchemeSpec::Kind::MetaLR;
        const std::string policy = raw.get_string("scheme.policy", "proportional");
        if (policy == "proportional") {
            scheme.policy = HyperLRPolicy::proportional(raw.get_double("scheme.beta", 0.1));
        } else if (policy == "constant") {
            scheme.policy = HyperLRPolicy::constant(raw.get_double("scheme.eta", 1e-3));
        } else {
            fail_arg("config key 'scheme.policy': expected proportional or constant, got '", policy, "'");
        }
        const std::string val = raw.get_string("scheme.validation", "separate");
        if (val == "separate") {
            scheme.mode = ValidationMode::SeparateSet;
        } else if (val == "trainset") {
            scheme.mode = ValidationMode::HeldOutTrainingBatch;
        } else {
            fail_arg("config key 'scheme.validation': expected separate or trainset, got '", val, "'");
        }
        scheme.label = "metalr";
    } else if (kind == "all_layers") {
        scheme.kind = SchemeSpec::Kind::AllLayers;
        scheme.label = "all_layers";
    } else if (kind == "last_layer") {
        scheme.kind = SchemeSpec::Kind::LastLayer;
        scheme.label = "last_layer";
    } else if (kind == "layerwise_sweep") {
        scheme.kind = SchemeSpec::Kind::LayerwiseSweep;
        scheme.label = "layerwise_sweep";
    } else {
        fail_arg("config key 'scheme.kind': unknown scheme '", kind, "'");
    }
    return scheme;
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    check_state(os.good(), "cannot open '", path, "' for writing");
    os << text;
    check_state(os.good(), "write failure on '", path, "'");
}

std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(const KeyValueConfig& raw) {
    raw.enforce_schema(allowed_keys(), {});
    ExperimentConfig cfg;
    cfg.raw = raw;

    cfg.task_kind = raw.get_string("task.kind", "synthetic");
    check(cfg.task_kind == "synthetic" || cfg.task_kind == "csv" || cfg.task_kind == "idx",
          "config key 'task.kind': expected synthetic, csv, or idx, got '", cfg.task_kind, "'");
    cfg.synth.seed = raw.get_size("task.seed", 1);
    cfg.synth.input_dim = raw.get_size("task.input_dim", 16);
    cfg.synth.feature_dim = raw.get_size("task.feature_dim", 6);
    cfg.synth.classes = raw.get_size("task.classes", 2);
    cfg.synth.n_source = raw.get_size("task.n_source", 4000);
    cfg.synth.n_target = raw.get_size("task.n_target", 600);
    cfg.synth.n_target_test = raw.get_size("task.n_target_test", 2000);
    cfg.synth.noise = raw.get_double("task.noise", 0.05);
    cfg.synth.val_fraction = raw.get_double("task.val_fraction", 0.25);
    cfg.synth.head_correlation = raw.get_double("task.head_correlation", 0.0);
    cfg.source_csv = raw.get_string("task.source_csv", "");
    cfg.target_csv = raw.get_string("task.target_csv", "");
    cfg.source_images = raw.get_string("task.source_images", "");
    cfg.source_labels = raw.get_string("task.source_labels", "");
    cfg.target_images = raw.get_string("task.target_images", "");
    cfg.target_labels = raw.get_string("task.target_labels", "");
    cfg.test_fraction = raw.get_double("task.test_fraction", 0.25);

    cfg.model_kind = raw.get_string("model.kind", "mlp");
    check(cfg.model_kind == "mlp" || cfg.model_kind == "cnn",
          "config key 'model.kind': expected mlp or cnn, got '", cfg.model_kind, "'");
    if (raw.has("model.hidden")) cfg.hidden = raw.get_size_list("model.hidden");
    if (raw.has("model.conv_channels")) cfg.conv_channels = raw.get_size_list("model.conv_channels");
    cfg.kernel = raw.get_size("model.kernel", 3);
    cfg.head_reinit = raw.get_size("model.head_reinit", 1);

    cfg.pretrain_iterations = raw.get_size("pretrain.iterations", 1000);
    cfg.pretrain_alpha = raw.get_double("pretrain.alpha", 3e-3);
    cfg.pretrain_batch = raw.get_size("pretrain.batch", 32);

    cfg.scheme = parse_scheme(raw);
    cfg.lr_lo = raw.get_double("scheme.lr_lo", 1e-6);
    cfg.lr_hi = raw.get_double("scheme.lr_hi", 1e-2);

    cfg.iterations = raw.get_size("train.iterations", 2000);
    cfg.batch = raw.get_size("train.batch", 32);

    cfg.oracle_seed = raw.get_size("oracle.seed", 7);
    cfg.oracle_noise = raw.get_double("oracle.noise", 0.5);
    cfg.oracle_n_train = raw.get_size("oracle.n_train", 64);
    cfg.oracle_n_val = raw.get_size("oracle.n_val", 64);
    cfg.oracle_inner_iterations = raw.get_size("oracle.inner_iterations", 200);
    cfg.oracle_batch = raw.get_size("oracle.batch", 16);
    cfg.oracle_grid_min = raw.get_double("oracle.grid_min", 1e-3);
    cfg.oracle_grid_max = raw.get_double("oracle.grid_max", 1.0);
    cfg.oracle_grid_points = raw.get_size("oracle.grid_points", 12);
    cfg.oracle_metalr_iterations = raw.get_size("oracle.metalr_iterations", 400);
    cfg.oracle_alpha0 = raw.get_double("oracle.alpha0", 3e-3);
    cfg.oracle_beta = raw.get_double("oracle.beta", 0.1);
    cfg.oracle_lr_lo = raw.get_double("oracle.lr_lo", 1e-4);
    cfg.oracle_lr_hi = raw.get_double("oracle.lr_hi", 1.0);

    if (raw.has("seeds")) cfg.seeds = raw.get_u64_list("seeds");
    check(!cfg.seeds.empty(), "config: seeds list must be nonempty");
    cfg.out_dir = raw.get_string("out", "out");
    cfg.trace = raw.get_bool("trace", true);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(KeyValueConfig::parse_file(path));
}

namespace {

// test split first, then train/validation split of the remainder
TransferTask split_loaded_target(const ExperimentConfig& cfg, Dataset source, Dataset target) {
    TransferTask task;
    task.source = std::move(source);
    auto [pool, test] = split_train_validation(target, cfg.test_fraction,
                                               mix_seed(cfg.synth.seed, "target-test-split"));
    task.target_test = std::move(test);
    auto [train, val] = split_train_validation(pool, cfg.synth.val_fraction,
                                               mix_seed(cfg.synth.seed, "target-val-split"));
    task.target_train = std::move(train);
    task.target_val = std::move(val);
    task.transferability_note = "loaded datasets; transferability unknown a priori";
    return task;
}

Dataset with_channel_axis(Dataset d) {
    const Shape s = d.inputs.shape();
    if (s.size() == 3) {  // [N, H, W] -> [N, 1, H, W]
        d.inputs = d.inputs.reshaped({s[0], 1, s[1], s[2]});
    }
    return d;
}

}  // namespace

TransferTask build_task(const ExperimentConfig& cfg) {
    if (cfg.task_kind == "synthetic") {
        return synth_shared_features_task(cfg.synth);
    }
    if (cfg.task_kind == "csv") {
        check(!cfg.source_csv.empty() && !cfg.target_csv.empty(),
              "config: csv task requires task.source_csv and task.target_csv");
        Dataset source = load_csv(cfg.source_csv, 0, "source");
        Dataset target = load_csv(cfg.target_csv, 0, "target");
        check(source.num_classes == target.num_classes, "csv task: source has ", source.num_classes,
              " classes but target has ", target.num_classes);
        return split_loaded_target(cfg, std::move(source), std::move(target));
    }
    check(!cfg.source_images.empty() && !cfg.source_labels.empty() && !cfg.target_images.empty() &&
              !cfg.target_labels.empty(),
          "config: idx task requires task.{source,target}_{images,labels}");
    Dataset source = load_idx(cfg.source_images, cfg.source_labels, "source");
    Dataset target = load_idx(cfg.target_images, cfg.target_labels, "target");
    if (cfg.model_kind == "cnn") {
        source = with_channel_axis(std::move(source));
        target = with_channel_axis(std::move(target));
    }
    return split_loaded_target(cfg, std::move(source), std::move(target));
}

Model build_model_for_task(const ExperimentConfig& cfg, const TransferTask& task, std::uint64_t seed) {
    const Shape sample = task.source.sample_shape();
    const std::size_t classes = task.source.num_classes;
    check(classes >= 2, "build_model_for_task: task is not classification");
    const std::uint64_t model_seed = mix_seed(seed, "model-init");
    if (cfg.model_kind == "mlp") {
        std::vector<std::size_t> dims;
        dims.push_back(numel(sample));
        for (std::size_t h : cfg.hidden) dims.push_back(h);
        dims.push_back(classes);
        return build_mlp(ModelSpec::mlp(dims, model_seed));
    }
    check(sample.size() == 3, "build_model_for_task: cnn model needs {channels, height, width} samples, "
          "got ", shape_to_string(sample), " (use an idx task)");
    return build_cnn(ModelSpec::cnn(sample, cfg.conv_channels, cfg.kernel, classes, model_seed));
}

SeedOutcome run_pipeline_seed(const ExperimentConfig& cfg, const TransferTask& task,
                              const SchemeSpec& scheme, std::uint64_t seed, const std::string& trace_path,
                              Model* model_out, LRTrace* trace_out) {
    Model model = build_model_for_task(cfg, task, seed);

    if (cfg.pretrain_iterations > 0) {
        finetune_constant(model, task.source, cfg.pretrain_alpha, cfg.pretrain_iterations,
                          cfg.pretrain_batch, LossKind::CrossEntropySoftmax, mix_seed(seed, "pretrain"));
    }
    if (cfg.head_reinit > 0) {
        model.reinit_head(cfg.head_reinit, mix_seed(seed, "head-reinit"));
    }

    SeedOutcome outcome;
    outcome.seed = seed;
    const std::uint64_t finetune_seed = mix_seed(seed, "finetune");
    const Dataset pool = task.target_train_pool();

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    switch (scheme.kind) {
        case SchemeSpec::Kind::MetaLR: {
            MetaTrainOptions opt;
            opt.iterations = cfg.iterations;
            opt.batch_size = cfg.batch;
            opt.loss = LossKind::CrossEntropySoftmax;
            opt.policy = scheme.policy;
            opt.mode = scheme.mode;
            opt.alpha0 = scheme.alpha0;
            opt.lr_lo = cfg.lr_lo;
            opt.lr_hi = cfg.lr_hi;
            opt.stream_seed = finetune_seed;
            opt.record_trace = cfg.trace || trace_out != nullptr;
            MetaTrainResult result;
            if (scheme.mode == ValidationMode::SeparateSet) {
                result = train_metalr(model, task.target_train, &task.target_val, opt);
            } else {
                result = train_metalr(model, pool, nullptr, opt);
            }
            outcome.final_train_loss = result.final_train_loss;
            outcome.final_val_loss = result.final_val_loss;
            if (!trace_path.empty()) {
                result.trace.write_csv_file(trace_path);
                outcome.trace_path = trace_path;
            }
            if (trace_out != nullptr) *trace_out = std::move(result.trace);
            break;
        }
        case SchemeSpec::Kind::AllLayers: {
            SgdResult r = finetune_constant(model, pool, scheme.alpha0, cfg.iterations, cfg.batch,
                                            LossKind::CrossEntropySoftmax, finetune_seed);
            outcome.final_train_loss = r.final_train_loss;
            outcome.final_val_loss = evaluate_loss(model, task.target_val, LossKind::CrossEntropySoftmax);
            break;
        }
        case SchemeSpec::Kind::LastLayer: {
            SgdResult r = finetune_frozen_prefix(model, pool, model.depth() - 1, scheme.alpha0,
                                                 cfg.iterations, cfg.batch, LossKind::CrossEntropySoftmax,
                                                 finetune_seed);
            outcome.final_train_loss = r.final_train_loss;
            outcome.final_val_loss = evaluate_loss(model, task.target_val, LossKind::CrossEntropySoftmax);
            break;
        }
        case SchemeSpec::Kind::LayerwiseSweep: {
            LayerwiseSweepResult r = layerwise_sweep(model, task, scheme.alpha0, cfg.iterations, cfg.batch,
                                                     LossKind::CrossEntropySoftmax, finetune_seed);
            model = std::move(r.best_model);
            outcome.final_train_loss = r.per_k[r.best_k].final_train_loss;
            outcome.final_val_loss = evaluate_loss(model, task.target_val, LossKind::CrossEntropySoftmax);
            break;
        }
    }
    outcome.wall_clock_s = std::chrono::duration<double>(clock::now() - start).count();
    outcome.test_accuracy = evaluate_accuracy(model, task.target_test);
    if (model_out != nullptr) *model_out = std::move(model);
    return outcome;
}

namespace {

RunReport summarize(const std::string& label, const std::string& fingerprint,
                    std::vector<SeedOutcome> outcomes) {
    RunReport report;
    report.scheme_label = label;
    report.fingerprint = fingerprint;
    report.per_seed = std::move(outcomes);
    std::vector<double> accs, clocks;
    for (const SeedOutcome& o : report.per_seed) {
        accs.push_back(o.test_accuracy);
        clocks.push_back(o.wall_clock_s);
    }
    report.mean_accuracy = mean(accs);
    report.std_accuracy = accs.size() >= 2 ? sample_std(accs) : 0.0;
    report.mean_wall_clock_s = mean(clocks);
    return report;
}

RunReport run_scheme(const ExperimentConfig& cfg, const TransferTask& task, const SchemeSpec& scheme) {
    std::vector<SeedOutcome> outcomes;
    for (std::uint64_t seed : cfg.seeds) {
        std::string trace_path;
        if (cfg.trace && scheme.kind == SchemeSpec::Kind::MetaLR) {
            trace_path = join_path(cfg.out_dir,
                                   msg("trace_", scheme.label, "_seed", seed, ".csv"));
        }
        outcomes.push_back(run_pipeline_seed(cfg, task, scheme, seed, trace_path));
    }
    return summarize(scheme.label, config_fingerprint(cfg.raw), std::move(outcomes));
}

}  // namespace

void emit_report(const RunReport& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream csv;
    csv << "scheme,seed,test_accuracy,final_train_loss,final_val_loss,wall_clock_s,trace\n";
    for (const SeedOutcome& o : report.per_seed) {
        csv << report.scheme_label << "," << o.seed << "," << format_g(o.test_accuracy) << ","
            << format_g(o.final_train_loss) << "," << format_g(o.final_val_loss) << ","
            << format_g(o.wall_clock_s) << "," << o.trace_path << "\n";
    }
    write_text_file(join_path(out_dir, "metrics_" + report.scheme_label + ".csv"), csv.str());

    std::ostringstream txt;
    txt << "scheme: " << report.scheme_label << "\n";
    txt << "config_fingerprint: " << report.fingerprint << "\n";
    txt << "seeds: " << report.per_seed.size() << "\n";
    char line[256];
    for (const SeedOutcome& o : report.per_seed) {
        std::snprintf(line, sizeof line, "seed %llu: accuracy %.6f, wall_clock %.3fs\n",
                      static_cast<unsigned long long>(o.seed), o.test_accuracy, o.wall_clock_s);
        txt << line;
    }
    std::snprintf(line, sizeof line, "test_accuracy: %.6f +/- %.6f\n", report.mean_accuracy,
                  report.std_accuracy);
    txt << line;
    std::snprintf(line, sizeof line, "mean_wall_clock_s: %.3f\n", report.mean_wall_clock_s);
    txt << line;
    write_text_file(join_path(out_dir, "summary_" + report.scheme_label + ".txt"), txt.str());
}

RunReport run(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    const TransferTask task = build_task(cfg);
    RunReport report = run_scheme(cfg, task, cfg.scheme);
    emit_report(report, cfg.out_dir);
    return report;
}

std::vector<RunReport> ablation_grid(const ExperimentConfig& cfg) {
    check(cfg.scheme.kind == SchemeSpec::Kind::MetaLR,
          "ablation_grid: base config must use scheme.kind = metalr");
    std::filesystem::create_directories(cfg.out_dir);
    const TransferTask task = build_task(cfg);
    const double eta = cfg.raw.get_double("scheme.eta", 1e-3);
    const double beta = cfg.raw.get_double("scheme.beta", 0.1);

    std::vector<SchemeSpec> schemes;
    {
        SchemeSpec s;
        s.kind = SchemeSpec::Kind::AllLayers;
        s.label = "baseline_all_layers";
        s.alpha0 = cfg.scheme.alpha0;
        schemes.push_back(s);
    }
    struct Variant {
        const char* label;
        bool proportional;
        bool trainset;
    };
    const Variant variants[] = {
        {"metalr_basic", false, false},
        {"metalr_prop", true, false},
        {"metalr_trainset", false, true},
        {"metalr_prop_trainset", true, true},
    };
    for (const Variant& v : variants) {
        SchemeSpec s;
        s.kind = SchemeSpec::Kind::MetaLR;
        s.label = v.label;
        s.alpha0 = cfg.scheme.alpha0;
        s.policy = v.proportional ? HyperLRPolicy::proportional(beta) : HyperLRPolicy::constant(eta);
        s.mode = v.trainset ? ValidationMode::HeldOutTrainingBatch : ValidationMode::SeparateSet;
        schemes.push_back(s);
    }

    std::vector<RunReport> reports;
    for (const SchemeSpec& s : schemes) {
        RunReport r = run_scheme(cfg, task, s);
        emit_report(r, cfg.out_dir);
        reports.push_back(std::move(r));
    }

    std::ostringstream csv;
    csv << "scheme,seeds,mean_accuracy,std_accuracy,mean_wall_clock_s\n";
    for (const RunReport& r : reports) {
        csv << r.scheme_label << "," << r.per_seed.size() << "," << format_g(r.mean_accuracy) << ","
            << format_g(r.std_accuracy) << "," << format_g(r.mean_wall_clock_s) << "\n";
    }
    write_text_file(join_path(cfg.out_dir, "ablation.csv"), csv.str());
    return reports;
}

RunReport read_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    check_state(is.good(), "compare: cannot open '", path, "'");
    std::string line;
    check_state(static_cast<bool>(std::getline(is, line)),
                "compare: '", path, "' is empty");
    check_state(line.rfind("scheme,seed,test_accuracy", 0) == 0, "compare: '", path,
                "' is not a metrics csv (unexpected header '", line, "')");
    std::vector<SeedOutcome> outcomes;
    std::string label;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        check_state(cells.size() >= 6, "compare: malformed row '", line, "' in '", path, "'");
        if (label.empty()) {
            label = cells[0];
        } else {
            check_state(label == cells[0], "compare: mixed scheme labels in '", path, "'");
        }
        SeedOutcome o;
        o.seed = std::stoull(cells[1]);
        o.test_accuracy = std::stod(cells[2]);
        o.final_train_loss = std::stod(cells[3]);
        o.final_val_loss = std::stod(cells[4]);
        o.wall_clock_s = std::stod(cells[5]);
        if (cells.size() >= 7) o.trace_path = cells[6];
        outcomes.push_back(o);
    }
    check_state(!outcomes.empty(), "compare: no data rows in '", path, "'");
    return summarize(label, "", std::move(outcomes));
}

// ---------------------------------------------------------------------------
// bi-level grid oracle

double tiny_problem_val_loss(const TinyProblem& problem, const std::vector<double>& per_layer_alpha) {
    Model model = problem.model;
    SgdOptions opt;
    opt.iterations = problem.inner_iterations;
    opt.batch_size = problem.batch_size;
    opt.loss = problem.loss;
    opt.per_layer_alpha = per_layer_alpha;
    opt.stream_seed = problem.stream_seed;
    try {
        train_sgd(model, problem.train, opt);
        return evaluate_loss(model, problem.val, problem.loss);
    } catch (const DivergenceError&) {
        // a step size that blows the inner run up scores as infinitely bad
        return HUGE_VAL;
    }
}

OracleResult bilevel_oracle(const TinyProblem& problem, const std::vector<double>& alpha_grid) {
    const std::size_t d = problem.model.depth();
    check(d >= 1 && d <= 2, "bilevel_oracle: tiny problems must have 1 or 2 layers, got depth ", d);
    check(!alpha_grid.empty(), "bilevel_oracle: empty grid");
    for (double a : alpha_grid) check(a > 0.0, "bilevel_oracle: grid step sizes must be positive");
    double combos = 1.0;
    for (std::size_t j = 0; j < d; ++j) combos *= static_cast<double>(alpha_grid.size());
    check(combos <= 1e4, "bilevel_oracle: grid too large (", combos, " > 10000 combinations)");

    OracleResult result;
    result.layers = problem.model.layer_groups();
    result.grid = alpha_grid;
    result.best_val_loss = HUGE_VAL;
    const std::size_t total = static_cast<std::size_t>(combos);
    result.val_loss_surface.reserve(total);
    std::vector<double> alphas(d, 0.0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (std::size_t j = d; j-- > 0;) {
            alphas[j] = alpha_grid[rem % alpha_grid.size()];
            rem /= alpha_grid.size();
        }
        const double loss = tiny_problem_val_loss(problem, alphas);
        result.val_loss_surface.push_back(loss);
        if (loss < result.best_val_loss) {
            result.best_val_loss = loss;
            result.best_alpha = alphas;
        }
    }
    return result;
}

TinyProblem reference_tiny_problem(const ExperimentConfig& cfg) {
    // prediction w2 * w1 * x against targets 1.3 x + noise, unit-variance
    // inputs: O(1) curvature, so the bi-level optimum sits inside the default
    // grid [1e-3, 1] rather than at a boundary
    constexpr double kTargetCoeff = 1.3;
    constexpr double kInitWeight = 0.6;

    ModelSpec spec;
    spec.input_shape = {1};
    spec.layers.push_back(LayerDesc::affine(1, /*bias=*/false));
    spec.layers.push_back(LayerDesc::affine(1, /*bias=*/false));
    spec.seed = cfg.oracle_seed;
    TinyProblem problem{Model(spec), Dataset{}, Dataset{}, LossKind::MeanSquaredError,
                        cfg.oracle_inner_iterations, cfg.oracle_batch, mix_seed(cfg.oracle_seed, "inner")};
    for (auto& group : problem.model.mutable_groups()) {
        for (Tensor* t : group.tensors) {
            for (double& v : t->values()) v = kInitWeight;
        }
    }

    auto make_split = [&](std::size_t n, const char* tag) {
        Rng rng(mix_seed(cfg.oracle_seed, tag));
        Tensor inputs({n, 1});
        Tensor labels({n});
        for (std::size_t i = 0; i < n; ++i) {
            const double x = rng.normal();
            inputs[i] = x;
            labels[i] = kTargetCoeff * x + cfg.oracle_noise * rng.normal();
        }
        return Dataset{std::move(inputs), std::move(labels), 0, std::string("tiny-") + tag};
    };
    check(cfg.oracle_batch <= cfg.oracle_n_train, "oracle: batch exceeds n_train");
    problem.train = make_split(cfg.oracle_n_train, "train");
    problem.val = make_split(cfg.oracle_n_val, "val");
    return problem;
}

OracleComparison run_oracle(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    const TinyProblem problem = reference_tiny_problem(cfg);

    check(cfg.oracle_grid_points >= 2, "oracle: need at least 2 grid points");
    check(cfg.oracle_grid_min > 0.0 && cfg.oracle_grid_min < cfg.oracle_grid_max,
          "oracle: need 0 < grid_min < grid_max");
    std::vector<double> grid(cfg.oracle_grid_points);
    const double log_lo = std::log(cfg.oracle_grid_min);
    const double log_hi = std::log(cfg.oracle_grid_max);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(grid.size() - 1);
        grid[i] = std::exp(log_lo + f * (log_hi - log_lo));
    }

    OracleComparison cmp;
    cmp.oracle = bilevel_oracle(problem, grid);

    // online method on the same problem, starting from the same weights
    Model model = problem.model;
    MetaTrainOptions opt;
    opt.iterations = cfg.oracle_metalr_iterations;
    opt.batch_size = problem.batch_size;
    opt.loss = problem.loss;
    opt.policy = HyperLRPolicy::proportional(cfg.oracle_beta);
    opt.mode = ValidationMode::SeparateSet;
    opt.alpha0 = cfg.oracle_alpha0;
    opt.lr_lo = cfg.oracle_lr_lo;
    opt.lr_hi = cfg.oracle_lr_hi;
    opt.stream_seed = mix_seed(cfg.oracle_seed, "metalr");
    opt.record_trace = true;
    MetaTrainResult result = train_metalr(model, problem.train, &problem.val, opt);

    // time-average the last quarter of the trace per layer
    const std::size_t d = problem.model.depth();
    cmp.metalr_final_alpha.assign(d, 0.0);
    const std::size_t tail_start = result.trace.steps.size() - result.trace.steps.size() / 4;
    std::size_t count = 0;
    for (std::size_t t = tail_start; t < result.trace.steps.size(); ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            cmp.metalr_final_alpha[j] += result.trace.steps[t].layers[j].alpha_after;
        }
        ++count;
    }
    check_state(count > 0, "oracle: online run produced no trace");
    for (double& a : cmp.metalr_final_alpha) a /= static_cast<double>(count);

    cmp.metalr_val_loss = tiny_problem_val_loss(problem, cmp.metalr_final_alpha);
    cmp.initial_val_loss = tiny_problem_val_loss(problem, std::vector<double>(d, cfg.oracle_alpha0));

    // surface csv + summary
    std::ostringstream csv;
    csv << "alpha_" << cmp.oracle.layers[0];
    if (d == 2) csv << ",alpha_" << cmp.oracle.layers[1];
    csv << ",val_loss\n";
    const std::size_t g = grid.size();
    for (std::size_t flat = 0; flat < cmp.oracle.val_loss_surface.size(); ++flat) {
        if (d == 2) {
            csv << format_g(grid[flat / g]) << "," << format_g(grid[flat % g]);
        } else {
            csv << format_g(grid[flat]);
        }
        csv << "," << format_g(cmp.oracle.val_loss_surface[flat]) << "\n";
    }
    write_text_file(join_path(cfg.out_dir, "oracle_surface.csv"), csv.str());

    std::ostringstream txt;
    txt << "grid best alpha:";
    for (double a : cmp.oracle.best_alpha) txt << " " << format_g(a);
    txt << "\ngrid best val loss: " << format_g(cmp.oracle.best_val_loss) << "\n";
    txt << "online averaged alpha:";
    for (double a : cmp.metalr_final_alpha) txt << " " << format_g(a);
    txt << "\nonline val loss: " << format_g(cmp.metalr_val_loss) << "\n";
    txt << "initial uniform alpha val loss: " << format_g(cmp.initial_val_loss) << "\n";
    write_text_file(join_path(cfg.out_dir, "oracle_summary.txt"), txt.str());
    return cmp;
}

}  // namespace metalr
