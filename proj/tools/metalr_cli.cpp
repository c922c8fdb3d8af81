// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness CLI.
//
//   metalr run <config>       multi-seed run of the configured scheme
//   metalr ablate <config>    hyper-LR / validation-data ablation grid
//   metalr oracle <config>    bi-level grid oracle vs the online method
//   metalr compare <csv>...   side-by-side table of emitted metrics files
//
// Exit code 0 on success; any failure prints one `error: ...` line on stderr
// and exits nonzero.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metalr/harness.hpp"

namespace {

using metalr::ExperimentConfig;
using metalr::RunReport;

struct CommonFlags {
    std::string seeds;
    std::string out;
    bool trace = false;
    bool no_trace = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--seeds", flags.seeds, "Comma-separated seed list, overrides the config");
    cmd->add_option("--out", flags.out, "Output directory, overrides the config");
    cmd->add_flag("--trace", flags.trace, "Force LR trace emission on");
    cmd->add_flag("--no-trace", flags.no_trace, "Force LR trace emission off");
}

ExperimentConfig load_with_overrides(const std::string& config_path, const CommonFlags& flags) {
    metalr::KeyValueConfig raw = metalr::KeyValueConfig::parse_file(config_path);
    if (!flags.seeds.empty()) raw.set("seeds", flags.seeds);
    if (!flags.out.empty()) raw.set("out", flags.out);
    if (flags.trace && flags.no_trace) {
        metalr::fail_arg("--trace and --no-trace are mutually exclusive");
    }
    if (flags.trace) raw.set("trace", "true");
    if (flags.no_trace) raw.set("trace", "false");
    return metalr::parse_experiment_config(raw);
}

void print_report_line(const RunReport& r) {
    std::printf("%-24s seeds=%zu accuracy=%.6f +/- %.6f wall_clock=%.3fs\n", r.scheme_label.c_str(),
                r.per_seed.size(), r.mean_accuracy, r.std_accuracy, r.mean_wall_clock_s);
}

int cmd_run(const std::string& config_path, const CommonFlags& flags) {
    const ExperimentConfig cfg = load_with_overrides(config_path, flags);
    const RunReport report = metalr::run(cfg);
    print_report_line(report);
    std::printf("config fingerprint: %s\n", report.fingerprint.c_str());
    std::printf("outputs in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_ablate(const std::string& config_path, const CommonFlags& flags) {
    const ExperimentConfig cfg = load_with_overrides(config_path, flags);
    const std::vector<RunReport> reports = metalr::ablation_grid(cfg);
    for (const RunReport& r : reports) print_report_line(r);
    std::printf("outputs in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_oracle(const std::string& config_path, const CommonFlags& flags) {
    const ExperimentConfig cfg = load_with_overrides(config_path, flags);
    const metalr::OracleComparison cmp = metalr::run_oracle(cfg);
    std::printf("grid best alpha:");
    for (double a : cmp.oracle.best_alpha) std::printf(" %.6g", a);
    std::printf("  val_loss=%.6g\n", cmp.oracle.best_val_loss);
    std::printf("online  alpha:");
    for (double a : cmp.metalr_final_alpha) std::printf(" %.6g", a);
    std::printf("  val_loss=%.6g (initial uniform: %.6g)\n", cmp.metalr_val_loss, cmp.initial_val_loss);
    std::printf("outputs in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_compare(const std::vector<std::string>& paths) {
    std::printf("%-24s %6s %12s %12s %12s\n", "scheme", "seeds", "mean_acc", "std_acc", "mean_time_s");
    for (const std::string& path : paths) {
        const RunReport r = metalr::read_metrics_csv(path);
        std::printf("%-24s %6zu %12.6f %12.6f %12.3f\n", r.scheme_label.c_str(), r.per_seed.size(),
                    r.mean_accuracy, r.std_accuracy, r.mean_wall_clock_s);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-learned layer-wise learning rates: experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> compare_paths;
    CommonFlags flags;

    CLI::App* run_cmd = app.add_subcommand("run", "Run the configured fine-tuning scheme");
    run_cmd->add_option("config", config_path, "Experiment config file")->required();
    add_common_flags(run_cmd, flags);

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "Hyper-LR / validation ablation grid");
    ablate_cmd->add_option("config", config_path, "Experiment config file")->required();
    add_common_flags(ablate_cmd, flags);

    CLI::App* oracle_cmd = app.add_subcommand("oracle", "Bi-level grid oracle on the tiny problem");
    oracle_cmd->add_option("config", config_path, "Experiment config file")->required();
    add_common_flags(oracle_cmd, flags);

    CLI::App* compare_cmd = app.add_subcommand("compare", "Tabulate emitted metrics files");
    compare_cmd->add_option("metrics", compare_paths, "metrics_*.csv files")->required();

    try {
        app.parse(argc, argv);
        if (run_cmd->parsed()) return cmd_run(config_path, flags);
        if (ablate_cmd->parsed()) return cmd_ablate(config_path, flags);
        if (oracle_cmd->parsed()) return cmd_oracle(config_path, flags);
        if (compare_cmd->parsed()) return cmd_compare(compare_paths);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
