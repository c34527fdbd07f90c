#include "irl/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kPartialFailure = 1;
constexpr int kConfigError = 2;

int cmd_run(const std::string& config_path, int workers, const std::string& out_dir) {
    irl::ExperimentConfig config;
    try {
        config = irl::validate_config(config_path);
    } catch (const irl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    if (const char* env = std::getenv("IRL_OUTPUT_DIR"); env && *env) config.output_dir = env;
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (workers > 0) config.workers = workers;

    irl::ExperimentOutput out;
    try {
        out = irl::run_experiment(config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kPartialFailure;
    }
    std::cout << out.cells.size() << " cell(s) written to " << config.output_dir.string() << '\n';
    for (const auto& f : out.failures)
        std::cerr << "failed: " << f.method << " n=" << f.n_trajectories << " seed=" << f.seed << ": " << f.error
                  << '\n';
    return out.failures.empty() ? kOk : kPartialFailure;
}

int cmd_timing_table(const std::string& results_path) {
    std::ifstream in(results_path);
    if (!in) {
        std::cerr << "cannot open " << results_path << '\n';
        return kConfigError;
    }
    try {
        std::cout << irl::emit_timing_table(irl::results_from_csv(in));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    return kOk;
}

int cmd_validate(const std::string& config_path) {
    try {
        const irl::ExperimentConfig config = irl::validate_config(config_path);
        std::cout << config.echo.dump(2) << '\n';
    } catch (const irl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular inverse reinforcement learning experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, results_path;
    int workers = 0;

    auto* run = app.add_subcommand("run", "Run every cell of an experiment config");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--workers", workers, "Worker threads (default: hardware concurrency)")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory (overrides IRL_OUTPUT_DIR and the config)");

    auto* table = app.add_subcommand("timing-table", "Print mean training times with speedups");
    table->add_option("--results", results_path, "results.csv from a run")->required();

    auto* validate = app.add_subcommand("validate", "Check a config and print it with defaults filled in");
    validate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (*run) return cmd_run(config_path, workers, out_dir);
    if (*table) return cmd_timing_table(results_path);
    return cmd_validate(config_path);
}
