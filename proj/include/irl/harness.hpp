#pragma once

#include "irl/environments.hpp"
#include "irl/estimators.hpp"
#include "irl/io.hpp"
#include "irl/metrics.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace irl {

/// Raised for malformed or inconsistent experiment configs; the message
/// starts with the offending JSON path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class EnvironmentKind { obstacleworld, objectworld, mountaincar };
std::string to_string(EnvironmentKind kind);

enum class MaskKind { none, corridor, below_diagonal };

struct MethodSpec {
    /// Label used in results ("MCE-IRL", "CCP", "NPL", ...).
    std::string name;
    RewardKind reward = RewardKind::linear;
    EstimationConfig estimation;
};

struct MountainCarSource {
    std::optional<std::filesystem::path> csv;
    int episodes = 200;
    int steps = 200;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    EnvironmentKind environment = EnvironmentKind::obstacleworld;
    ObstacleworldSpec obstacleworld = ObstacleworldSpec::default_layout();
    ObjectworldSpec objectworld;
    std::uint64_t objectworld_seed = 0;
    MountainCarSpec mountaincar;
    MountainCarSource mountaincar_source;

    ExpertKind expert = ExpertKind::soft_optimal;
    double expert_epsilon = 0.3;
    int horizon = 64;
    MaskKind mask = MaskKind::none;

    std::vector<MethodSpec> methods;
    std::vector<int> trajectories;
    int n_seeds = 3;
    std::uint64_t base_seed = 0;

    bool metric_nll = true;
    bool metric_evd = true;
    bool metric_stochastic_evd = true;
    bool metric_epic = true;
    bool nll_in_sample = false;

    std::filesystem::path output_dir = "results";
    int workers = 0;  ///< 0 selects the hardware concurrency.

    /// The parsed document with defaults filled in.
    Json echo;
};

/// Parses and validates a config document. Unknown keys are errors.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig validate_config(const std::filesystem::path& path);

/// Method defaults by name: MCE-IRL/NFXP (optimization), CCP (K = 1), NPL
/// (K = 10, or 5 on Objectworld).
MethodSpec default_method(const std::string& name, EnvironmentKind env, RewardKind reward);
std::vector<int> default_trajectory_grid(EnvironmentKind env);
int default_seed_count(EnvironmentKind env);

Environment build_environment(const ExperimentConfig& config);

struct ResultRow {
    std::string environment;
    std::string method;
    int n_trajectories = 0;
    std::uint64_t seed = 0;
    double nll = 0.0;
    double evd = 0.0;
    double stochastic_evd = 0.0;
    double epic = 0.0;
    double wall_clock_total = 0.0;
    double inner_step_avg = 0.0;
    double outer_dp_total = 0.0;
};

inline const std::vector<std::string> kResultColumns{
    "environment", "method",         "n_trajectories", "seed",           "nll",           "evd",
    "stochastic_evd", "epic",        "wall_clock_total", "inner_step_avg", "outer_dp_total"};

struct CellFailure {
    std::string method;
    int n_trajectories = 0;
    std::uint64_t seed = 0;
    std::string error;
};

struct CellOutcome {
    ResultRow row;
    MetricReport metrics;
    TimingBreakdown timing;
    bool converged = false;
};

struct ExperimentOutput {
    std::vector<CellOutcome> cells;
    std::vector<CellFailure> failures;
};

/// One (method, trajectory count, seed) cell, without touching the filesystem.
CellOutcome run_cell(const ExperimentConfig& config, const Environment& env, const MethodSpec& method,
                     int n_trajectories, std::uint64_t seed);

/// Runs every cell on a worker pool and writes results.csv, timing.json and
/// manifest.json into config.output_dir.
ExperimentOutput run_experiment(const ExperimentConfig& config);

std::string results_to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> results_from_csv(std::istream& in);

/// Git blob hash: sha1("blob <size>\0" + content), hex encoded.
std::string git_blob_hash(const std::string& content);

/// Mean wall-clock per (environment, trajectory count) and method, with
/// speedups against the MCE-IRL/NFXP baseline.
std::string emit_timing_table(const std::vector<ResultRow>& rows);

/// Speedup label "×N": baseline / time rounded to nearest, 0 when slower.
std::string speedup_label(double baseline_seconds, double method_seconds);

}  // namespace irl
