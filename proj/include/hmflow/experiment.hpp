#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmflow/diagnostics.hpp"
#include "hmflow/schemes.hpp"

namespace hmflow {

/// Declarative description of one experiment (a single run or a step-size sweep).
///
/// Text format: `key = value` lines grouped under `[section]` headers, `#`
/// comments. Numbers accept `2^-k` and `2^k` besides decimal notation.
///
///     [mesh]     structured = 16  |  file = path/to/mesh.txt
///     [problem]  name = stereo | stereo-perturbed | singular
///     [scheme]   method = euler | midpoint | modified_euler | theta_mu | bdf2
///                theta, mu (theta_mu only), metric = L2 | H1
///     [steps]    policy = constant | prescribed_growth | adaptive
///                tau, growth, tau_min, tau_max, sweep = t1, t2, ...
///     [stop]     tolerance = eps  |  final_time = T, max_steps
///     [solver]   tolerance, max_iterations
///     [output]   dir, save_fields = true|false, verify = true|false
struct ExperimentConfig {
    int structured_n = 16;
    std::filesystem::path mesh_file;
    std::string problem = "stereo-perturbed";
    std::string method = "midpoint";
    SchemeConfig scheme;
    /// Strictly decreasing; empty means a single run with scheme.step.tau.
    std::vector<double> sweep;
    std::filesystem::path output_dir = "out";
    bool save_fields = false;
    bool verify = false;

    /// Step sizes actually run (the sweep, or the single configured step).
    [[nodiscard]] std::vector<double> step_sizes() const;
    void validate() const;
};

[[nodiscard]] ExperimentConfig parse_experiment_config(const std::string& text,
                                                       const std::filesystem::path& base_dir = {});
[[nodiscard]] ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Parses a decimal number or a power of two written `2^k`.
[[nodiscard]] double parse_number(const std::string& text);

struct SweepEntry {
    double tau = 0.0;
    FlowResult flow;
    RunSummary summary;
    std::optional<IdentityReport> identities;
};

struct ExperimentResult {
    std::vector<SweepEntry> entries;
    /// Slopes between consecutive entries (size entries-1).
    std::vector<std::optional<double>> eoc_inf;
    std::vector<std::optional<double>> eoc_uni;

    [[nodiscard]] bool any_failure() const;
    [[nodiscard]] bool identities_passed() const;
};

/// Runs every sweep entry; entries are distributed over `threads` workers and
/// the result does not depend on the thread count.
[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config, int threads = 1);

[[nodiscard]] std::string format_trajectory_csv(const FlowResult& result);
[[nodiscard]] std::string format_summary_csv(const ExperimentResult& result);
/// Convergence table; the A2/B2/C2 columns present depend on the scheme.
[[nodiscard]] std::string format_table_csv(const ExperimentConfig& config, const ExperimentResult& result);

/// Snapshot file: every iterate with its step size, full precision.
[[nodiscard]] std::string format_snapshots(const Trajectory& trajectory);
[[nodiscard]] Trajectory parse_snapshots(const std::string& text);
[[nodiscard]] Trajectory load_snapshots(const std::filesystem::path& path);

/// Writes trajectory/summary (and snapshot/residual) files for a finished experiment.
void write_run_outputs(const ExperimentConfig& config, const ExperimentResult& result,
                       const std::filesystem::path& dir);
void write_table_output(const ExperimentConfig& config, const ExperimentResult& result,
                        const std::filesystem::path& dir);

/// Mesh and operators described by an experiment config.
struct Discretization {
    Mesh mesh;
    Operators ops;
};
[[nodiscard]] Discretization make_discretization(const ExperimentConfig& config);

}  // namespace hmflow
