// Experiment runner: run, table, meshgen, verify.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "hmflow/experiment.hpp"
#include "hmflow/mesh.hpp"
#include "hmflow/tangent_solver.hpp"

namespace fs = std::filesystem;
using namespace hmflow;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverFailure = 2;
constexpr int kIdentityFailure = 3;

ExperimentConfig load_with_overrides(const fs::path& config_path, const std::optional<fs::path>& out)
{
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (out) {
        cfg.output_dir = *out;
    }
    return cfg;
}

int report_failures(const ExperimentResult& result)
{
    int code = kOk;
    for (const auto& e : result.entries) {
        if (e.flow.stopped_by == StopReason::Failure) {
            std::cerr << "hmflow: tau=" << e.tau << ": " << e.flow.failure << "\n";
            code = kSolverFailure;
        }
    }
    if (code != kOk) {
        return code;
    }
    for (const auto& e : result.entries) {
        if (!e.identities) {
            continue;
        }
        for (const auto& c : e.identities->checks) {
            if (!c.passed()) {
                std::cerr << "hmflow: tau=" << e.tau << ": identity " << c.name << " residual " << c.max_residual
                          << " exceeds " << c.threshold << "\n";
                code = kIdentityFailure;
            }
        }
    }
    return code;
}

int cmd_run(const fs::path& config_path, const std::optional<fs::path>& out, int threads, bool table)
{
    const ExperimentConfig cfg = load_with_overrides(config_path, out);
    const ExperimentResult result = run_experiment(cfg, threads);
    if (table) {
        write_table_output(cfg, result, cfg.output_dir);
    } else {
        write_run_outputs(cfg, result, cfg.output_dir);
    }
    return report_failures(result);
}

int cmd_meshgen(int n, const fs::path& path, bool force)
{
    if (fs::exists(path) && !force) {
        std::cerr << "hmflow: " << path.string() << " exists; pass --force to overwrite\n";
        return kConfigError;
    }
    save_mesh(generate_structured_mesh(n), path);
    return kOk;
}

int cmd_verify(const fs::path& config_path, const fs::path& trajectory_path, const std::optional<fs::path>& out)
{
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const Discretization disc = make_discretization(cfg);
    const Trajectory trajectory = load_snapshots(trajectory_path);
    if (!trajectory.fields.empty() && trajectory.fields.front().size() != disc.mesh.num_vertices()) {
        throw ConfigError("trajectory does not match the configured mesh");
    }
    SchemeConfig scheme = cfg.scheme;
    if (!trajectory.taus.empty()) {
        scheme.step.tau = trajectory.taus.front();
    }
    const IdentityReport report = verify_identities(trajectory, scheme, disc.mesh, disc.ops);
    if (out) {
        fs::create_directories(*out);
        std::ofstream file(*out / "residuals.csv", std::ios::binary);
        write_identity_report(file, report);
    } else {
        write_identity_report(std::cout, report);
    }
    return report.all_passed() ? kOk : kIdentityFailure;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Linearly implicit harmonic-map gradient flows into the sphere"};
    app.require_subcommand(1);

    fs::path config_path;
    std::optional<fs::path> out;
    int threads = 1;
    bool force = false;
    int mesh_n = 16;
    fs::path mesh_out;
    fs::path trajectory_path;

    auto* run = app.add_subcommand("run", "Run one experiment or sweep and write trajectory/summary CSVs");
    auto* table = app.add_subcommand("table", "Run a sweep and write a convergence table CSV");
    for (auto* sub : {run, table}) {
        sub->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory (overrides the config)");
        sub->add_option("--threads", threads, "Worker threads for sweep entries")->check(CLI::PositiveNumber);
    }

    auto* meshgen = app.add_subcommand("meshgen", "Write a structured mesh of the unit square");
    meshgen->add_option("--n", mesh_n, "Subdivisions per side")->required()->check(CLI::PositiveNumber);
    meshgen->add_option("--out", mesh_out, "Output mesh file")->required();
    meshgen->add_flag("--force", force, "Overwrite an existing file");

    auto* verify = app.add_subcommand("verify", "Check discrete identities on a stored trajectory");
    verify->add_option("--config", config_path, "Experiment config of the run")->required()->check(CLI::ExistingFile);
    verify->add_option("--trajectory", trajectory_path, "Snapshot file written with save_fields")
        ->required()
        ->check(CLI::ExistingFile);
    verify->add_option("--out", out, "Directory for residuals.csv (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) {
            return cmd_run(config_path, out, threads, false);
        }
        if (*table) {
            return cmd_run(config_path, out, threads, true);
        }
        if (*meshgen) {
            return cmd_meshgen(mesh_n, mesh_out, force);
        }
        if (*verify) {
            return cmd_verify(config_path, trajectory_path, out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "hmflow: " << e.what() << "\n";
        return kConfigError;
    } catch (const MeshError& e) {
        std::cerr << "hmflow: " << e.what() << "\n";
        return kConfigError;
    } catch (const SolverFailure& e) {
        std::cerr << "hmflow: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const std::exception& e) {
        std::cerr << "hmflow: " << e.what() << "\n";
        return kConfigError;
    }
    return kOk;
}
