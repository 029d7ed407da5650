#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hmflow/fem.hpp"
#include "hmflow/schemes.hpp"

namespace hmflow {

/// sum_z m_z | |u(z)|^2 - 1 |, with m_z the lumped mass.
[[nodiscard]] double constraint_violation_l1(const NodalField& u, const SparseMatrix& lumped_mass);
/// max_z | |u(z)| - 1 |
[[nodiscard]] double constraint_violation_linf(const NodalField& u);

/// Slopes log(err_{k+1}/err_k) / log(step_{k+1}/step_k); -log2 of the error
/// ratio when steps halve. A nonpositive error yields an empty entry.
[[nodiscard]] std::vector<std::optional<double>> eoc(const std::vector<double>& errors,
                                                     const std::vector<double>& steps);

struct RegularityQuantities {
    double a2 = 0.0;  ///< sum_{n>=2} tau_n^2 ||d_t^2 u^n||^2
    double b2 = 0.0;  ///< ||d_t u^1||^2
    double c2 = 0.0;  ///< ||d_t u^N||^2
};

/// Recomputed from the stored iterates (L2 norm, consistent mass).
[[nodiscard]] RegularityQuantities regularity_quantities(const Trajectory& trajectory, const Operators& ops);

/// Per-step values of sum_{k=1}^{m-1} tau_k^2 (s_{k+1}^2 - 1) ||d_t u^k||^2, m = 1..N.
[[nodiscard]] std::vector<double> step_ratio_terms(const Trajectory& trajectory, const Operators& ops);

struct IdentityCheck {
    std::string name;
    int m_first = 0;
    int m_last = 0;
    double max_residual = 0.0;
    double threshold = 0.0;
    /// "relative" or "absolute".
    std::string kind;

    [[nodiscard]] bool passed() const { return max_residual <= threshold; }
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;

    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] const IdentityCheck* find(const std::string& name) const;
};

/// Evaluates both sides of every discrete identity that applies to the
/// scheme, recomputing all norms from the stored iterates.
[[nodiscard]] IdentityReport verify_identities(const Trajectory& trajectory, const SchemeConfig& config,
                                               const Mesh& mesh, const Operators& ops);

/// CSV with columns identity,m_first,m_last,max_residual,threshold,kind,passed.
void write_identity_report(std::ostream& out, const IdentityReport& report);

struct RunSummary {
    int steps = 0;
    StopReason stopped_by = StopReason::MaxSteps;
    double tau_first = 0.0;
    double tau_last = 0.0;
    double final_time = 0.0;
    double energy = 0.0;
    double delta_inf = 0.0;
    double delta_uni = 0.0;
    std::optional<double> delta_ener;
    double a2 = 0.0;
    double b2 = 0.0;
    double c2 = 0.0;
    int total_cg_iterations = 0;
};

/// Quantities of the last computed iterate u^N of a run.
[[nodiscard]] RunSummary summarize(const FlowResult& result, std::optional<double> reference_energy);

}  // namespace hmflow
