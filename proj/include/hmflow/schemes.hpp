#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmflow/fem.hpp"
#include "hmflow/mesh.hpp"
#include "hmflow/tangent_solver.hpp"

namespace hmflow {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class SchemeKind { ThetaMu, Bdf2 };

struct StepPolicy {
    enum class Kind { Constant, PrescribedGrowth, Adaptive };
    Kind kind = Kind::Constant;
    /// Constant step, or the first step for the variable policies.
    double tau = 0.0625;
    /// c in tau_{n+1} = tau_n sqrt(1 + c tau_n).
    double growth = 1.0;
    double tau_min = 0.0;
    double tau_max = 0.0;

    static StepPolicy constant(double tau) { return {Kind::Constant, tau, 1.0, 0.0, 0.0}; }
    static StepPolicy prescribed_growth(double tau1, double c) { return {Kind::PrescribedGrowth, tau1, c, 0.0, 0.0}; }
    static StepPolicy adaptive(double tau1, double tau_min, double tau_max)
    {
        return {Kind::Adaptive, tau1, 1.0, tau_min, tau_max};
    }
};

struct StopRule {
    enum class Kind { Tolerance, FinalTime };
    Kind kind = Kind::Tolerance;
    /// epsilon_stop or T.
    double value = 1e-6;
    /// Hard cap on the number of steps.
    int max_steps = 1'000'000;

    static StopRule tolerance(double eps) { return {Kind::Tolerance, eps, 1'000'000}; }
    static StopRule final_time(double t) { return {Kind::FinalTime, t, 1'000'000}; }
};

struct SchemeConfig {
    SchemeKind kind = SchemeKind::ThetaMu;
    double theta = 0.5;
    double mu = 0.5;
    Metric metric = Metric::H1;
    StepPolicy step;
    StopRule stop;
    SolverOptions solver;
    /// Store every iterate u^0..u^N in the result (needed for verification).
    bool keep_fields = false;

    /// Throws ConfigError on a violated invariant.
    void validate() const;

    static SchemeConfig euler(Metric metric, StepPolicy step, StopRule stop);
    static SchemeConfig midpoint(Metric metric, StepPolicy step, StopRule stop);
    static SchemeConfig modified_euler(Metric metric, StepPolicy step, StopRule stop);
    static SchemeConfig bdf2(Metric metric, double tau, StopRule stop);
};

/// Everything a single step needs besides the state.
struct FlowContext {
    const Mesh* mesh;
    const Operators* ops;
    Metric metric;
    SolverOptions solver;
};

/// State after n completed steps.
struct FlowState {
    int n = 0;
    NodalField u_prev;   ///< u^n (the previous iterate for the next step)
    NodalField u_prev2;  ///< u^{n-1}, empty before the first step
    NodalField dtu_prev; ///< d_t u^n, empty before the first step
    double tau_prev = 0.0;
};

struct StepOutput {
    NodalField u_new;
    /// The solved update: d_t u^n for one-step schemes, the BDF2 derivative for BDF2.
    NodalField update;
    /// Backward difference (u^n - u^{n-1}) / tau_n.
    NodalField dtu;
    int cg_iterations = 0;
    double cg_residual = 0.0;
};

[[nodiscard]] StepOutput euler_step(const FlowState& state, double tau, const FlowContext& ctx);
[[nodiscard]] StepOutput theta_mu_step(const FlowState& state, double theta, double mu, double tau,
                                       const FlowContext& ctx);
[[nodiscard]] StepOutput bdf2_step(const FlowState& state, double tau, const FlowContext& ctx);

/// Advances the state by one step of length `tau` with the output of a stepper.
void advance(FlowState& state, StepOutput&& out, double tau);

/// tau_{n+1} from tau_n. For the adaptive policy the L2 norms of the last two
/// backward differences decide between shrinking and growing.
[[nodiscard]] double next_step_size(const StepPolicy& policy, double tau, double dtu_norm_curr,
                                    double dtu_norm_prev);

struct StepRecord {
    int n = 0;
    double t = 0.0;
    double tau = 0.0;
    double energy = 0.0;
    double update_norm_star = 0.0;  ///< ||d_t u^n||_star (BDF2: ||udot^n||_star)
    double update_grad_norm = 0.0;  ///< ||grad d_t u^n|| (BDF2: ||grad udot^n||)
    double dtu_norm_l2 = 0.0;       ///< ||d_t u^n||
    double stop_quantity = 0.0;
    double delta_uni = 0.0;
    double delta_inf = 0.0;
    double a2 = 0.0;                ///< sum_{k=2}^n tau_k^2 ||d_t^2 u^k||^2
    double b2 = 0.0;                ///< ||d_t u^1||^2
    double c2 = 0.0;                ///< ||d_t u^n||^2
    double step_ratio_term = 0.0;   ///< sum_{k=1}^{n-1} tau_k^2 (s_{k+1}^2 - 1) ||d_t u^k||^2
    int cg_iterations = 0;
    double cg_residual = 0.0;
    bool tau_exceeds_max = false;
};

enum class StopReason { Tolerance, FinalTime, MaxSteps, Failure };

/// Iterates u^0, ..., u^N and the step sizes tau_1, ..., tau_N.
struct Trajectory {
    std::vector<NodalField> fields;
    std::vector<double> taus;
};

struct FlowResult {
    std::vector<StepRecord> records;
    StopReason stopped_by = StopReason::MaxSteps;
    std::string failure;
    /// u^N, the last computed iterate.
    NodalField final_field;
    /// u^{N_stop - 1} for the tolerance rule, u^N otherwise.
    NodalField harmonic_map;
    /// Filled when SchemeConfig::keep_fields is set.
    Trajectory trajectory;

    [[nodiscard]] int steps() const { return static_cast<int>(records.size()); }
};

/// Runs the configured scheme from u0 until the stopping rule fires. Step
/// failures end the run with StopReason::Failure and keep what was computed.
[[nodiscard]] FlowResult run_flow(const SchemeConfig& config, const NodalField& u0, const Mesh& mesh,
                                  const Operators& ops);

[[nodiscard]] std::string to_string(StopReason reason);

}  // namespace hmflow
