#include "hmflow/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <utility>

#include "hmflow/diagnostics.hpp"

namespace hmflow {

void SchemeConfig::validate() const
{
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw ConfigError("theta must lie in (0, 1]");
    }
    if (!(mu >= 0.0 && mu <= 1.0)) {
        throw ConfigError("mu must lie in [0, 1]");
    }
    if (!(step.tau > 0.0) || !std::isfinite(step.tau)) {
        throw ConfigError("step size must be positive");
    }
    if (kind == SchemeKind::Bdf2 && step.kind != StepPolicy::Kind::Constant) {
        throw ConfigError("BDF2 supports only a constant step size");
    }
    if (step.kind == StepPolicy::Kind::PrescribedGrowth && !(step.growth >= 0.0)) {
        throw ConfigError("growth constant must be nonnegative");
    }
    if (step.kind == StepPolicy::Kind::Adaptive && !(step.tau_min > 0.0 && step.tau_min < step.tau_max)) {
        throw ConfigError("adaptive steps need 0 < tau_min < tau_max");
    }
    if (!(stop.value > 0.0)) {
        throw ConfigError(stop.kind == StopRule::Kind::Tolerance ? "stopping tolerance must be positive"
                                                                 : "final time must be positive");
    }
    if (stop.kind == StopRule::Kind::FinalTime && !std::isfinite(stop.value)) {
        throw ConfigError("final time must be finite");
    }
    if (stop.max_steps < 1) {
        throw ConfigError("max_steps must be >= 1");
    }
}

SchemeConfig SchemeConfig::euler(Metric metric, StepPolicy step, StopRule stop)
{
    SchemeConfig c;
    c.kind = SchemeKind::ThetaMu;
    c.theta = 1.0;
    c.mu = 0.0;
    c.metric = metric;
    c.step = step;
    c.stop = stop;
    return c;
}

SchemeConfig SchemeConfig::midpoint(Metric metric, StepPolicy step, StopRule stop)
{
    SchemeConfig c = euler(metric, step, stop);
    c.theta = 0.5;
    c.mu = 0.5;
    return c;
}

SchemeConfig SchemeConfig::modified_euler(Metric metric, StepPolicy step, StopRule stop)
{
    SchemeConfig c = euler(metric, step, stop);
    c.mu = 0.5;
    return c;
}

SchemeConfig SchemeConfig::bdf2(Metric metric, double tau, StopRule stop)
{
    SchemeConfig c = euler(metric, StepPolicy::constant(tau), stop);
    c.kind = SchemeKind::Bdf2;
    return c;
}

namespace {

void copy_boundary(const Mesh& mesh, const NodalField& from, NodalField& to)
{
    for (int z : mesh.boundary_vertices()) {
        to[static_cast<std::size_t>(z)] = from[static_cast<std::size_t>(z)];
    }
}

/// Tangent solve for the load -load_scale * K * load_field.
SolveResult solve_with_anchor(const NodalField& anchor, const NodalField& load_field, double load_scale,
                              double coeff, const FlowContext& ctx)
{
    NodalField rhs = ctx.ops->stiffness * load_field;
    rhs.scale(-load_scale);
    const TangentBasis basis = build_tangent_basis(anchor, ctx.mesh->free_vertices());
    return solve_step(ctx.metric, coeff, *ctx.ops, rhs, basis, ctx.solver);
}

}  // namespace

StepOutput euler_step(const FlowState& state, double tau, const FlowContext& ctx)
{
    SolveResult solved = solve_with_anchor(state.u_prev, state.u_prev, 1.0, tau, ctx);
    StepOutput out;
    out.u_new = combine(state.u_prev, tau, solved.w);
    copy_boundary(*ctx.mesh, state.u_prev, out.u_new);
    out.dtu = solved.w;
    out.update = std::move(solved.w);
    out.cg_iterations = solved.iterations;
    out.cg_residual = solved.relative_residual;
    return out;
}

StepOutput theta_mu_step(const FlowState& state, double theta, double mu, double tau, const FlowContext& ctx)
{
    if (state.n < 1 || state.dtu_prev.size() == 0) {
        throw std::logic_error("theta_mu_step needs a previous step; start with euler_step");
    }
    // Extrapolation to t_{n-1} + mu * tau_n along the last secant.
    const NodalField anchor = combine(state.u_prev, mu * tau, state.dtu_prev);
    SolveResult solved = solve_with_anchor(anchor, state.u_prev, 1.0, theta * tau, ctx);
    StepOutput out;
    out.u_new = combine(state.u_prev, tau, solved.w);
    copy_boundary(*ctx.mesh, state.u_prev, out.u_new);
    out.dtu = solved.w;
    out.update = std::move(solved.w);
    out.cg_iterations = solved.iterations;
    out.cg_residual = solved.relative_residual;
    return out;
}

StepOutput bdf2_step(const FlowState& state, double tau, const FlowContext& ctx)
{
    if (state.n < 1 || state.u_prev2.size() == 0) {
        throw std::logic_error("bdf2_step needs two previous iterates; start with euler_step");
    }
    const NodalField& u1 = state.u_prev;
    const NodalField& u2 = state.u_prev2;
    NodalField anchor = u1;
    anchor.scale(2.0).axpy(-1.0, u2);
    NodalField base = u1;
    base.scale(4.0).axpy(-1.0, u2);

    SolveResult solved = solve_with_anchor(anchor, base, 1.0 / 3.0, 2.0 * tau / 3.0, ctx);
    StepOutput out;
    out.u_new = combine(base, 2.0 * tau, solved.w);
    out.u_new.scale(1.0 / 3.0);
    copy_boundary(*ctx.mesh, u1, out.u_new);
    out.dtu = combine(out.u_new, -1.0, u1);
    out.dtu.scale(1.0 / tau);
    out.update = std::move(solved.w);
    out.cg_iterations = solved.iterations;
    out.cg_residual = solved.relative_residual;
    return out;
}

void advance(FlowState& state, StepOutput&& out, double tau)
{
    state.u_prev2 = std::move(state.u_prev);
    state.u_prev = std::move(out.u_new);
    state.dtu_prev = std::move(out.dtu);
    state.tau_prev = tau;
    ++state.n;
}

double next_step_size(const StepPolicy& policy, double tau, double dtu_norm_curr, double dtu_norm_prev)
{
    switch (policy.kind) {
    case StepPolicy::Kind::Constant:
        return policy.tau;
    case StepPolicy::Kind::PrescribedGrowth:
        return tau * std::sqrt(1.0 + policy.growth * tau);
    case StepPolicy::Kind::Adaptive: {
        const double ratio = tau / policy.tau_max;
        const double proposed =
            dtu_norm_curr > dtu_norm_prev ? tau * std::sqrt(std::max(0.0, 1.0 - ratio)) : tau * std::sqrt(1.0 + ratio);
        return std::max(policy.tau_min, proposed);
    }
    }
    return tau;
}

std::string to_string(StopReason reason)
{
    switch (reason) {
    case StopReason::Tolerance:
        return "tolerance";
    case StopReason::FinalTime:
        return "final_time";
    case StopReason::MaxSteps:
        return "max_steps";
    case StopReason::Failure:
        return "failure";
    }
    return "unknown";
}

FlowResult run_flow(const SchemeConfig& config, const NodalField& u0, const Mesh& mesh, const Operators& ops)
{
    config.validate();
    if (u0.size() != mesh.num_vertices()) {
        throw ConfigError("initial field size does not match the mesh");
    }
    for (std::size_t z = 0; z < u0.size(); ++z) {
        if (std::abs(std::sqrt(norm_sq(u0[z])) - 1.0) > 1e-12) {
            throw ConfigError("initial field is not unit length at vertex " + std::to_string(z));
        }
    }

    const FlowContext ctx{&mesh, &ops, config.metric, config.solver};
    const bool tolerance_rule = config.stop.kind == StopRule::Kind::Tolerance;
    FlowResult result;
    FlowState state;
    state.u_prev = u0;
    if (config.keep_fields) {
        result.trajectory.fields.push_back(u0);
    }

    double tau = config.step.tau;
    double t = 0.0;
    double a2 = 0.0;
    double b2 = 0.0;
    double ratio_term = 0.0;
    double prev_dtu_l2 = 0.0;

    for (int n = 1; n <= config.stop.max_steps; ++n) {
        StepOutput out;
        try {
            if (n == 1) {
                out = euler_step(state, tau, ctx);
            } else if (config.kind == SchemeKind::Bdf2) {
                out = bdf2_step(state, tau, ctx);
            } else {
                out = theta_mu_step(state, config.theta, config.mu, tau, ctx);
            }
        } catch (const std::exception& e) {
            result.stopped_by = StopReason::Failure;
            result.failure = "step " + std::to_string(n) + ": " + e.what();
            break;
        }

        StepRecord rec;
        rec.n = n;
        rec.tau = tau;
        t = config.step.kind == StepPolicy::Kind::Constant ? n * tau : t + tau;
        rec.t = t;
        rec.energy = dirichlet_energy(out.u_new, ops.stiffness);
        rec.update_norm_star = norm_star(config.metric, out.update, ops);
        rec.update_grad_norm = norm_grad(out.update, ops);
        rec.dtu_norm_l2 = norm_l2(out.dtu, ops);

        // The first step is an Euler step (implicit weight 1).
        double implicit_weight = 1.0;
        if (n > 1) {
            implicit_weight = config.kind == SchemeKind::Bdf2 ? 2.0 / 3.0 : config.theta;
        }
        rec.stop_quantity = rec.update_norm_star + implicit_weight * tau * rec.update_grad_norm;
        rec.delta_uni = constraint_violation_l1(out.u_new, ops.lumped_mass);
        rec.delta_inf = constraint_violation_linf(out.u_new);

        if (n == 1) {
            b2 = rec.dtu_norm_l2 * rec.dtu_norm_l2;
        } else {
            NodalField second = combine(out.dtu, -1.0, state.dtu_prev);
            second.scale(1.0 / tau);
            const double s = tau / state.tau_prev;
            const double prev_sq = prev_dtu_l2 * prev_dtu_l2;
            a2 += tau * tau * ops.mass.bilinear(second, second);
            ratio_term += state.tau_prev * state.tau_prev * (s * s - 1.0) * prev_sq;
        }
        rec.a2 = a2;
        rec.b2 = b2;
        rec.c2 = rec.dtu_norm_l2 * rec.dtu_norm_l2;
        rec.step_ratio_term = ratio_term;
        rec.cg_iterations = out.cg_iterations;
        rec.cg_residual = out.cg_residual;
        rec.tau_exceeds_max = config.step.kind == StepPolicy::Kind::Adaptive && tau > config.step.tau_max;

        const double curr_dtu_l2 = rec.dtu_norm_l2;
        NodalField before = state.u_prev;
        advance(state, std::move(out), tau);
        if (config.keep_fields) {
            result.trajectory.fields.push_back(state.u_prev);
            result.trajectory.taus.push_back(tau);
        }
        result.records.push_back(rec);

        if (tolerance_rule && rec.stop_quantity <= config.stop.value) {
            result.stopped_by = StopReason::Tolerance;
            result.harmonic_map = std::move(before);
            break;
        }
        if (!tolerance_rule && t >= config.stop.value * (1.0 - 1e-12)) {
            result.stopped_by = StopReason::FinalTime;
            break;
        }

        // The adaptive rule compares two consecutive updates, so tau_2 = tau_1.
        if (config.step.kind != StepPolicy::Kind::Adaptive || n > 1) {
            tau = next_step_size(config.step, tau, curr_dtu_l2, prev_dtu_l2);
        }
        prev_dtu_l2 = curr_dtu_l2;
    }

    result.final_field = state.u_prev;
    if (result.stopped_by != StopReason::Tolerance) {
        result.harmonic_map = state.u_prev;
    }
    return result;
}

}  // namespace hmflow
