#include "hmflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace hmflow {

namespace {

constexpr double kEnergyTolerance = 1e-9;
constexpr double kVertexTolerance = 1e-11;
constexpr double kL1Tolerance = 1e-10;
constexpr double kSignTolerance = 1e-12;
constexpr double kMonotoneTolerance = 1e-12;

/// (u^n - u^{n-1}) / tau_n for n = 1..N; index 0 is unused.
std::vector<NodalField> backward_differences(const Trajectory& tr)
{
    std::vector<NodalField> d(tr.fields.size());
    for (std::size_t n = 1; n < tr.fields.size(); ++n) {
        d[n] = combine(tr.fields[n], -1.0, tr.fields[n - 1]);
        d[n].scale(1.0 / tr.taus[n - 1]);
    }
    return d;
}

double lumped_norm_sq(const NodalField& u, const SparseMatrix& lumped)
{
    double s = 0.0;
    for (std::size_t z = 0; z < u.size(); ++z) {
        s += lumped.diagonal(static_cast<int>(z)) * norm_sq(u[z]);
    }
    return s;
}

double relative(double lhs, double rhs)
{
    const double scale = std::abs(rhs);
    return scale > 0.0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
}

void check_trajectory(const Trajectory& tr, const Mesh& mesh)
{
    if (tr.fields.empty() || tr.fields.size() != tr.taus.size() + 1) {
        throw std::invalid_argument("trajectory needs N+1 fields and N step sizes");
    }
    for (const auto& f : tr.fields) {
        if (f.size() != mesh.num_vertices()) {
            throw std::invalid_argument("trajectory field size does not match the mesh");
        }
    }
}

void verify_theta_mu(const Trajectory& tr, const SchemeConfig& config, const Operators& ops,
                     const std::vector<NodalField>& dtu, IdentityReport& report)
{
    const std::size_t steps = tr.taus.size();
    const std::size_t nv = tr.fields[0].size();
    const double theta = config.theta;
    const double mu = config.mu;
    const auto& tau = tr.taus;  // tau[n-1] = tau_n

    IdentityCheck energy{"energy", 1, static_cast<int>(steps), 0.0, kEnergyTolerance, "relative"};
    IdentityCheck vertex{"constraint_vertexwise", 1, static_cast<int>(steps), 0.0, kVertexTolerance, "absolute"};

    const double e0 = dirichlet_energy(tr.fields[0], ops.stiffness);
    double dissipation = 0.0;
    double numerical = 0.0;

    // Per-vertex running sums of the constraint identity.
    std::vector<double> sum_second(nv, 0.0);
    std::vector<double> sum_first(nv, 0.0);
    std::vector<double> sum_ratio(nv, 0.0);

    for (std::size_t m = 1; m <= steps; ++m) {
        const double tm = tau[m - 1];
        dissipation += tm * inner_product_star(config.metric, dtu[m], dtu[m], ops);
        const double grad_sq = ops.stiffness.bilinear(dtu[m], dtu[m]);
        numerical += (m == 1 ? 0.5 : theta - 0.5) * tm * tm * grad_sq;
        const double lhs = dirichlet_energy(tr.fields[m], ops.stiffness) + dissipation + numerical;
        energy.max_residual = std::max(energy.max_residual, relative(lhs, e0));

        const double t1 = tau[0];
        for (std::size_t z = 0; z < nv; ++z) {
            if (m >= 2) {
                const double s = tm / tau[m - 2];
                Vec3 second;
                for (std::size_t c = 0; c < 3; ++c) {
                    second[c] = (dtu[m][z][c] - dtu[m - 1][z][c]) / tm;
                }
                sum_second[z] += tm * tm * tm * tm * norm_sq(second);
                sum_first[z] += tm * tm * norm_sq(dtu[m][z]);
                sum_ratio[z] += tau[m - 2] * tau[m - 2] * (1.0 - s * s) * norm_sq(dtu[m - 1][z]);
            }
            const double rhs = mu * tm * tm * norm_sq(dtu[m][z]) + (1.0 - mu) * t1 * t1 * norm_sq(dtu[1][z]) +
                               mu * sum_ratio[z] + mu * sum_second[z] + (1.0 - 2.0 * mu) * sum_first[z];
            const double lhs_z = norm_sq(tr.fields[m][z]) - 1.0;
            vertex.max_residual = std::max(vertex.max_residual, std::abs(lhs_z - rhs));
        }
    }
    report.checks.push_back(energy);
    report.checks.push_back(vertex);

    bool nonincreasing = true;
    for (std::size_t n = 1; n < steps; ++n) {
        nonincreasing = nonincreasing && tau[n] <= tau[n - 1];
    }
    if (mu <= 0.5 && nonincreasing) {
        IdentityCheck sign{"sign_property", 1, static_cast<int>(steps), 0.0, kSignTolerance, "absolute"};
        for (std::size_t m = 1; m <= steps; ++m) {
            for (std::size_t z = 0; z < nv; ++z) {
                sign.max_residual = std::max(sign.max_residual, 1.0 - std::sqrt(norm_sq(tr.fields[m][z])));
            }
        }
        report.checks.push_back(sign);
    }
    if (theta >= 0.5) {
        IdentityCheck mono{"energy_monotone", 1, static_cast<int>(steps), 0.0, kMonotoneTolerance, "relative"};
        double prev = e0;
        for (std::size_t m = 1; m <= steps; ++m) {
            const double e = dirichlet_energy(tr.fields[m], ops.stiffness);
            mono.max_residual = std::max(mono.max_residual, (e - prev) / (e0 > 0.0 ? e0 : 1.0));
            prev = e;
        }
        report.checks.push_back(mono);
    }
}

void verify_bdf2(const Trajectory& tr, const SchemeConfig& config, const Operators& ops,
                 const std::vector<NodalField>& dtu, IdentityReport& report)
{
    const std::size_t steps = tr.taus.size();
    const std::size_t nv = tr.fields[0].size();
    if (steps < 2) {
        return;
    }
    const double tau = tr.taus[0];
    const auto& u = tr.fields;
    const auto& k = ops.stiffness;

    const auto g_norm = [&](std::size_t m) {
        return 1.25 * k.bilinear(u[m], u[m]) - k.bilinear(u[m], u[m - 1]) + 0.25 * k.bilinear(u[m - 1], u[m - 1]);
    };

    IdentityCheck g_law{"g_energy", 2, static_cast<int>(steps), 0.0, kEnergyTolerance, "relative"};
    IdentityCheck vertex{"constraint_vertexwise_bdf2", 1, static_cast<int>(steps), 0.0, kVertexTolerance,
                         "absolute"};
    IdentityCheck l1{"constraint_l1_bdf2", 2, static_cast<int>(steps), 0.0, kL1Tolerance, "relative"};
    IdentityCheck mono{"bdf2_monotone", 2, static_cast<int>(steps), 0.0, kMonotoneTolerance, "absolute"};

    const double g1 = g_norm(1);
    double dissipation = 0.0;
    double numerical = 0.0;

    // sum_{n=2}^m a_n and sum_{n=2}^m 3^{-(m+1-n)} a_n, per vertex and lumped.
    std::vector<double> plain(nv, 0.0);
    std::vector<double> damped(nv, 0.0);
    double plain_l1 = 0.0;
    double damped_l1 = 0.0;
    const double first_l1 = lumped_norm_sq(dtu[1], ops.lumped_mass);

    for (std::size_t m = 1; m <= steps; ++m) {
        NodalField second;
        if (m >= 2) {
            second = combine(dtu[m], -1.0, dtu[m - 1]);
            second.scale(1.0 / tau);
            NodalField udot = u[m];
            udot.scale(3.0).axpy(-4.0, u[m - 1]).axpy(1.0, u[m - 2]);
            udot.scale(0.5 / tau);
            dissipation += tau * inner_product_star(config.metric, udot, udot, ops);
            numerical += 0.25 * tau * tau * tau * tau * k.bilinear(second, second);
            g_law.max_residual = std::max(g_law.max_residual, relative(g_norm(m) + dissipation + numerical, g1));

            const double a_l1 = tau * tau * tau * tau * lumped_norm_sq(second, ops.lumped_mass);
            plain_l1 += a_l1;
            damped_l1 = (damped_l1 + a_l1) / 3.0;
        }
        const double decay = 1.0 - std::pow(3.0, -static_cast<double>(m));
        double lhs_l1 = 0.0;
        for (std::size_t z = 0; z < nv; ++z) {
            if (m >= 2) {
                const double a = tau * tau * tau * tau * norm_sq(second[z]);
                plain[z] += a;
                damped[z] = (damped[z] + a) / 3.0;
                const double drop = std::sqrt(norm_sq(u[m - 1][z])) - std::sqrt(norm_sq(u[m][z]));
                mono.max_residual = std::max(mono.max_residual, drop);
            }
            const double lhs = norm_sq(u[m][z]) - 1.0;
            const double rhs = 1.5 * decay * tau * tau * norm_sq(dtu[1][z]) + 1.5 * (plain[z] - damped[z]);
            vertex.max_residual = std::max(vertex.max_residual, std::abs(lhs - rhs));
            lhs_l1 += ops.lumped_mass.diagonal(static_cast<int>(z)) * std::abs(lhs);
        }
        if (m >= 2) {
            const double rhs_l1 = 1.5 * decay * tau * tau * first_l1 + 1.5 * (plain_l1 - damped_l1);
            l1.max_residual = std::max(l1.max_residual, relative(lhs_l1, rhs_l1));
        }
    }
    report.checks.push_back(g_law);
    report.checks.push_back(vertex);
    report.checks.push_back(l1);
    report.checks.push_back(mono);
}

}  // namespace

double constraint_violation_l1(const NodalField& u, const SparseMatrix& lumped_mass)
{
    double s = 0.0;
    for (std::size_t z = 0; z < u.size(); ++z) {
        s += lumped_mass.diagonal(static_cast<int>(z)) * std::abs(norm_sq(u[z]) - 1.0);
    }
    return s;
}

double constraint_violation_linf(const NodalField& u)
{
    double m = 0.0;
    for (const auto& v : u.values()) {
        m = std::max(m, std::abs(std::sqrt(norm_sq(v)) - 1.0));
    }
    return m;
}

std::vector<std::optional<double>> eoc(const std::vector<double>& errors, const std::vector<double>& steps)
{
    if (errors.size() != steps.size()) {
        throw std::invalid_argument("eoc: errors and steps differ in length");
    }
    std::vector<std::optional<double>> slopes;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
        if (!(errors[k] > 0.0) || !(errors[k + 1] > 0.0) || !(steps[k] > 0.0) || !(steps[k + 1] > 0.0) ||
            steps[k] == steps[k + 1]) {
            slopes.emplace_back(std::nullopt);
            continue;
        }
        const double ratio = steps[k + 1] / steps[k];
        if (ratio == 0.5) {
            slopes.emplace_back(-std::log(errors[k + 1] / errors[k]) / std::log(2.0));
        } else {
            slopes.emplace_back(std::log(errors[k + 1] / errors[k]) / std::log(ratio));
        }
    }
    return slopes;
}

RegularityQuantities regularity_quantities(const Trajectory& trajectory, const Operators& ops)
{
    RegularityQuantities q;
    if (trajectory.taus.empty()) {
        return q;
    }
    const auto dtu = backward_differences(trajectory);
    const std::size_t steps = trajectory.taus.size();
    q.b2 = ops.mass.bilinear(dtu[1], dtu[1]);
    q.c2 = ops.mass.bilinear(dtu[steps], dtu[steps]);
    for (std::size_t n = 2; n <= steps; ++n) {
        const double tn = trajectory.taus[n - 1];
        NodalField second = combine(dtu[n], -1.0, dtu[n - 1]);
        second.scale(1.0 / tn);
        q.a2 += tn * tn * ops.mass.bilinear(second, second);
    }
    return q;
}

std::vector<double> step_ratio_terms(const Trajectory& trajectory, const Operators& ops)
{
    const auto dtu = backward_differences(trajectory);
    const auto& tau = trajectory.taus;
    std::vector<double> out;
    double sum = 0.0;
    for (std::size_t m = 1; m <= tau.size(); ++m) {
        if (m >= 2) {
            const double s = tau[m - 1] / tau[m - 2];
            sum += tau[m - 2] * tau[m - 2] * (s * s - 1.0) * ops.mass.bilinear(dtu[m - 1], dtu[m - 1]);
        }
        out.push_back(sum);
    }
    return out;
}

bool IdentityReport::all_passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const IdentityCheck& c) { return c.passed(); });
}

const IdentityCheck* IdentityReport::find(const std::string& name) const
{
    const auto it = std::find_if(checks.begin(), checks.end(), [&](const IdentityCheck& c) { return c.name == name; });
    return it == checks.end() ? nullptr : &*it;
}

IdentityReport verify_identities(const Trajectory& trajectory, const SchemeConfig& config, const Mesh& mesh,
                                 const Operators& ops)
{
    check_trajectory(trajectory, mesh);
    IdentityReport report;
    if (trajectory.taus.empty()) {
        return report;
    }
    const auto dtu = backward_differences(trajectory);
    if (config.kind == SchemeKind::Bdf2) {
        verify_bdf2(trajectory, config, ops, dtu, report);
    } else {
        verify_theta_mu(trajectory, config, ops, dtu, report);
    }
    return report;
}

void write_identity_report(std::ostream& out, const IdentityReport& report)
{
    out << "identity,m_first,m_last,max_residual,threshold,kind,passed\n";
    char buf[256];
    for (const auto& c : report.checks) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%.16e,%.16e,%s,%d\n", c.name.c_str(), c.m_first, c.m_last,
                      c.max_residual, c.threshold, c.kind.c_str(), c.passed() ? 1 : 0);
        out << buf;
    }
}

RunSummary summarize(const FlowResult& result, std::optional<double> reference_energy)
{
    RunSummary s;
    s.steps = result.steps();
    s.stopped_by = result.stopped_by;
    if (result.records.empty()) {
        return s;
    }
    const StepRecord& first = result.records.front();
    const StepRecord& last = result.records.back();
    s.tau_first = first.tau;
    s.tau_last = last.tau;
    s.final_time = last.t;
    s.energy = last.energy;
    s.delta_inf = last.delta_inf;
    s.delta_uni = last.delta_uni;
    if (reference_energy) {
        s.delta_ener = std::abs(last.energy - *reference_energy);
    }
    s.a2 = last.a2;
    s.b2 = last.b2;
    s.c2 = last.c2;
    for (const auto& r : result.records) {
        s.total_cg_iterations += r.cg_iterations;
    }
    return s;
}

}  // namespace hmflow
