#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hmflow/diagnostics.hpp"
#include "hmflow/problems.hpp"

using namespace hmflow;

namespace {

struct FlowSetup {
    Mesh mesh = generate_structured_mesh(8);
    Operators ops = assemble_operators(mesh);
    NodalField u0 = nodal_interpolate(perturbed_stereographic, mesh);
};

FlowResult run(const FlowSetup& s, SchemeConfig cfg)
{
    cfg.keep_fields = true;
    return run_flow(cfg, s.u0, s.mesh, s.ops);
}

}  // namespace

TEST(Constraint, UnitFieldHasNoViolation)
{
    const FlowSetup s;
    EXPECT_NEAR(constraint_violation_l1(s.u0, s.ops.lumped_mass), 0.0, 1e-14);
    EXPECT_NEAR(constraint_violation_linf(s.u0), 0.0, 1e-15);
}

TEST(Constraint, ScaledFieldAndSingleVertex)
{
    const FlowSetup s;
    const NodalField big = nodal_interpolate([](const Point2&) { return Vec3{0, 0, std::sqrt(2.0)}; }, s.mesh);
    EXPECT_NEAR(constraint_violation_l1(big, s.ops.lumped_mass), 1.0, 1e-13);
    NodalField u = s.u0;
    u[10] = {0, 0, 1.5};
    EXPECT_NEAR(constraint_violation_linf(u), 0.5, 1e-15);
}

TEST(Constraint, EulerFirstStepEqualsScaledLumpedNorm)
{
    const FlowSetup s;
    const double tau = 0.0625;
    const FlowResult r = run(s, SchemeConfig::euler(Metric::H1, StepPolicy::constant(tau), StopRule::final_time(tau)));
    ASSERT_EQ(r.steps(), 1);
    NodalField dtu = combine(r.trajectory.fields[1], -1.0, r.trajectory.fields[0]);
    dtu.scale(1.0 / tau);
    const double expected = tau * tau * s.ops.lumped_mass.bilinear(dtu, dtu);
    EXPECT_NEAR(r.records[0].delta_uni, expected, 1e-12 * expected);
}

TEST(Eoc, TableExamples)
{
    const auto a = eoc({4.789695e-3, 2.435925e-3}, {0.0625, 0.03125});
    ASSERT_TRUE(a[0]);
    EXPECT_NEAR(*a[0], 0.9754640757991304, 1e-12);
    const auto b = eoc({2.307523e-4, 6.019202e-5}, {0.0625, 0.03125});
    ASSERT_TRUE(b[0]);
    EXPECT_NEAR(*b[0], 1.938700889407611, 1e-12);
}

TEST(Eoc, EqualErrorsAndNonpositive)
{
    const auto e = eoc({1e-3, 1e-3, 0.0, 1e-4}, {0.1, 0.05, 0.025, 0.0125});
    ASSERT_EQ(e.size(), 3u);
    EXPECT_EQ(*e[0], 0.0);
    EXPECT_FALSE(e[1]);
    EXPECT_FALSE(e[2]);
}

TEST(Eoc, NonHalvingSteps)
{
    // err = C tau^2 sampled at tau ratio 1/3.
    const auto e = eoc({9.0, 1.0}, {3.0, 1.0});
    EXPECT_NEAR(*e[0], 2.0, 1e-14);
}

TEST(Regularity, ConstantAndLinearTrajectories)
{
    const FlowSetup s;
    Trajectory constant{{s.u0, s.u0, s.u0}, {0.1, 0.1}};
    const auto q = regularity_quantities(constant, s.ops);
    EXPECT_EQ(q.a2, 0.0);
    EXPECT_EQ(q.b2, 0.0);
    EXPECT_EQ(q.c2, 0.0);

    NodalField d = nodal_interpolate([](const Point2& x) { return Vec3{x[0], 1.0, 0.0}; }, s.mesh);
    const NodalField u1 = combine(s.u0, 0.1, d);
    const NodalField u2 = combine(u1, 0.1, d);
    const auto lin = regularity_quantities(Trajectory{{s.u0, u1, u2}, {0.1, 0.1}}, s.ops);
    EXPECT_NEAR(lin.a2, 0.0, 1e-24);
    EXPECT_NEAR(lin.b2, s.ops.mass.bilinear(d, d), 1e-12);
    EXPECT_NEAR(lin.c2, lin.b2, 1e-12);
}

TEST(Regularity, InverseInequality)
{
    const FlowSetup s;
    const FlowResult r =
        run(s, SchemeConfig::midpoint(Metric::L2, StepPolicy::constant(0.0625), StopRule::final_time(1.0)));
    const auto q = regularity_quantities(r.trajectory, s.ops);
    double sum = 0.0;
    for (const auto& rec : r.records) {
        sum += rec.dtu_norm_l2 * rec.dtu_norm_l2;
    }
    EXPECT_LE(q.a2, 4.0 * sum);
    EXPECT_NEAR(q.a2, r.records.back().a2, 1e-12 * (1.0 + q.a2));
    EXPECT_NEAR(q.b2, r.records.back().b2, 1e-12 * (1.0 + q.b2));
    EXPECT_NEAR(q.c2, r.records.back().c2, 1e-12 * (1.0 + q.c2));
}

TEST(Identities, EulerMidpointBdf2Pass)
{
    const FlowSetup s;
    const auto stop = StopRule::final_time(1.0);
    for (const auto& cfg : {SchemeConfig::euler(Metric::H1, StepPolicy::constant(0.0625), stop),
                            SchemeConfig::midpoint(Metric::L2, StepPolicy::constant(0.0625), stop),
                            SchemeConfig::bdf2(Metric::H1, 0.0625, stop)}) {
        const FlowResult r = run(s, cfg);
        const IdentityReport rep = verify_identities(r.trajectory, cfg, s.mesh, s.ops);
        EXPECT_TRUE(rep.all_passed());
        if (cfg.kind == SchemeKind::Bdf2) {
            ASSERT_NE(rep.find("g_energy"), nullptr);
            ASSERT_NE(rep.find("constraint_l1_bdf2"), nullptr);
            EXPECT_EQ(rep.find("energy"), nullptr);
        } else {
            ASSERT_NE(rep.find("energy"), nullptr);
            ASSERT_NE(rep.find("constraint_vertexwise"), nullptr);
            EXPECT_LE(rep.find("energy")->max_residual, 1e-9);
            EXPECT_LE(rep.find("constraint_vertexwise")->max_residual, 1e-11);
        }
    }
}

TEST(Identities, CorruptedTrajectoryIsReported)
{
    const FlowSetup s;
    const auto cfg = SchemeConfig::midpoint(Metric::H1, StepPolicy::constant(0.0625), StopRule::final_time(0.5));
    FlowResult r = run(s, cfg);
    const int z = s.mesh.free_vertices()[5];
    r.trajectory.fields[3][static_cast<std::size_t>(z)][0] += 1e-6;
    const IdentityReport rep = verify_identities(r.trajectory, cfg, s.mesh, s.ops);
    EXPECT_FALSE(rep.all_passed());
    EXPECT_FALSE(rep.find("constraint_vertexwise")->passed());
}

TEST(Identities, ReportCsv)
{
    IdentityReport rep;
    rep.checks.push_back({"energy", 1, 4, 2.5e-16, 1e-9, "relative"});
    rep.checks.push_back({"constraint_vertexwise", 1, 4, 1e-10, 1e-11, "absolute"});
    std::ostringstream out;
    write_identity_report(out, rep);
    const std::string text = out.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "identity,m_first,m_last,max_residual,threshold,kind,passed");
    EXPECT_NE(text.find("energy,1,4,2.5000000000000002e-16,"), std::string::npos);
    EXPECT_NE(text.find(",absolute,0"), std::string::npos);
    EXPECT_FALSE(rep.all_passed());
}

TEST(Summary, UsesLastIterate)
{
    const FlowSetup s;
    const auto cfg = SchemeConfig::midpoint(Metric::H1, StepPolicy::constant(0.125), StopRule::final_time(1.0));
    const FlowResult r = run(s, cfg);
    const RunSummary sum = summarize(r, 3.0);
    const StepRecord& last = r.records.back();
    EXPECT_EQ(sum.steps, 8);
    EXPECT_EQ(sum.delta_uni, last.delta_uni);
    EXPECT_EQ(sum.delta_inf, last.delta_inf);
    EXPECT_EQ(sum.energy, last.energy);
    ASSERT_TRUE(sum.delta_ener);
    EXPECT_EQ(*sum.delta_ener, std::abs(last.energy - 3.0));
    EXPECT_FALSE(summarize(r, std::nullopt).delta_ener);
    EXPECT_DOUBLE_EQ(sum.final_time, 1.0);
}
