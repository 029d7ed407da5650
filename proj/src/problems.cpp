#include "hmflow/problems.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hmflow {

Vec3 inverse_stereographic(const Point2& x)
{
    const double r2 = x[0] * x[0] + x[1] * x[1];
    const double s = 1.0 / (r2 + 1.0);
    return {2.0 * x[0] * s, 2.0 * x[1] * s, (1.0 - r2) * s};
}

Vec3 perturbed_stereographic(const Point2& x)
{
    const Vec3 u = inverse_stereographic(x);
    const double phi = 16.0 * std::sin(4.0 * std::numbers::pi * x[0]) * (x[0] * x[0] - 0.25) * (x[1] * x[1] - 0.25);
    const Vec3 p{u[0] + phi, u[1] - phi, u[2]};
    const double len = std::sqrt(norm_sq(p));
    assert(len > 0.0);
    return {p[0] / len, p[1] / len, p[2] / len};
}

Vec3 singular_initial(const Point2& x)
{
    const double r = std::hypot(x[0], x[1]);
    if (r == 0.0) {
        return {0.0, 0.0, 1.0};
    }
    const double s = 2.0 * r;
    const double phi = 1.5 * std::numbers::pi * std::min(s * s, 1.0);
    const double sp = std::sin(phi);
    return {x[0] / r * sp, x[1] / r * sp, std::cos(phi)};
}

namespace {

template <unsigned Order>
double stereo_energy_gauss()
{
    using Rule = boost::math::quadrature::gauss<double, Order>;
    const auto inner = [](double y) {
        return Rule::integrate(
            [y](double x) {
                const double d = 1.0 + x * x + y * y;
                return 4.0 / (d * d);
            },
            -0.5, 0.5);
    };
    return Rule::integrate(inner, -0.5, 0.5);
}

}  // namespace

double stereographic_energy_quadrature(int order)
{
    switch (order) {
    case 20:
        return stereo_energy_gauss<20>();
    case 40:
        return stereo_energy_gauss<40>();
    default:
        throw std::invalid_argument("stereographic_energy_quadrature: supported orders are 20 and 40");
    }
}

double reference_energy_stereographic()
{
    static const double value = stereographic_energy_quadrature(40);
    return value;
}

ProblemSpec make_problem(std::string_view name)
{
    if (name == "stereo") {
        return {"stereo", inverse_stereographic, inverse_stereographic, reference_energy_stereographic()};
    }
    if (name == "stereo-perturbed") {
        return {"stereo-perturbed", perturbed_stereographic, inverse_stereographic, reference_energy_stereographic()};
    }
    if (name == "singular") {
        return {"singular", singular_initial, singular_initial, std::nullopt};
    }
    throw std::invalid_argument("unknown problem '" + std::string(name) + "'");
}

std::vector<std::string> problem_names()
{
    return {"stereo", "stereo-perturbed", "singular"};
}

}  // namespace hmflow
