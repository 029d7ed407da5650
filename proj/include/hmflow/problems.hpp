#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hmflow/fem.hpp"

namespace hmflow {

/// (|x|^2+1)^{-1} (2x, 1-|x|^2)
[[nodiscard]] Vec3 inverse_stereographic(const Point2& x);

/// Inverse stereographic projection with an in-plane perturbation that
/// vanishes on the boundary of (-1/2,1/2)^2, renormalized to unit length.
[[nodiscard]] Vec3 perturbed_stereographic(const Point2& x);

/// Field that wraps the disc |x| < 1/2 past the south pole; smooth away from
/// the origin, extended by (0,0,1) at x = 0.
[[nodiscard]] Vec3 singular_initial(const Point2& x);

/// 4 * int_{(-1/2,1/2)^2} (1+|x|^2)^{-2} dx, i.e. the Dirichlet energy of the
/// inverse stereographic projection. Cached after the first call.
[[nodiscard]] double reference_energy_stereographic();

/// Same integral with an explicit tensor Gauss-Legendre order (20 or 40).
[[nodiscard]] double stereographic_energy_quadrature(int order);

struct ProblemSpec {
    std::string name;
    VectorFunction initial_value;
    VectorFunction dirichlet_value;
    std::optional<double> reference_energy;
};

/// Names: "stereo", "stereo-perturbed", "singular".
[[nodiscard]] ProblemSpec make_problem(std::string_view name);
[[nodiscard]] std::vector<std::string> problem_names();

}  // namespace hmflow
