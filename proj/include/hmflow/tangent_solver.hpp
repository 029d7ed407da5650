#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "hmflow/fem.hpp"

namespace hmflow {

/// Anchors with length at or below this are rejected.
inline constexpr double kDegenerateAnchor = 1e-8;

class DegenerateAnchorError : public std::runtime_error {
public:
    DegenerateAnchorError(int vertex, double length);
    [[nodiscard]] int vertex() const { return vertex_; }

private:
    int vertex_;
};

class SolverFailure : public std::runtime_error {
public:
    SolverFailure(int iterations, double residual);
    [[nodiscard]] int iterations() const { return iterations_; }
    [[nodiscard]] double residual() const { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// Orthonormal frame of the plane orthogonal to an anchor field at every
/// free vertex. Dirichlet vertices carry no directions.
struct TangentBasis {
    std::vector<int> free_vertices;
    std::vector<Vec3> anchor;
    std::vector<Vec3> t1;
    std::vector<Vec3> t2;

    [[nodiscard]] std::size_t reduced_size() const { return 2 * free_vertices.size(); }

    /// Field w with w(z) = p[2i] t1(z_i) + p[2i+1] t2(z_i) at free vertices, 0 elsewhere.
    void inject(std::span<const double> p, NodalField& w) const;
    /// q[2i] = t1(z_i).y(z_i), q[2i+1] = t2(z_i).y(z_i)
    void restrict_to(const NodalField& y, std::span<double> q) const;
};

/// Tangent pair from the anchor direction: n = a/|a|, e_k the axis with the
/// smallest |n_k|, t1 = normalize(e_k - (e_k.n) n), t2 = n x t1.
[[nodiscard]] TangentBasis build_tangent_basis(const NodalField& anchor, std::span<const int> free_vertices);

struct SolverOptions {
    double relative_tolerance = 1e-12;
    /// 0 selects 10 * reduced size.
    int max_iterations = 0;
};

struct SolveResult {
    NodalField w;
    int iterations = 0;
    /// Final ||b - S p|| / ||b|| of the reduced system (0 for zero load).
    double relative_residual = 0.0;
};

/// Reduced operator B^T (M_star + coeff K) B of one time step.
class ReducedOperator {
public:
    ReducedOperator(Metric metric, double coeff, const Operators& ops, const TangentBasis& basis);

    [[nodiscard]] std::size_t size() const { return basis_->reduced_size(); }
    void apply(std::span<const double> p, std::span<double> q) const;
    /// Diagonal of the reduced operator.
    [[nodiscard]] const std::vector<double>& diagonal() const { return diagonal_; }
    [[nodiscard]] const SparseMatrix& system_matrix() const { return system_; }

private:
    const TangentBasis* basis_;
    SparseMatrix system_;
    std::vector<double> diagonal_;
    mutable NodalField scratch_in_;
    mutable NodalField scratch_out_;
};

/// Finds w in the discrete tangent space with
///   (w, v)_star + coeff (grad w, grad v) = rhs(v)
/// for every tangent test field v. `rhs` holds the load tested against each
/// vector-valued hat function.
[[nodiscard]] SolveResult solve_step(Metric metric, double coeff, const Operators& ops, const NodalField& rhs,
                                     const TangentBasis& basis, const SolverOptions& options = {});

}  // namespace hmflow
