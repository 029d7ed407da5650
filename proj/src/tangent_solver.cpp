#include "hmflow/tangent_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace hmflow {

namespace {

std::string degenerate_message(int vertex, double length)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "degenerate anchor at vertex %d (|a| = %.3e)", vertex, length);
    return buf;
}

std::string failure_message(int iterations, double residual)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "CG did not converge in %d iterations (relative residual %.3e)", iterations,
                  residual);
    return buf;
}

Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

}  // namespace

DegenerateAnchorError::DegenerateAnchorError(int vertex, double length)
    : std::runtime_error(degenerate_message(vertex, length)), vertex_(vertex)
{
}

SolverFailure::SolverFailure(int iterations, double residual)
    : std::runtime_error(failure_message(iterations, residual)), iterations_(iterations), residual_(residual)
{
}

void TangentBasis::inject(std::span<const double> p, NodalField& w) const
{
    for (auto& v : w.values()) {
        v = {0.0, 0.0, 0.0};
    }
    for (std::size_t i = 0; i < free_vertices.size(); ++i) {
        const double a = p[2 * i];
        const double b = p[2 * i + 1];
        auto& out = w[static_cast<std::size_t>(free_vertices[i])];
        for (std::size_t c = 0; c < 3; ++c) {
            out[c] = a * t1[i][c] + b * t2[i][c];
        }
    }
}

void TangentBasis::restrict_to(const NodalField& y, std::span<double> q) const
{
    for (std::size_t i = 0; i < free_vertices.size(); ++i) {
        const Vec3& v = y[static_cast<std::size_t>(free_vertices[i])];
        q[2 * i] = hmflow::dot(t1[i], v);
        q[2 * i + 1] = hmflow::dot(t2[i], v);
    }
}

TangentBasis build_tangent_basis(const NodalField& anchor, std::span<const int> free_vertices)
{
    TangentBasis basis;
    basis.free_vertices.assign(free_vertices.begin(), free_vertices.end());
    basis.anchor.reserve(free_vertices.size());
    basis.t1.reserve(free_vertices.size());
    basis.t2.reserve(free_vertices.size());
    for (int z : free_vertices) {
        const Vec3& a = anchor[static_cast<std::size_t>(z)];
        const double len = std::sqrt(norm_sq(a));
        if (!(len > kDegenerateAnchor)) {
            throw DegenerateAnchorError(z, len);
        }
        const Vec3 n{a[0] / len, a[1] / len, a[2] / len};
        std::size_t k = 0;
        for (std::size_t c = 1; c < 3; ++c) {
            if (std::abs(n[c]) < std::abs(n[k])) {
                k = c;
            }
        }
        Vec3 t{0.0, 0.0, 0.0};
        t[k] = 1.0;
        const double proj = n[k];
        for (std::size_t c = 0; c < 3; ++c) {
            t[c] -= proj * n[c];
        }
        const double tl = std::sqrt(norm_sq(t));
        for (auto& x : t) {
            x /= tl;
        }
        // One Gram-Schmidt pass leaves t.n at roundoff level; a second pass
        // brings it down to machine precision.
        const double resid = hmflow::dot(t, n);
        for (std::size_t c = 0; c < 3; ++c) {
            t[c] -= resid * n[c];
        }
        const double tl2 = std::sqrt(norm_sq(t));
        for (auto& x : t) {
            x /= tl2;
        }
        basis.anchor.push_back(a);
        basis.t1.push_back(t);
        basis.t2.push_back(cross(n, t));
    }
    return basis;
}

ReducedOperator::ReducedOperator(Metric metric, double coeff, const Operators& ops, const TangentBasis& basis)
    : basis_(&basis),
      system_(metric == Metric::L2 ? SparseMatrix::linear_combination(1.0, ops.mass, coeff, ops.stiffness)
                                   : SparseMatrix::linear_combination(1.0, ops.stiffness, coeff, ops.stiffness)),
      scratch_in_(ops.stiffness.dim()),
      scratch_out_(ops.stiffness.dim())
{
    diagonal_.resize(basis.reduced_size());
    for (std::size_t i = 0; i < basis.free_vertices.size(); ++i) {
        const double d = system_.diagonal(basis.free_vertices[i]);
        // t1, t2 are unit vectors, so both diagonal entries equal A_zz.
        diagonal_[2 * i] = d;
        diagonal_[2 * i + 1] = d;
    }
}

void ReducedOperator::apply(std::span<const double> p, std::span<double> q) const
{
    basis_->inject(p, scratch_in_);
    system_.multiply(scratch_in_, scratch_out_);
    basis_->restrict_to(scratch_out_, q);
}

SolveResult solve_step(Metric metric, double coeff, const Operators& ops, const NodalField& rhs,
                       const TangentBasis& basis, const SolverOptions& options)
{
    const std::size_t n = basis.reduced_size();
    SolveResult result{NodalField(rhs.size()), 0, 0.0};

    std::vector<double> b(n);
    basis.restrict_to(rhs, b);
    const double b_norm = std::sqrt(dot(b, b));
    if (n == 0 || b_norm == 0.0) {
        return result;
    }

    const ReducedOperator op(metric, coeff, ops, basis);
    const auto& diag = op.diagonal();
    const int max_iterations = options.max_iterations > 0 ? options.max_iterations : static_cast<int>(10 * n);
    const double target = options.relative_tolerance * b_norm;

    std::vector<double> x(n, 0.0);
    std::vector<double> r = b;
    std::vector<double> z(n);
    std::vector<double> p(n);
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = r[i] / diag[i];
    }
    p = z;
    double rz = dot(r, z);
    double r_norm = b_norm;
    int it = 0;
    while (r_norm > target && it < max_iterations) {
        op.apply(p, q);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        r_norm = std::sqrt(dot(r, r));
        ++it;
        if (r_norm <= target) {
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = r[i] / diag[i];
        }
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = z[i] + beta * p[i];
        }
    }

    // Report the true residual rather than the recursively updated one.
    op.apply(x, q);
    double true_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = b[i] - q[i];
        true_sq += d * d;
    }
    result.iterations = it;
    result.relative_residual = std::sqrt(true_sq) / b_norm;
    if (r_norm > target) {
        throw SolverFailure(it, result.relative_residual);
    }
    basis.inject(x, result.w);
    return result;
}

}  // namespace hmflow
