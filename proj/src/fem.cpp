#include "hmflow/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace hmflow {

NodalField& NodalField::axpy(double alpha, const NodalField& other)
{
    for (std::size_t z = 0; z < values_.size(); ++z) {
        for (std::size_t c = 0; c < 3; ++c) {
            values_[z][c] += alpha * other.values_[z][c];
        }
    }
    return *this;
}

NodalField& NodalField::scale(double alpha)
{
    for (auto& v : values_) {
        for (auto& x : v) {
            x *= alpha;
        }
    }
    return *this;
}

NodalField combine(const NodalField& a, double alpha, const NodalField& b)
{
    NodalField out = a;
    out.axpy(alpha, b);
    return out;
}

SparseMatrix::SparseMatrix(std::size_t dim, std::vector<Entry> entries) : dim_(dim)
{
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    row_offsets_.assign(dim + 1, 0);
    diagonal_.assign(dim, 0.0);
    for (std::size_t k = 0; k < entries.size();) {
        const Entry& e = entries[k];
        double sum = 0.0;
        std::size_t m = k;
        for (; m < entries.size() && entries[m].row == e.row && entries[m].col == e.col; ++m) {
            sum += entries[m].value;
        }
        columns_.push_back(e.col);
        values_.push_back(sum);
        ++row_offsets_[static_cast<std::size_t>(e.row) + 1];
        if (e.row == e.col) {
            diagonal_[static_cast<std::size_t>(e.row)] = sum;
        }
        k = m;
    }
    std::partial_sum(row_offsets_.begin(), row_offsets_.end(), row_offsets_.begin());
}

double SparseMatrix::at(int row, int col) const
{
    const auto begin = columns_.begin() + row_offsets_[static_cast<std::size_t>(row)];
    const auto end = columns_.begin() + row_offsets_[static_cast<std::size_t>(row) + 1];
    const auto it = std::lower_bound(begin, end, col);
    return (it != end && *it == col) ? values_[static_cast<std::size_t>(it - columns_.begin())] : 0.0;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const
{
    for (std::size_t i = 0; i < dim_; ++i) {
        double sum = 0.0;
        for (int k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            sum += values_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(columns_[static_cast<std::size_t>(k)])];
        }
        y[i] = sum;
    }
}

void SparseMatrix::multiply(const NodalField& x, NodalField& y) const
{
    for (std::size_t i = 0; i < dim_; ++i) {
        Vec3 sum{0.0, 0.0, 0.0};
        for (int k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            const double a = values_[static_cast<std::size_t>(k)];
            const Vec3& xv = x[static_cast<std::size_t>(columns_[static_cast<std::size_t>(k)])];
            sum[0] += a * xv[0];
            sum[1] += a * xv[1];
            sum[2] += a * xv[2];
        }
        y[i] = sum;
    }
}

NodalField SparseMatrix::operator*(const NodalField& x) const
{
    NodalField y(dim_);
    multiply(x, y);
    return y;
}

double SparseMatrix::bilinear(const NodalField& x, const NodalField& y) const
{
    double total = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
        Vec3 sum{0.0, 0.0, 0.0};
        for (int k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            const double a = values_[static_cast<std::size_t>(k)];
            const Vec3& yv = y[static_cast<std::size_t>(columns_[static_cast<std::size_t>(k)])];
            sum[0] += a * yv[0];
            sum[1] += a * yv[1];
            sum[2] += a * yv[2];
        }
        total += dot(x[i], sum);
    }
    return total;
}

SparseMatrix SparseMatrix::linear_combination(double alpha, const SparseMatrix& a, double beta,
                                              const SparseMatrix& b)
{
    if (a.dim_ != b.dim_) {
        throw std::invalid_argument("linear_combination: dimension mismatch");
    }
    std::vector<Entry> entries;
    entries.reserve(a.nnz() + b.nnz());
    const auto append = [&entries](const SparseMatrix& m, double w) {
        for (std::size_t i = 0; i < m.dim_; ++i) {
            for (int k = m.row_offsets_[i]; k < m.row_offsets_[i + 1]; ++k) {
                entries.push_back({static_cast<int>(i), m.columns_[static_cast<std::size_t>(k)],
                                   w * m.values_[static_cast<std::size_t>(k)]});
            }
        }
    };
    append(a, alpha);
    append(b, beta);
    return SparseMatrix(a.dim_, std::move(entries));
}

bool SparseMatrix::is_symmetric() const
{
    for (std::size_t i = 0; i < dim_; ++i) {
        for (int k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            const int j = columns_[static_cast<std::size_t>(k)];
            if (at(j, static_cast<int>(i)) != values_[static_cast<std::size_t>(k)]) {
                return false;
            }
        }
    }
    return true;
}

void SparseMatrix::write_matrix_market(std::ostream& out) const
{
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << dim_ << ' ' << dim_ << ' ' << nnz() << '\n';
    char buf[80];
    for (std::size_t i = 0; i < dim_; ++i) {
        for (int k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            std::snprintf(buf, sizeof buf, "%zu %d %.17g\n", i + 1, columns_[static_cast<std::size_t>(k)] + 1,
                          values_[static_cast<std::size_t>(k)]);
            out << buf;
        }
    }
}

namespace {

struct ElementGeometry {
    double area;
    // Gradients of the three barycentric basis functions.
    std::array<Point2, 3> grad;
};

ElementGeometry element_geometry(const Mesh& mesh, std::size_t t)
{
    const auto& tri = mesh.triangles()[t];
    const auto& p0 = mesh.vertices()[static_cast<std::size_t>(tri[0])];
    const auto& p1 = mesh.vertices()[static_cast<std::size_t>(tri[1])];
    const auto& p2 = mesh.vertices()[static_cast<std::size_t>(tri[2])];
    const double twice_area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    if (!(twice_area > 0.0)) {
        throw AssemblyError("assembly: degenerate triangle " + std::to_string(t));
    }
    ElementGeometry g{};
    g.area = 0.5 * twice_area;
    // grad(lambda_i) = rot90(p_{i+2} - p_{i+1}) / (2A)
    const std::array<const Point2*, 3> p{&p0, &p1, &p2};
    for (std::size_t i = 0; i < 3; ++i) {
        const Point2& a = *p[(i + 1) % 3];
        const Point2& b = *p[(i + 2) % 3];
        g.grad[i] = {(a[1] - b[1]) / twice_area, (b[0] - a[0]) / twice_area};
    }
    return g;
}

}  // namespace

SparseMatrix assemble_stiffness(const Mesh& mesh)
{
    std::vector<SparseMatrix::Entry> entries;
    entries.reserve(9 * mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const auto g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles()[t];
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double k = g.area * (g.grad[i][0] * g.grad[j][0] + g.grad[i][1] * g.grad[j][1]);
                entries.push_back({tri[i], tri[j], k});
            }
        }
    }
    return SparseMatrix(mesh.num_vertices(), std::move(entries));
}

SparseMatrix assemble_mass(const Mesh& mesh, bool lumped)
{
    std::vector<SparseMatrix::Entry> entries;
    entries.reserve((lumped ? 3 : 9) * mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const double area = element_geometry(mesh, t).area;
        const auto& tri = mesh.triangles()[t];
        for (std::size_t i = 0; i < 3; ++i) {
            if (lumped) {
                entries.push_back({tri[i], tri[i], area / 3.0});
                continue;
            }
            for (std::size_t j = 0; j < 3; ++j) {
                entries.push_back({tri[i], tri[j], i == j ? area / 6.0 : area / 12.0});
            }
        }
    }
    return SparseMatrix(mesh.num_vertices(), std::move(entries));
}

Operators assemble_operators(const Mesh& mesh)
{
    return Operators{assemble_stiffness(mesh), assemble_mass(mesh, false), assemble_mass(mesh, true)};
}

NodalField nodal_interpolate(const VectorFunction& f, const Mesh& mesh)
{
    NodalField out(mesh.num_vertices());
    for (std::size_t z = 0; z < mesh.num_vertices(); ++z) {
        const Vec3 value = f(mesh.vertices()[z]);
        if (!std::isfinite(value[0]) || !std::isfinite(value[1]) || !std::isfinite(value[2])) {
            throw std::domain_error("nodal_interpolate: non-finite value at vertex " + std::to_string(z));
        }
        out[z] = value;
    }
    return out;
}

double dirichlet_energy(const NodalField& u, const SparseMatrix& stiffness)
{
    return 0.5 * stiffness.bilinear(u, u);
}

const SparseMatrix& metric_matrix(Metric metric, const Operators& ops)
{
    return metric == Metric::L2 ? ops.mass : ops.stiffness;
}

double inner_product_star(Metric metric, const NodalField& u, const NodalField& v, const Operators& ops)
{
    return metric_matrix(metric, ops).bilinear(u, v);
}

double norm_star(Metric metric, const NodalField& u, const Operators& ops)
{
    return std::sqrt(std::max(0.0, inner_product_star(metric, u, u, ops)));
}

double norm_l2(const NodalField& u, const Operators& ops)
{
    return std::sqrt(std::max(0.0, ops.mass.bilinear(u, u)));
}

double norm_grad(const NodalField& u, const Operators& ops)
{
    return std::sqrt(std::max(0.0, ops.stiffness.bilinear(u, u)));
}

}  // namespace hmflow
