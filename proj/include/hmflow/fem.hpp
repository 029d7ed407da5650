#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "hmflow/mesh.hpp"

namespace hmflow {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm_sq(const Vec3& a) { return dot(a, a); }

/// P1 field with values in R^3, one vector per mesh vertex.
class NodalField {
public:
    NodalField() = default;
    explicit NodalField(std::size_t num_vertices) : values_(num_vertices, Vec3{0.0, 0.0, 0.0}) {}
    explicit NodalField(std::vector<Vec3> values) : values_(std::move(values)) {}

    [[nodiscard]] std::size_t size() const { return values_.size(); }
    Vec3& operator[](std::size_t z) { return values_[z]; }
    const Vec3& operator[](std::size_t z) const { return values_[z]; }

    [[nodiscard]] std::span<const Vec3> values() const { return values_; }
    [[nodiscard]] std::span<Vec3> values() { return values_; }

    /// this += alpha * other
    NodalField& axpy(double alpha, const NodalField& other);
    NodalField& scale(double alpha);

    friend bool operator==(const NodalField&, const NodalField&) = default;

private:
    std::vector<Vec3> values_;
};

/// a + alpha * b
[[nodiscard]] NodalField combine(const NodalField& a, double alpha, const NodalField& b);

/// Symmetric scalar operator in compressed-row storage. Vector fields are
/// acted on component by component.
class SparseMatrix {
public:
    struct Entry {
        int row;
        int col;
        double value;
    };

    SparseMatrix() = default;
    /// Duplicate (row, col) entries are summed.
    SparseMatrix(std::size_t dim, std::vector<Entry> entries);

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] std::size_t nnz() const { return values_.size(); }
    [[nodiscard]] std::span<const int> row_offsets() const { return row_offsets_; }
    [[nodiscard]] std::span<const int> columns() const { return columns_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }

    [[nodiscard]] double at(int row, int col) const;
    [[nodiscard]] double diagonal(int row) const { return diagonal_[static_cast<std::size_t>(row)]; }

    void multiply(std::span<const double> x, std::span<double> y) const;
    /// y = A x componentwise.
    void multiply(const NodalField& x, NodalField& y) const;
    [[nodiscard]] NodalField operator*(const NodalField& x) const;

    /// sum_c x_c^T A y_c
    [[nodiscard]] double bilinear(const NodalField& x, const NodalField& y) const;

    /// alpha * A + beta * B on the union pattern.
    [[nodiscard]] static SparseMatrix linear_combination(double alpha, const SparseMatrix& a, double beta,
                                                         const SparseMatrix& b);

    [[nodiscard]] bool is_symmetric() const;
    /// MatrixMarket coordinate format (general, real).
    void write_matrix_market(std::ostream& out) const;

private:
    std::size_t dim_ = 0;
    std::vector<int> row_offsets_{0};
    std::vector<int> columns_;
    std::vector<double> values_;
    std::vector<double> diagonal_;
};

enum class Metric { L2, H1 };

/// Stiffness, consistent mass and lumped mass for one mesh.
struct Operators {
    SparseMatrix stiffness;
    SparseMatrix mass;
    SparseMatrix lumped_mass;
};

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// K[i][j] = int grad(phi_i) . grad(phi_j)
[[nodiscard]] SparseMatrix assemble_stiffness(const Mesh& mesh);
/// M[i][j] = int phi_i phi_j, or its row-sum lumped diagonal.
[[nodiscard]] SparseMatrix assemble_mass(const Mesh& mesh, bool lumped);
[[nodiscard]] Operators assemble_operators(const Mesh& mesh);

using VectorFunction = std::function<Vec3(const Point2&)>;

[[nodiscard]] NodalField nodal_interpolate(const VectorFunction& f, const Mesh& mesh);

/// 1/2 sum_c u_c^T K u_c
[[nodiscard]] double dirichlet_energy(const NodalField& u, const SparseMatrix& stiffness);

[[nodiscard]] const SparseMatrix& metric_matrix(Metric metric, const Operators& ops);
[[nodiscard]] double inner_product_star(Metric metric, const NodalField& u, const NodalField& v,
                                        const Operators& ops);
[[nodiscard]] double norm_star(Metric metric, const NodalField& u, const Operators& ops);
/// L2 norm of the P1 function (consistent mass).
[[nodiscard]] double norm_l2(const NodalField& u, const Operators& ops);
/// L2 norm of the gradient.
[[nodiscard]] double norm_grad(const NodalField& u, const Operators& ops);

}  // namespace hmflow
