#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmflow {

using Point2 = std::array<double, 2>;
using Triangle = std::array<int, 3>;

class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Conforming triangulation of a planar domain with a Dirichlet vertex set.
///
/// Triangles are stored counter-clockwise. The Dirichlet set is the set of
/// endpoints of edges that belong to exactly one triangle.
class Mesh {
public:
    Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles);

    [[nodiscard]] std::size_t num_vertices() const { return vertices_.size(); }
    [[nodiscard]] std::size_t num_triangles() const { return triangles_.size(); }

    [[nodiscard]] const std::vector<Point2>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<Triangle>& triangles() const { return triangles_; }

    /// Sorted indices of Dirichlet vertices.
    [[nodiscard]] const std::vector<int>& boundary_vertices() const { return boundary_; }
    /// Sorted indices of all non-Dirichlet vertices.
    [[nodiscard]] const std::vector<int>& free_vertices() const { return free_; }
    [[nodiscard]] bool is_boundary(int vertex) const { return on_boundary_[static_cast<std::size_t>(vertex)]; }

    /// Longest edge length.
    [[nodiscard]] double h() const { return h_; }

    /// Signed area of triangle `t` (positive for every stored triangle).
    [[nodiscard]] double signed_area(std::size_t t) const;

    friend bool operator==(const Mesh& a, const Mesh& b)
    {
        return a.vertices_ == b.vertices_ && a.triangles_ == b.triangles_;
    }

private:
    std::vector<Point2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<int> boundary_;
    std::vector<int> free_;
    std::vector<bool> on_boundary_;
    double h_ = 0.0;
};

/// Uniform (n+1)x(n+1) grid on [-1/2,1/2]^2, each cell cut along its
/// lower-left to upper-right diagonal.
[[nodiscard]] Mesh generate_structured_mesh(int n);

/// Reads the text mesh format: `V T`, V lines `x y`, T lines `i j k`.
/// Lines starting with `#` (after optional whitespace) are comments.
[[nodiscard]] Mesh load_mesh(const std::filesystem::path& path);
[[nodiscard]] Mesh parse_mesh(const std::string& text);

void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
[[nodiscard]] std::string format_mesh(const Mesh& mesh);

[[nodiscard]] inline double mesh_size(const Mesh& mesh) { return mesh.h(); }

}  // namespace hmflow
