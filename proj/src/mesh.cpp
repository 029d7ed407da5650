#include "hmflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace hmflow {

namespace {

double signed_area_of(const Point2& a, const Point2& b, const Point2& c)
{
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

double distance(const Point2& a, const Point2& b)
{
    return std::hypot(b[0] - a[0], b[1] - a[1]);
}

}  // namespace

Mesh::Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles))
{
    const auto nv = static_cast<int>(vertices_.size());
    if (nv == 0 || triangles_.empty()) {
        throw MeshError("mesh: empty vertex or triangle list");
    }

    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        auto& tri = triangles_[t];
        for (int idx : tri) {
            if (idx < 0 || idx >= nv) {
                throw MeshError("mesh: triangle " + std::to_string(t) + " has vertex index " +
                                std::to_string(idx) + " out of range");
            }
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw MeshError("mesh: triangle " + std::to_string(t) + " repeats a vertex");
        }
        const auto& a = vertices_[static_cast<std::size_t>(tri[0])];
        const auto& b = vertices_[static_cast<std::size_t>(tri[1])];
        const auto& c = vertices_[static_cast<std::size_t>(tri[2])];
        const double longest = std::max({distance(a, b), distance(b, c), distance(c, a)});
        const double area = signed_area_of(a, b, c);
        if (std::abs(area) <= 1e-14 * longest * longest) {
            throw MeshError("mesh: triangle " + std::to_string(t) + " has zero area");
        }
        if (area < 0.0) {
            std::swap(tri[1], tri[2]);
        }
    }

    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& tri : triangles_) {
        for (int e = 0; e < 3; ++e) {
            int i = tri[static_cast<std::size_t>(e)];
            int j = tri[static_cast<std::size_t>((e + 1) % 3)];
            if (i > j) {
                std::swap(i, j);
            }
            ++edge_count[{i, j}];
        }
    }

    on_boundary_.assign(vertices_.size(), false);
    for (const auto& [edge, count] : edge_count) {
        if (count > 2) {
            throw MeshError("mesh: non-conforming edge (" + std::to_string(edge.first) + ", " +
                            std::to_string(edge.second) + ") shared by " + std::to_string(count) +
                            " triangles");
        }
        if (count == 1) {
            on_boundary_[static_cast<std::size_t>(edge.first)] = true;
            on_boundary_[static_cast<std::size_t>(edge.second)] = true;
        }
        h_ = std::max(h_, distance(vertices_[static_cast<std::size_t>(edge.first)],
                                   vertices_[static_cast<std::size_t>(edge.second)]));
    }

    for (int z = 0; z < nv; ++z) {
        (on_boundary_[static_cast<std::size_t>(z)] ? boundary_ : free_).push_back(z);
    }
}

double Mesh::signed_area(std::size_t t) const
{
    const auto& tri = triangles_.at(t);
    return signed_area_of(vertices_[static_cast<std::size_t>(tri[0])],
                          vertices_[static_cast<std::size_t>(tri[1])],
                          vertices_[static_cast<std::size_t>(tri[2])]);
}

Mesh generate_structured_mesh(int n)
{
    if (n < 1) {
        throw std::invalid_argument("generate_structured_mesh: n must be >= 1, got " + std::to_string(n));
    }
    const int side = n + 1;
    std::vector<Point2> vertices;
    vertices.reserve(static_cast<std::size_t>(side * side));
    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            vertices.push_back({-0.5 + static_cast<double>(i) / n, -0.5 + static_cast<double>(j) / n});
        }
    }
    const auto id = [side](int i, int j) { return i + j * side; };
    std::vector<Triangle> triangles;
    triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return Mesh(std::move(vertices), std::move(triangles));
}

Mesh parse_mesh(const std::string& text)
{
    std::istringstream in(text);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        lines.push_back(line);
    }
    if (lines.empty()) {
        throw MeshError("mesh parse error: missing header line");
    }

    long nv = 0;
    long nt = 0;
    {
        std::istringstream header(lines[0]);
        if (!(header >> nv >> nt) || nv <= 0 || nt <= 0) {
            throw MeshError("mesh parse error: header must be 'V T' with positive counts");
        }
    }
    if (static_cast<long>(lines.size()) != 1 + nv + nt) {
        throw MeshError("mesh parse error: expected " + std::to_string(1 + nv + nt) + " data lines, found " +
                        std::to_string(lines.size()));
    }

    std::vector<Point2> vertices(static_cast<std::size_t>(nv));
    for (long v = 0; v < nv; ++v) {
        std::istringstream row(lines[static_cast<std::size_t>(1 + v)]);
        auto& p = vertices[static_cast<std::size_t>(v)];
        std::string rest;
        if (!(row >> p[0] >> p[1]) || (row >> rest)) {
            throw MeshError("mesh parse error: bad vertex line " + std::to_string(v));
        }
    }
    std::vector<Triangle> triangles(static_cast<std::size_t>(nt));
    for (long t = 0; t < nt; ++t) {
        std::istringstream row(lines[static_cast<std::size_t>(1 + nv + t)]);
        auto& tri = triangles[static_cast<std::size_t>(t)];
        std::string rest;
        if (!(row >> tri[0] >> tri[1] >> tri[2]) || (row >> rest)) {
            throw MeshError("mesh parse error: bad triangle line " + std::to_string(t));
        }
        for (int idx : tri) {
            if (idx < 0 || idx >= nv) {
                throw MeshError("mesh: triangle " + std::to_string(t) + " vertex index " + std::to_string(idx) +
                                " out of range");
            }
        }
    }
    return Mesh(std::move(vertices), std::move(triangles));
}

Mesh load_mesh(const std::filesystem::path& path)
{
    std::ifstream file(path);
    if (!file) {
        throw MeshError("cannot open mesh file " + path.string());
    }
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return parse_mesh(buffer.str());
}

std::string format_mesh(const Mesh& mesh)
{
    std::string out = std::to_string(mesh.num_vertices()) + " " + std::to_string(mesh.num_triangles()) + "\n";
    char buf[96];
    for (const auto& p : mesh.vertices()) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p[0], p[1]);
        out += buf;
    }
    for (const auto& t : mesh.triangles()) {
        std::snprintf(buf, sizeof buf, "%d %d %d\n", t[0], t[1], t[2]);
        out += buf;
    }
    return out;
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path)
{
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw MeshError("cannot write mesh file " + path.string());
    }
    file << format_mesh(mesh);
    if (!file) {
        throw MeshError("error writing mesh file " + path.string());
    }
}

}  // namespace hmflow
