#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace canonmap {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Triangle mesh of the canonical template. Construct through `Mesh::build`
// (or `load_mesh`), which validates topology and derives vertex normals;
// instances are immutable afterwards.
class Mesh {
public:
    // Validates indices, face degeneracy, edge-manifoldness and connectivity,
    // then computes area-weighted vertex normals.
    static Mesh build(std::vector<Vec3> vertices, std::vector<Face> faces);

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_faces() const { return faces_.size(); }

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<Vec3>& vertex_normals() const { return normals_; }

    // Undirected edges (i < j), sorted.
    std::vector<std::pair<int, int>> edges() const;

    Vec3 centroid() const;
    // Radius of the sphere around the centroid enclosing all vertices.
    double bounding_radius() const;
    double mean_edge_length() const;

private:
    Mesh() = default;

    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<Vec3> normals_;
};

Mesh load_mesh(const std::filesystem::path& path);
void save_obj(const Mesh& mesh, const std::filesystem::path& path);

// Returns a copy with every vertex transformed by p -> scale * p + offset.
Mesh transformed(const Mesh& mesh, double scale, const Vec3& offset);

// Unit-radius icosphere centred at the origin. Level 3 has 642 vertices.
Mesh make_icosphere(int subdivisions);
// Axis-aligned cube [-1, 1]^3, 8 vertices, 12 faces.
Mesh make_cube();
// Regular tetrahedron inscribed in the unit sphere.
Mesh make_tetrahedron();

}  // namespace canonmap
