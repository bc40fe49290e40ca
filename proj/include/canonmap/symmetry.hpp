#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "canonmap/mesh.hpp"

namespace canonmap {

enum class SymmetryPlane { X = 0, Y = 1, Z = 2 };

const char* to_string(SymmetryPlane plane);

// Bilateral symmetry of a template: flip_index[k] is the vertex closest to
// the mirror image of vertex k under the chosen axis plane.
struct SymmetryMap {
    SymmetryPlane plane = SymmetryPlane::X;
    std::vector<int> flip_index;
    // Mean distance from each vertex to its nearest mirrored vertex.
    double residual = 0.0;
    // Per-plane sums of nearest-neighbour distances, indexed by plane.
    std::array<double, 3> plane_scores{};

    // Fraction of k with flip_index[flip_index[k]] == k.
    double involution_fraction() const;
};

// Centers the mesh on its vertex centroid, mirrors across each of the x, y, z
// planes and keeps the plane with the smallest summed nearest-neighbour distance.
SymmetryMap detect_symmetry(const Mesh& mesh);

// JSON persistence.
void save_symmetry(const SymmetryMap& map, const std::filesystem::path& path);
SymmetryMap load_symmetry(const std::filesystem::path& path);

}  // namespace canonmap
