#include "canonmap/symmetry.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>

#include "canonmap/error.hpp"

namespace canonmap {

const char* to_string(SymmetryPlane plane) {
    switch (plane) {
        case SymmetryPlane::X: return "x";
        case SymmetryPlane::Y: return "y";
        case SymmetryPlane::Z: return "z";
    }
    return "?";
}

double SymmetryMap::involution_fraction() const {
    if (flip_index.empty()) return 1.0;
    std::size_t ok = 0;
    for (std::size_t k = 0; k < flip_index.size(); ++k) {
        if (flip_index[flip_index[k]] == static_cast<int>(k)) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(flip_index.size());
}

namespace {

// Brute-force nearest neighbour of every point among `mirrored`; ties keep
// the lowest index.
std::vector<int> nearest_mirrored(const std::vector<Vec3>& points, const std::vector<Vec3>& mirrored,
                                  double& distance_sum) {
    std::vector<int> nn(points.size(), 0);
    distance_sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t j = 0; j < mirrored.size(); ++j) {
            const double d = (points[i] - mirrored[j]).squaredNorm();
            if (d < best) {
                best = d;
                arg = static_cast<int>(j);
            }
        }
        nn[i] = arg;
        distance_sum += std::sqrt(best);
    }
    return nn;
}

}  // namespace

SymmetryMap detect_symmetry(const Mesh& mesh) {
    const Vec3 c = mesh.centroid();
    std::vector<Vec3> centered(mesh.vertices());
    for (Vec3& p : centered) p -= c;

    SymmetryMap best;
    double best_sum = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<Vec3> mirrored = centered;
        for (Vec3& p : mirrored) p[axis] = -p[axis];
        double sum = 0.0;
        std::vector<int> nn = nearest_mirrored(centered, mirrored, sum);
        best.plane_scores[axis] = sum;
        if (sum < best_sum) {
            best_sum = sum;
            best.plane = static_cast<SymmetryPlane>(axis);
            best.flip_index = std::move(nn);
        }
    }
    best.residual = best_sum / static_cast<double>(centered.size());
    return best;
}

void save_symmetry(const SymmetryMap& map, const std::filesystem::path& path) {
    nlohmann::json j;
    j["plane"] = to_string(map.plane);
    j["residual"] = map.residual;
    j["plane_scores"] = map.plane_scores;
    j["flip_index"] = map.flip_index;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump() << '\n';
}

SymmetryMap load_symmetry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingInput, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        SymmetryMap map;
        const std::string plane = j.at("plane").get<std::string>();
        map.plane = plane == "x" ? SymmetryPlane::X : plane == "y" ? SymmetryPlane::Y : SymmetryPlane::Z;
        map.residual = j.at("residual").get<double>();
        map.plane_scores = j.at("plane_scores").get<std::array<double, 3>>();
        map.flip_index = j.at("flip_index").get<std::vector<int>>();
        return map;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, "bad symmetry file " + path.string() + ": " + e.what());
    }
}

}  // namespace canonmap
