#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the code it is used to check.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "canonmap/camera.hpp"
#include "canonmap/mesh.hpp"

namespace oracle {

using canonmap::Mesh;
using canonmap::Vec3;

// Cotangent stiffness and lumped barycentric mass, assembled densely from the
// textbook formulas.
struct DenseLaplacian {
    Eigen::MatrixXd L;
    Eigen::VectorXd M;
};

inline DenseLaplacian dense_laplacian(const Mesh& mesh) {
    const int K = static_cast<int>(mesh.num_vertices());
    DenseLaplacian out{Eigen::MatrixXd::Zero(K, K), Eigen::VectorXd::Zero(K)};
    const auto& V = mesh.vertices();
    for (const auto& f : mesh.faces()) {
        for (int i = 0; i < 3; ++i) {
            const int a = f[i], b = f[(i + 1) % 3], c = f[(i + 2) % 3];
            // angle at c opposite edge (a, b)
            const Vec3 u = V[a] - V[c], w = V[b] - V[c];
            const double cot = u.dot(w) / u.cross(w).norm();
            out.L(a, b) -= 0.5 * cot;
            out.L(b, a) -= 0.5 * cot;
            out.L(a, a) += 0.5 * cot;
            out.L(b, b) += 0.5 * cot;
        }
        const double area = 0.5 * (V[f[1]] - V[f[0]]).cross(V[f[2]] - V[f[0]]).norm();
        for (int i = 0; i < 3; ++i) out.M[f[i]] += area / 3.0;
    }
    return out;
}

// Smallest q generalized eigenpairs of L u = lambda M u by a dense solver.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> dense_eigenpairs(const Mesh& mesh, int q) {
    const DenseLaplacian lap = dense_laplacian(mesh);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(lap.L, lap.M.asDiagonal().toDenseMatrix());
    return {es.eigenvalues().head(q), es.eigenvectors().leftCols(q)};
}

// Shortest paths along mesh edges from one source.
inline std::vector<double> dijkstra(const Mesh& mesh, int source) {
    const std::size_t K = mesh.num_vertices();
    std::vector<std::vector<std::pair<int, double>>> adj(K);
    for (const auto& [a, b] : mesh.edges()) {
        const double len = (mesh.vertices()[a] - mesh.vertices()[b]).norm();
        adj[a].push_back({b, len});
        adj[b].push_back({a, len});
    }
    std::vector<double> dist(K, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[source] = 0.0;
    pq.push({0.0, source});
    while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[v]) continue;
        for (auto [w, len] : adj[v]) {
            if (d + len < dist[w]) {
                dist[w] = d + len;
                pq.push({dist[w], w});
            }
        }
    }
    return dist;
}

// Arc length on the sphere through the two points (centred at the origin).
inline double great_circle(const Vec3& a, const Vec3& b) {
    const double r = 0.5 * (a.norm() + b.norm());
    return r * std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

// Moller-Trumbore; returns the ray parameter or +inf.
inline double ray_triangle(const Vec3& o, const Vec3& d, const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    const Vec3 e1 = p1 - p0, e2 = p2 - p0;
    const Vec3 h = d.cross(e2);
    const double det = e1.dot(h);
    if (std::abs(det) < 1e-14) return std::numeric_limits<double>::infinity();
    const double inv = 1.0 / det;
    const Vec3 s = o - p0;
    const double u = s.dot(h) * inv;
    if (u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
    const Vec3 q = s.cross(e1);
    const double v = d.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) return std::numeric_limits<double>::infinity();
    const double t = e2.dot(q) * inv;
    return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

// Vertex k is visible from the camera when it projects inside the image and
// the segment camera -> vertex crosses no face not incident to k.
inline bool ray_cast_visible(const Mesh& mesh, const canonmap::Camera& cam, int k) {
    const Vec3& p = mesh.vertices()[k];
    const Vec3 toward = p - cam.position();
    const double len = toward.norm();
    const Vec3 dir = toward / len;
    const Vec3 fwd = (cam.look_at() - cam.position()).normalized();
    const Vec3 right = fwd.cross(cam.up()).normalized();
    const Vec3 up = right.cross(fwd);
    const double z = toward.dot(fwd);
    if (z <= 0.0) return false;
    const double f = 0.5 * cam.image_size().height / std::tan(0.5 * cam.fov_y());
    const double col = 0.5 * cam.image_size().width + f * toward.dot(right) / z;
    const double row = 0.5 * cam.image_size().height - f * toward.dot(up) / z;
    if (row < 0 || col < 0 || row >= cam.image_size().height || col >= cam.image_size().width) return false;
    for (const auto& face : mesh.faces()) {
        if (face[0] == k || face[1] == k || face[2] == k) continue;
        const double t = ray_triangle(cam.position(), dir, mesh.vertices()[face[0]], mesh.vertices()[face[1]],
                                      mesh.vertices()[face[2]]);
        if (t < len * (1.0 - 1e-9)) return false;
    }
    return true;
}

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("canonmap_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace oracle
