#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <vector>

#include "canonmap/mesh.hpp"

namespace canonmap {

inline constexpr double kGeodesicScale = 228.0;

// Dense all-pairs geodesic distances, row-major K x K, normalized so the
// global maximum equals kGeodesicScale.
class GeodesicTable {
public:
    GeodesicTable() = default;
    GeodesicTable(std::size_t k, std::vector<float> dist) : k_(k), dist_(std::move(dist)) {}

    std::size_t size() const { return k_; }
    float operator()(std::size_t a, std::size_t b) const { return dist_[a * k_ + b]; }
    const float* row(std::size_t a) const { return dist_.data() + a * k_; }
    const std::vector<float>& data() const { return dist_; }

private:
    std::size_t k_ = 0;
    std::vector<float> dist_;
};

// Heat-method distance solver with both factorizations precomputed; sources
// may be solved concurrently.
class HeatGeodesicSolver {
public:
    // time_step <= 0 selects (mean edge length)^2.
    explicit HeatGeodesicSolver(const Mesh& mesh, double time_step = 0.0);
    ~HeatGeodesicSolver();
    HeatGeodesicSolver(HeatGeodesicSolver&&) noexcept;

    // Distances in model units from one source vertex (source entry is 0).
    Eigen::VectorXd distances_from(int source) const;
    double time_step() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Unnormalized all-pairs heat distances in model units, symmetrized.
std::vector<double> heat_distances_all_pairs(const Mesh& mesh, int workers = 1);

// All-pairs heat-method table rescaled to max = 228.
GeodesicTable compute_geodesics(const Mesh& mesh, int workers = 1);

// Rescales an all-pairs table (any units) so that the maximum equals 228.
GeodesicTable normalize_geodesics(std::size_t k, const std::vector<double>& raw);

// CGT1: magic, u32 K, u32 K, f32 dist[K*K] row-major.
void save_geodesics(const GeodesicTable& table, const std::filesystem::path& path);
GeodesicTable load_geodesics(const std::filesystem::path& path);

}  // namespace canonmap
