#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "canonmap/camera.hpp"
#include "canonmap/features.hpp"
#include "canonmap/mesh.hpp"
#include "canonmap/renderer.hpp"
#include "canonmap/rng.hpp"
#include "canonmap/symmetry.hpp"

namespace canonmap {

// Per-cell aggregation of a render at feature resolution: a cell is
// foreground when at least half its pixels are, and carries the mean surface
// point of its foreground pixels.
struct CellSurface {
    int height = 0, width = 0;
    std::vector<std::uint8_t> mask;
    std::vector<Vec3> mean_point;
    std::vector<float> coverage;  // foreground fraction of the cell's pixels
    std::vector<float> facing;    // mean |cos| between face normal and view ray over foreground pixels

    bool foreground(CellCoord u) const {
        return u.row >= 0 && u.col >= 0 && u.row < height && u.col < width &&
               mask[static_cast<std::size_t>(u.row) * width + u.col] != 0;
    }
    const Vec3& point(CellCoord u) const { return mean_point[static_cast<std::size_t>(u.row) * width + u.col]; }
};

CellSurface aggregate_cells(const Mesh& mesh, const RenderedView& view, const Camera& camera, int grid_height,
                            int grid_width);

struct SynthOptions {
    double noise = 0.0;              // isotropic per-dimension std-dev
    std::uint64_t noise_seed = 0;
    // Per-cell appearance nuisance confined to the orthogonal complement of
    // range(A) and the background feature, with expected norm domain_shift * sqrt(dim). Cosine matching
    // against render features ignores it; a head trained only on renders does
    // not. The nuisance is keyed by source cell, so a flipped variant carries
    // the same nuisance at the mirrored cell.
    double domain_shift = 0.0;
    std::uint64_t domain_seed = 0xD0;
    // Partially covered cells mix in a background feature in proportion to
    // their uncovered fraction.
    bool boundary_bleed = false;
    // Cells whose surface is seen more obliquely than this |cos| are faded
    // towards the background feature linearly in |cos| (0 disables).
    double grazing = 0.0;
    // Emit the features a horizontally flipped copy of the image would have:
    // cells mirrored left-right, canonical points mirrored across `mirror_plane`.
    bool flipped = false;
    SymmetryPlane mirror_plane = SymmetryPlane::X;
};

// Oracle features: each foreground cell holds A * canonical(p) + noise, with
// A a fixed random dim x 3 Gaussian matrix and canonical(p) the surface point
// centred on the template centroid and divided by its bounding radius.
class SyntheticFeatureGenerator {
public:
    SyntheticFeatureGenerator(const Mesh& mesh, int dim, std::uint64_t embedding_seed = 0xFEA7);

    int dim() const { return dim_; }
    const Eigen::MatrixXd& embedding() const { return A_; }
    const Eigen::VectorXd& background() const { return background_; }

    Vec3 canonical(const Vec3& p) const { return (p - center_) / radius_; }

    FeatureMap generate(const CellSurface& cells, ImageSize source_size, const SynthOptions& options) const;

private:
    int dim_;
    Vec3 center_;
    double radius_;
    Eigen::MatrixXd A_;
    Eigen::VectorXd background_;
    Eigen::MatrixXd complement_;  // orthonormal basis orthogonal to range(A) and the background
};

// Random viewpoint for a posed instance: azimuth uniform, elevation in
// [-20, 50] degrees, distance jittered +-10%, roll up to +-15 degrees.
Camera random_posed_camera(const Mesh& mesh, Rng& rng, double radius_scale, ImageSize size, double fill = 0.8);

// Vertex nearest to point p (brute force).
int nearest_vertex(const Mesh& mesh, const Vec3& p);

}  // namespace canonmap
