#include "canonmap/synth.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <numbers>

#include "canonmap/error.hpp"

namespace canonmap {

CellSurface aggregate_cells(const Mesh& mesh, const RenderedView& view, const Camera& camera, int grid_height,
                            int grid_width) {
    CellSurface out;
    out.height = grid_height;
    out.width = grid_width;
    const std::size_t n = static_cast<std::size_t>(grid_height) * grid_width;
    out.mask.assign(n, 0);
    out.mean_point.assign(n, Vec3::Zero());
    out.coverage.assign(n, 0.0f);
    out.facing.assign(n, 0.0f);
    const int H = view.size.height, W = view.size.width;
    const auto& V = mesh.vertices();
    for (int r = 0; r < grid_height; ++r) {
        const int pr0 = r * H / grid_height, pr1 = std::max(pr0 + 1, (r + 1) * H / grid_height);
        for (int c = 0; c < grid_width; ++c) {
            const int pc0 = c * W / grid_width, pc1 = std::max(pc0 + 1, (c + 1) * W / grid_width);
            int fg = 0, total = 0;
            Vec3 sum = Vec3::Zero();
            double facing = 0.0;
            for (int pr = pr0; pr < pr1; ++pr) {
                for (int pc = pc0; pc < pc1; ++pc) {
                    ++total;
                    if (!view.in_mask(pr, pc)) continue;
                    ++fg;
                    const Vec3 p = view.surface_point(mesh, pr, pc);
                    sum += p;
                    const Face& f = mesh.faces()[view.face_id[view.pixel(pr, pc)]];
                    const Vec3 nrm = (V[f[1]] - V[f[0]]).cross(V[f[2]] - V[f[0]]).normalized();
                    facing += std::abs(nrm.dot((camera.position() - p).normalized()));
                }
            }
            const std::size_t i = static_cast<std::size_t>(r) * grid_width + c;
            out.coverage[i] = static_cast<float>(fg) / static_cast<float>(total);
            if (fg > 0 && 2 * fg >= total) {
                out.mask[i] = 1;
                out.mean_point[i] = sum / fg;
                out.facing[i] = static_cast<float>(facing / fg);
            }
        }
    }
    return out;
}

SyntheticFeatureGenerator::SyntheticFeatureGenerator(const Mesh& mesh, int dim, std::uint64_t embedding_seed)
    : dim_(dim), center_(mesh.centroid()), radius_(mesh.bounding_radius()), A_(dim, 3), background_(dim) {
    if (dim < 3) fail(ErrorKind::InvalidArgument, "synthetic feature dimension must be >= 3");
    Rng rng(embedding_seed);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < 3; ++j) A_(i, j) = rng.normal();
    for (int i = 0; i < dim; ++i) background_[i] = rng.normal();
    Eigen::MatrixXd span(dim, 4);
    span << A_, background_;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(span);
    const Eigen::MatrixXd Q = qr.householderQ();
    complement_ = Q.rightCols(std::max(dim - 4, 0));
}

FeatureMap SyntheticFeatureGenerator::generate(const CellSurface& cells, ImageSize source_size,
                                               const SynthOptions& options) const {
    FeatureMap map(cells.height, cells.width, dim_, source_size);
    Rng noise(options.noise_seed);

    const int axis = static_cast<int>(options.mirror_plane);
    for (int r = 0; r < cells.height; ++r) {
        for (int c = 0; c < cells.width; ++c) {
            const CellCoord src{r, c};
            if (!cells.foreground(src)) continue;
            Vec3 x = canonical(cells.point(src));
            CellCoord dst = src;
            if (options.flipped) {
                x[axis] = -x[axis];
                dst = mirror_cell(src, cells.width);
            }
            Eigen::VectorXd f = A_ * x;
            const std::size_t si = static_cast<std::size_t>(src.row) * cells.width + src.col;
            double keep = options.boundary_bleed ? cells.coverage[si] : 1.0;
            if (options.grazing > 0.0) keep *= std::min(1.0, cells.facing[si] / options.grazing);
            if (keep < 1.0) f = keep * f + (1.0 - keep) * background_;
            const Eigen::Index free_dims = complement_.cols();
            if (options.domain_shift > 0.0 && free_dims > 0) {
                Rng cell_rng(derive_seed(options.domain_seed, static_cast<std::uint64_t>(r) * cells.width + c));
                Eigen::VectorXd z(free_dims);
                for (Eigen::Index d = 0; d < free_dims; ++d) z[d] = cell_rng.normal();
                f += complement_ * z * (options.domain_shift * std::sqrt(static_cast<double>(dim_) / free_dims));
            }
            for (int d = 0; d < dim_; ++d) f[d] += options.noise * noise.normal();
            if (f.squaredNorm() == 0.0) f[0] = std::numeric_limits<float>::min();
            map.set_foreground(dst.row, dst.col, true);
            auto out = map.feature(dst.row, dst.col);
            for (int d = 0; d < dim_; ++d) out[d] = static_cast<float>(f[d]);
        }
    }
    return map;
}

Camera random_posed_camera(const Mesh& mesh, Rng& rng, double radius_scale, ImageSize size, double fill) {
    const double deg = std::numbers::pi / 180.0;
    const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double el = rng.uniform(-20.0, 50.0) * deg;
    const double dist = radius_scale * mesh.bounding_radius() * rng.uniform(0.9, 1.1);
    const double roll = rng.uniform(-15.0, 15.0) * deg;
    const Vec3 dir(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
    const Vec3 center = mesh.centroid();
    const Vec3 up = Eigen::AngleAxisd(roll, -dir) * Vec3(0, 1, 0);
    const double fov = framing_fov(mesh.bounding_radius(), radius_scale * mesh.bounding_radius(), fill);
    return Camera(center + dist * dir, center, up, fov, size);
}

int nearest_vertex(const Mesh& mesh, const Vec3& p) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    const auto& V = mesh.vertices();
    for (std::size_t k = 0; k < V.size(); ++k) {
        const double d = (V[k] - p).squaredNorm();
        if (d < best) {
            best = d;
            arg = static_cast<int>(k);
        }
    }
    return arg;
}

}  // namespace canonmap
