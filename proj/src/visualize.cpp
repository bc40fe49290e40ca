#include "canonmap/visualize.hpp"

#include <algorithm>

#include "canonmap/error.hpp"

namespace canonmap {

Eigen::VectorXd vertex_heat(const Eigen::VectorXd& probs) {
    const double m = probs.size() > 0 ? probs.maxCoeff() : 0.0;
    if (!(m > 0.0)) return Eigen::VectorXd::Zero(probs.size());
    return probs / m;
}

namespace {

Vec3 ramp(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return {std::min(1.0, 3.0 * t), std::clamp(3.0 * t - 1.0, 0.0, 1.0), std::clamp(3.0 * t - 2.0, 0.0, 1.0)};
}

}  // namespace

std::vector<float> heatmap_image(const Mesh& mesh, const RenderedView& view, const Eigen::VectorXd& heat) {
    if (static_cast<std::size_t>(heat.size()) != mesh.num_vertices()) fail(ErrorKind::DimensionMismatch, "one heat value per vertex expected");
    const int H = view.size.height, W = view.size.width;
    std::vector<float> rgb(static_cast<std::size_t>(H) * W * 3, 0.0f);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const std::size_t i = view.pixel(r, c);
            const int f = view.face_id[i];
            if (f < 0) continue;
            const auto& face = mesh.faces()[f];
            const auto& b = view.bary[i];
            const double t = b[0] * heat[face[0]] + b[1] * heat[face[1]] + b[2] * heat[face[2]];
            // Dark grey floor keeps the silhouette visible where the heat is ~0.
            const Vec3 col = (ramp(t).array() + 0.15 * (1.0 - std::clamp(t, 0.0, 1.0))).min(1.0).matrix();
            for (int ch = 0; ch < 3; ++ch) rgb[i * 3 + ch] = static_cast<float>(col[ch]);
        }
    }
    return rgb;
}

Vec3 canonical_color(const Mesh& mesh, int vertex) {
    const Vec3 x = (mesh.vertices()[vertex] - mesh.centroid()) / mesh.bounding_radius();
    return ((x.array() + 1.0) * 0.5).min(1.0).max(0.0).matrix();
}

std::vector<int> match_cells(const CseModel& model, const FeatureMap& img) {
    const Eigen::MatrixXd E = model.vertex_embeddings();
    std::vector<int> out(img.num_cells(), -1);
    for (CellCoord u : img.foreground_cells()) {
        Eigen::Index k = 0;
        (E * model.pixel_embed(img.feature(u.row, u.col))).maxCoeff(&k);
        out[img.index(u.row, u.col)] = static_cast<int>(k);
    }
    return out;
}

std::vector<float> texture_transfer_image(const Mesh& mesh, const FeatureMap& img, const std::vector<int>& matches) {
    const ImageSize size = img.source_size();
    std::vector<float> rgb(static_cast<std::size_t>(size.height) * size.width * 3, 0.0f);
    for (int r = 0; r < size.height; ++r) {
        for (int c = 0; c < size.width; ++c) {
            const CellCoord u = pixel_to_cell({static_cast<double>(r), static_cast<double>(c)}, size, img.height(),
                                              img.width());
            const int k = matches[img.index(u.row, u.col)];
            if (k < 0) continue;
            const Vec3 col = canonical_color(mesh, k);
            const std::size_t i = (static_cast<std::size_t>(r) * size.width + c) * 3;
            for (int ch = 0; ch < 3; ++ch) rgb[i + ch] = static_cast<float>(col[ch]);
        }
    }
    return rgb;
}

double transfer_smoothness(const Mesh& mesh, const FeatureMap& img, const std::vector<int>& matches) {
    const Vec3 center = mesh.centroid();
    const double radius = mesh.bounding_radius();
    auto canon = [&](int k) -> Vec3 { return (mesh.vertices()[k] - center) / radius; };
    double sum = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
            const int k = matches[img.index(r, c)];
            if (k < 0) continue;
            if (c + 1 < img.width() && matches[img.index(r, c + 1)] >= 0) {
                sum += (canon(k) - canon(matches[img.index(r, c + 1)])).norm();
                ++n;
            }
            if (r + 1 < img.height() && matches[img.index(r + 1, c)] >= 0) {
                sum += (canon(k) - canon(matches[img.index(r + 1, c)])).norm();
                ++n;
            }
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace canonmap
