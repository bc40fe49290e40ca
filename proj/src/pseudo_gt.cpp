#include "canonmap/pseudo_gt.hpp"

#include <cmath>
#include <cstdio>

#include "canonmap/binary_io.hpp"
#include "canonmap/camera.hpp"
#include "canonmap/error.hpp"
#include "canonmap/parallel.hpp"
#include "canonmap/rng.hpp"

namespace canonmap {

const char* to_string(Pooling pooling) { return pooling == Pooling::Max ? "max" : "mean"; }

Pooling parse_pooling(const std::string& name) {
    if (name == "max") return Pooling::Max;
    if (name == "mean") return Pooling::Mean;
    fail(ErrorKind::InvalidArgument, "unknown pooling '" + name + "' (expected max or mean)");
}

BankView make_bank_view(const VertexProjections& projections, ImageSize image, FeatureMap features) {
    BankView view;
    const std::size_t K = projections.visible.size();
    view.visible = projections.visible;
    view.vertex_cell.assign(K, CellCoord{-1, -1});
    const int gh = features.height(), gw = features.width();
    for (std::size_t k = 0; k < K; ++k) {
        if (!view.visible[k]) continue;
        const PixelCoord p = projections.projections[k];
        CellCoord cell = pixel_to_cell(p, image, gh, gw);
        if (!features.foreground(cell)) {
            if (features.foreground_count() == 0) {
                view.visible[k] = 0;
                continue;
            }
            cell = nearest_foreground_cell(features, (p.row + 0.5) * gh / image.height,
                                           (p.col + 0.5) * gw / image.width);
        }
        view.vertex_cell[k] = cell;
    }
    view.features = std::move(features);
    return view;
}

std::filesystem::path view_feature_path(const std::filesystem::path& dir, int view_index) {
    char name[32];
    std::snprintf(name, sizeof name, "view_%03d.cfm", view_index);
    return dir / name;
}

ViewFeatureSource directory_view_features(std::filesystem::path dir) {
    return [dir = std::move(dir)](int i, const RenderedView&) {
        const auto path = view_feature_path(dir, i);
        if (!std::filesystem::exists(path))
            fail(ErrorKind::MissingInput, "missing feature file for view " + std::to_string(i) + ": " + path.string());
        return load_feature_map(path);
    };
}

ViewBank build_view_bank(const Mesh& mesh, const std::string& mesh_id, const ViewBankOptions& options,
                         const ViewFeatureSource& source) {
    if (options.views < 1) fail(ErrorKind::InvalidArgument, "view bank needs at least one view");
    const auto cameras = sample_viewpoints(mesh, options.views, options.radius_scale, {options.size});
    ViewBank bank;
    bank.mesh_id = mesh_id;
    bank.num_vertices = mesh.num_vertices();
    bank.views.resize(cameras.size());
    parallel_for(cameras.size(), options.workers, [&](std::size_t i) {
        const RenderedView view = render(mesh, cameras[i], options.style);
        FeatureMap features = source(static_cast<int>(i), view);
        bank.views[i] = make_bank_view({view.visible, view.projections}, view.size, std::move(features));
    });
    return bank;
}

std::vector<double> vertex_similarity(const FeatureMap& img, CellCoord u, const ViewBank& bank, Pooling pooling) {
    const std::size_t K = bank.num_vertices;
    std::vector<double> pooled(K, pooling == Pooling::Max ? kMaskedScore : 0.0);
    std::vector<int> count(K, 0);
    for (const BankView& view : bank.views) {
        const SimilarityField field = cosine_similarity(img, u, view.features, true);
        for (std::size_t k = 0; k < K; ++k) {
            if (!view.visible[k]) continue;
            const double s = field.at(view.vertex_cell[k]);
            if (pooling == Pooling::Max) {
                if (s > pooled[k]) pooled[k] = s;
            } else {
                pooled[k] += s;
            }
            ++count[k];
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        if (count[k] == 0)
            pooled[k] = kMaskedScore;
        else if (pooling == Pooling::Mean)
            pooled[k] /= count[k];
    }
    return pooled;
}

int argmax_vertex(const std::vector<double>& scores) {
    int arg = -1;
    double best = kMaskedScore;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k] > best) {
            best = scores[k];
            arg = static_cast<int>(k);
        }
    }
    return arg;
}

PseudoGt build_pseudo_gt(const FeatureMap& img, const ViewBank& bank, int samples, Pooling pooling,
                         std::uint64_t seed) {
    const auto cells = img.foreground_cells();
    if (cells.empty()) fail(ErrorKind::EmptyForeground, "image has zero foreground cells");
    if (samples < 0) fail(ErrorKind::InvalidArgument, "negative sample count");
    Rng rng(seed);
    const auto picks = rng.sample_without_replacement(cells.size(), std::min<std::size_t>(samples, cells.size()));
    PseudoGt gt;
    gt.entries.reserve(picks.size());
    for (std::size_t idx : picks) {
        const CellCoord u = cells[idx];
        const auto scores = vertex_similarity(img, u, bank, pooling);
        const int k = argmax_vertex(scores);
        if (k < 0) continue;  // nothing visible in any view
        gt.entries.push_back({u, static_cast<std::uint32_t>(k), static_cast<float>(scores[k])});
    }
    return gt;
}

void save_pseudo_gt(const PseudoGt& gt, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("CPG1");
    w.u32(static_cast<std::uint32_t>(gt.entries.size()));
    for (const auto& e : gt.entries) {
        w.u16(static_cast<std::uint16_t>(e.cell.row));
        w.u16(static_cast<std::uint16_t>(e.cell.col));
        w.u32(e.vertex);
        w.f32(e.score);
    }
    w.write_file(path);
}

PseudoGt load_pseudo_gt(const std::filesystem::path& path) {
    auto r = io::ByteReader::from_file(path);
    r.expect_magic("CPG1");
    const std::uint32_t n = r.u32();
    r.require(static_cast<std::size_t>(n) * 12);
    PseudoGt gt;
    gt.entries.resize(n);
    for (auto& e : gt.entries) {
        e.cell.row = r.u16();
        e.cell.col = r.u16();
        e.vertex = r.u32();
        e.score = r.f32();
        if (!std::isfinite(e.score)) fail(ErrorKind::NonFinite, "non-finite pseudo-GT score in " + path.string());
    }
    if (r.remaining() != 0) fail(ErrorKind::DimensionMismatch, "trailing bytes in " + path.string());
    return gt;
}

}  // namespace canonmap
