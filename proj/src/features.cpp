#include "canonmap/features.hpp"

#include <algorithm>
#include <cmath>

#include "canonmap/binary_io.hpp"
#include "canonmap/error.hpp"

namespace canonmap {

FeatureMap::FeatureMap(int height, int width, int dim, ImageSize source_size)
    : height_(height), width_(width), dim_(dim), source_size_(source_size) {
    if (height <= 0 || width <= 0 || dim <= 0) fail(ErrorKind::InvalidArgument, "feature map dimensions must be positive");
    mask_.assign(num_cells(), 0);
    features_.assign(num_cells() * static_cast<std::size_t>(dim), 0.0f);
}

std::size_t FeatureMap::foreground_count() const {
    return static_cast<std::size_t>(std::count_if(mask_.begin(), mask_.end(), [](std::uint8_t m) { return m != 0; }));
}

std::vector<CellCoord> FeatureMap::foreground_cells() const {
    std::vector<CellCoord> cells;
    for (int r = 0; r < height_; ++r)
        for (int c = 0; c < width_; ++c)
            if (foreground(r, c)) cells.push_back({r, c});
    return cells;
}

void FeatureMap::validate() const {
    if (foreground_count() == 0) fail(ErrorKind::EmptyForeground, "feature map has zero foreground cells");
    for (int r = 0; r < height_; ++r) {
        for (int c = 0; c < width_; ++c) {
            if (!foreground(r, c)) continue;
            const auto f = feature(r, c);
            if (std::all_of(f.begin(), f.end(), [](float x) { return x == 0.0f; })) {
                fail(ErrorKind::InvalidArgument,
                     "foreground cell (" + std::to_string(r) + ", " + std::to_string(c) + ") has an all-zero feature");
            }
        }
    }
}

FeatureMap FeatureMap::scaled(float s) const {
    FeatureMap out = *this;
    for (float& x : out.features_) x *= s;
    return out;
}

void save_feature_map(const FeatureMap& map, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("CFM1");
    w.u32(static_cast<std::uint32_t>(map.height()));
    w.u32(static_cast<std::uint32_t>(map.width()));
    w.u32(static_cast<std::uint32_t>(map.dim()));
    w.u32(static_cast<std::uint32_t>(map.source_size().height));
    w.u32(static_cast<std::uint32_t>(map.source_size().width));
    for (std::uint8_t m : map.mask()) w.u8(m);
    w.f32s(map.data());
    w.write_file(path);
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
    auto r = io::ByteReader::from_file(path);
    r.expect_magic("CFM1");
    const std::uint32_t hf = r.u32(), wf = r.u32(), df = r.u32(), h = r.u32(), w = r.u32();
    if (hf == 0 || wf == 0 || df == 0) fail(ErrorKind::DimensionMismatch, "zero feature dimension in " + path.string());
    const std::size_t cells = static_cast<std::size_t>(hf) * wf;
    const std::size_t payload = cells + cells * df * 4;
    r.require(payload);
    if (r.remaining() != payload) {
        fail(ErrorKind::DimensionMismatch, "header dimensions do not match payload size in " + path.string());
    }
    FeatureMap map(static_cast<int>(hf), static_cast<int>(wf), static_cast<int>(df),
                   ImageSize{static_cast<int>(h), static_cast<int>(w)});
    for (std::size_t i = 0; i < cells; ++i) {
        map.set_foreground(static_cast<int>(i / wf), static_cast<int>(i % wf), r.u8() != 0);
    }
    r.f32s(map.data());
    if (map.foreground_count() == 0) fail(ErrorKind::EmptyForeground, "zero foreground cells in " + path.string());
    return map;
}

CellCoord SimilarityField::argmax() const {
    const auto it = std::max_element(values.begin(), values.end());
    const auto i = static_cast<int>(std::distance(values.begin(), it));
    return {i / width, i % width};
}

SimilarityField cosine_similarity(const FeatureMap& src, CellCoord u, const FeatureMap& tgt, bool masked) {
    if (src.dim() != tgt.dim()) fail(ErrorKind::DimensionMismatch, "feature dimensions differ");
    if (!src.contains(u)) fail(ErrorKind::InvalidArgument, "query cell outside the source map");
    const auto q = src.feature(u.row, u.col);
    double qn = 0.0;
    for (float x : q) qn += static_cast<double>(x) * x;
    qn = std::sqrt(qn);
    if (qn == 0.0) fail(ErrorKind::InvalidArgument, "zero-norm query feature");

    SimilarityField field{tgt.height(), tgt.width(), std::vector<double>(tgt.num_cells(), 0.0)};
    for (int r = 0; r < tgt.height(); ++r) {
        for (int c = 0; c < tgt.width(); ++c) {
            double& out = field.values[tgt.index(r, c)];
            if (masked && !tgt.foreground(r, c)) {
                out = kMaskedScore;
                continue;
            }
            const auto t = tgt.feature(r, c);
            double dot = 0.0, tn = 0.0;
            for (int d = 0; d < tgt.dim(); ++d) {
                dot += static_cast<double>(q[d]) * t[d];
                tn += static_cast<double>(t[d]) * t[d];
            }
            out = tn > 0.0 ? std::clamp(dot / (qn * std::sqrt(tn)), -1.0, 1.0) : 0.0;
        }
    }
    return field;
}

CellCoord pixel_to_cell(PixelCoord pixel, ImageSize image, int grid_height, int grid_width) {
    const int r = static_cast<int>(std::floor(pixel.row * grid_height / image.height));
    const int c = static_cast<int>(std::floor(pixel.col * grid_width / image.width));
    return {std::clamp(r, 0, grid_height - 1), std::clamp(c, 0, grid_width - 1)};
}

CellCoord nearest_foreground_cell(const FeatureMap& map, double row, double col) {
    double best = std::numeric_limits<double>::infinity();
    CellCoord arg{-1, -1};
    for (int r = 0; r < map.height(); ++r) {
        for (int c = 0; c < map.width(); ++c) {
            if (!map.foreground(r, c)) continue;
            const double d = (r + 0.5 - row) * (r + 0.5 - row) + (c + 0.5 - col) * (c + 0.5 - col);
            if (d < best) {
                best = d;
                arg = {r, c};
            }
        }
    }
    if (arg.row < 0) fail(ErrorKind::EmptyForeground, "feature map has zero foreground cells");
    return arg;
}

}  // namespace canonmap
