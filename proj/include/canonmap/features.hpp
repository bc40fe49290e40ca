#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "canonmap/camera.hpp"

namespace canonmap {

struct CellCoord {
    int row = 0;
    int col = 0;
    friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

// Score assigned to background cells and to vertices seen in no view; the
// most negative finite double, so argmax never prefers it over a real score.
inline constexpr double kMaskedScore = std::numeric_limits<double>::lowest();

// Dense per-cell features of one image plus its foreground mask at feature
// resolution.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int height, int width, int dim, ImageSize source_size);

    int height() const { return height_; }
    int width() const { return width_; }
    int dim() const { return dim_; }
    ImageSize source_size() const { return source_size_; }
    std::size_t num_cells() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * width_ + c; }
    bool contains(CellCoord u) const { return u.row >= 0 && u.col >= 0 && u.row < height_ && u.col < width_; }

    bool foreground(int r, int c) const { return mask_[index(r, c)] != 0; }
    bool foreground(CellCoord u) const { return contains(u) && foreground(u.row, u.col); }
    void set_foreground(int r, int c, bool fg) { mask_[index(r, c)] = fg ? 1 : 0; }
    std::size_t foreground_count() const;
    std::vector<CellCoord> foreground_cells() const;

    std::span<const float> feature(int r, int c) const {
        return {features_.data() + index(r, c) * dim_, static_cast<std::size_t>(dim_)};
    }
    std::span<float> feature(int r, int c) {
        return {features_.data() + index(r, c) * dim_, static_cast<std::size_t>(dim_)};
    }

    const std::vector<std::uint8_t>& mask() const { return mask_; }
    const std::vector<float>& data() const { return features_; }
    std::vector<float>& data() { return features_; }

    // Throws EmptyForeground when no cell is foreground and InvalidArgument
    // when a foreground cell has an all-zero feature vector.
    void validate() const;

    // Same map with every feature multiplied by s.
    FeatureMap scaled(float s) const;

private:
    int height_ = 0, width_ = 0, dim_ = 0;
    ImageSize source_size_{};
    std::vector<std::uint8_t> mask_;
    std::vector<float> features_;
};

// CFM1: magic, u32 H_f, W_f, D_f, H, W, u8 mask[H_f*W_f], f32 features
// row-major, cell-major.
void save_feature_map(const FeatureMap& map, const std::filesystem::path& path);
FeatureMap load_feature_map(const std::filesystem::path& path);

// Cosine similarity of one source feature against every target cell.
struct SimilarityField {
    int height = 0, width = 0;
    std::vector<double> values;

    double at(CellCoord v) const { return values[static_cast<std::size_t>(v.row) * width + v.col]; }
    CellCoord argmax() const;
};

// values[v] = <src(u), tgt(v)> / (|src(u)| |tgt(v)|). With `masked`,
// background cells of tgt get kMaskedScore. Throws InvalidArgument for a
// zero-norm query vector and DimensionMismatch for differing D_f.
SimilarityField cosine_similarity(const FeatureMap& src, CellCoord u, const FeatureMap& tgt, bool masked);

// Pixel index -> feature cell by proportional scaling with floor rounding.
CellCoord pixel_to_cell(PixelCoord pixel, ImageSize image, int grid_height, int grid_width);

// Foreground cell of `map` whose centre is nearest to the continuous cell
// position (row, col); throws EmptyForeground if the mask is empty.
CellCoord nearest_foreground_cell(const FeatureMap& map, double row, double col);

// For flip-variant features: cell (r, c) <-> (r, W_f - 1 - c).
inline CellCoord mirror_cell(CellCoord u, int grid_width) { return {u.row, grid_width - 1 - u.col}; }

}  // namespace canonmap
