#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "canonmap/camera.hpp"
#include "canonmap/mesh.hpp"

namespace canonmap {

enum class RenderStyle { Normals, Shaded, Depth };

const char* to_string(RenderStyle style);
RenderStyle parse_render_style(const std::string& name);

// Image-space products of one template render plus per-vertex visibility and
// mask-snapped vertex projections. Buffers are row-major H x W.
struct RenderedView {
    ImageSize size;
    RenderStyle style = RenderStyle::Normals;
    std::vector<float> image;                   // H*W*3, [0,1], background 0
    std::vector<float> depth;                   // linear camera depth, 0 = background
    std::vector<std::uint8_t> mask;             // 1 where depth > 0
    std::vector<std::int32_t> face_id;          // -1 on background
    std::vector<std::array<float, 3>> bary;     // perspective-correct barycentrics
    std::vector<std::uint8_t> visible;          // per vertex
    std::vector<PixelCoord> projections;        // snapped pixel indices; (-1,-1) if undefined
    double depth_tolerance = 0.0;               // epsilon_z used for visibility

    std::size_t pixel(int r, int c) const { return static_cast<std::size_t>(r) * size.width + c; }
    bool in_mask(int r, int c) const {
        return r >= 0 && c >= 0 && r < size.height && c < size.width && mask[pixel(r, c)] != 0;
    }
    std::size_t mask_count() const;
    // Surface point seen at pixel (r, c); only valid where the mask is set.
    Vec3 surface_point(const Mesh& mesh, int r, int c) const;
};

// Z-buffer rasterization under perspective projection, followed by
// project_vertices. Faces with a vertex at or behind the camera plane are
// skipped, so a mesh entirely behind the camera renders as empty.
RenderedView render(const Mesh& mesh, const Camera& camera, RenderStyle style);

struct VertexProjections {
    std::vector<std::uint8_t> visible;
    std::vector<PixelCoord> projections;
};

// visible[k]: the vertex projects into the mask and the face rasterized at
// its pixel is incident to k or, extended to the vertex's exact projection,
// lies no closer than the vertex minus epsilon_z. projections[k]: the pixel
// containing the projection when it is in the mask, otherwise the mask pixel
// whose centre is nearest to the projection.
VertexProjections project_vertices(const Mesh& mesh, const Camera& camera, const RenderedView& view);

// Mask pixel whose centre is closest to `p`; (-1, -1) for an empty mask.
PixelCoord nearest_mask_pixel(const RenderedView& view, PixelCoord p);

// Exports.
void write_ppm(const RenderedView& view, const std::filesystem::path& path);
void write_mask_pgm(const RenderedView& view, const std::filesystem::path& path);
void write_depth_pgm(const RenderedView& view, const std::filesystem::path& path);
// Generic 8-bit RGB buffer export (H*W*3 values in [0,1]).
void write_rgb_ppm(const std::vector<float>& rgb, ImageSize size, const std::filesystem::path& path);

// CVP1: u32 K, then per vertex (u8 visible, f32 row, f32 col).
void save_vertex_projections(const VertexProjections& vp, const std::filesystem::path& path);
VertexProjections load_vertex_projections(const std::filesystem::path& path);

}  // namespace canonmap
