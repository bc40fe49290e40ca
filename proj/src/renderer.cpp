#include "canonmap/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "canonmap/binary_io.hpp"
#include "canonmap/error.hpp"

namespace canonmap {

const char* to_string(RenderStyle style) {
    switch (style) {
        case RenderStyle::Normals: return "normals";
        case RenderStyle::Shaded: return "shaded";
        case RenderStyle::Depth: return "depth";
    }
    return "?";
}

RenderStyle parse_render_style(const std::string& name) {
    if (name == "normals") return RenderStyle::Normals;
    if (name == "shaded") return RenderStyle::Shaded;
    if (name == "depth") return RenderStyle::Depth;
    fail(ErrorKind::InvalidArgument, "unknown render style '" + name + "' (expected normals, shaded or depth)");
}

std::size_t RenderedView::mask_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Vec3 RenderedView::surface_point(const Mesh& mesh, int r, int c) const {
    const std::size_t p = pixel(r, c);
    const Face& f = mesh.faces()[face_id[p]];
    const auto& V = mesh.vertices();
    return bary[p][0] * V[f[0]] + bary[p][1] * V[f[1]] + bary[p][2] * V[f[2]];
}

namespace {

struct ScreenVertex {
    double row, col, depth;
};

// Signed doubled area of (a, b, p) in (col, row) coordinates.
double edge(double ar, double ac, double br, double bc, double pr, double pc) {
    return (bc - ac) * (pr - ar) - (br - ar) * (pc - ac);
}

}  // namespace

RenderedView render(const Mesh& mesh, const Camera& camera, RenderStyle style) {
    const ImageSize size = camera.image_size();
    const int H = size.height, W = size.width;
    const std::size_t npix = static_cast<std::size_t>(H) * W;
    const auto& V = mesh.vertices();
    const auto& N = mesh.vertex_normals();

    RenderedView view;
    view.size = size;
    view.style = style;
    view.image.assign(npix * 3, 0.0f);
    view.depth.assign(npix, 0.0f);
    view.mask.assign(npix, 0);
    view.face_id.assign(npix, -1);
    view.bary.assign(npix, {0.0f, 0.0f, 0.0f});

    std::vector<ScreenVertex> sv(V.size());
    std::vector<bool> in_front(V.size());
    for (std::size_t i = 0; i < V.size(); ++i) {
        const double z = camera.depth(V[i]);
        in_front[i] = z > 0.0;
        if (auto p = camera.project(V[i])) sv[i] = {p->row, p->col, z};
    }

    std::vector<double> zbuf(npix, std::numeric_limits<double>::infinity());
    for (std::size_t fi = 0; fi < mesh.num_faces(); ++fi) {
        const Face& f = mesh.faces()[fi];
        if (!in_front[f[0]] || !in_front[f[1]] || !in_front[f[2]]) continue;
        const ScreenVertex& a = sv[f[0]];
        const ScreenVertex& b = sv[f[1]];
        const ScreenVertex& c = sv[f[2]];
        const double area = edge(a.row, a.col, b.row, b.col, c.row, c.col);
        if (std::abs(area) < 1e-12) continue;

        const int r0 = std::max(0, static_cast<int>(std::floor(std::min({a.row, b.row, c.row}) - 0.5)));
        const int r1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({a.row, b.row, c.row}) - 0.5)));
        const int c0 = std::max(0, static_cast<int>(std::floor(std::min({a.col, b.col, c.col}) - 0.5)));
        const int c1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({a.col, b.col, c.col}) - 0.5)));
        for (int r = r0; r <= r1; ++r) {
            const double pr = r + 0.5;
            for (int col = c0; col <= c1; ++col) {
                const double pc = col + 0.5;
                const double w0 = edge(b.row, b.col, c.row, c.col, pr, pc) / area;
                const double w1 = edge(c.row, c.col, a.row, a.col, pr, pc) / area;
                const double w2 = edge(a.row, a.col, b.row, b.col, pr, pc) / area;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                const double inv_z = w0 / a.depth + w1 / b.depth + w2 / c.depth;
                const double z = 1.0 / inv_z;
                const std::size_t p = static_cast<std::size_t>(r) * W + col;
                if (!(z < zbuf[p])) continue;
                zbuf[p] = z;
                view.depth[p] = static_cast<float>(z);
                view.mask[p] = 1;
                view.face_id[p] = static_cast<std::int32_t>(fi);
                view.bary[p] = {static_cast<float>(w0 / a.depth * z), static_cast<float>(w1 / b.depth * z),
                                static_cast<float>(w2 / c.depth * z)};
            }
        }
    }

    float max_depth = 0.0f;
    for (float d : view.depth) max_depth = std::max(max_depth, d);
    for (std::size_t p = 0; p < npix; ++p) {
        if (!view.mask[p]) continue;
        const Face& f = mesh.faces()[view.face_id[p]];
        const auto& w = view.bary[p];
        float* rgb = &view.image[3 * p];
        if (style == RenderStyle::Depth) {
            const float v = view.depth[p] / max_depth;
            rgb[0] = rgb[1] = rgb[2] = v;
            continue;
        }
        Vec3 n = w[0] * N[f[0]] + w[1] * N[f[1]] + w[2] * N[f[2]];
        if (n.norm() <= 0.0) n = N[f[0]];
        const Vec3 nc = camera.to_camera(n.normalized());
        if (style == RenderStyle::Normals) {
            for (int ch = 0; ch < 3; ++ch) rgb[ch] = static_cast<float>(std::clamp(0.5 * (nc[ch] + 1.0), 0.0, 1.0));
        } else {
            // Headlight: light travels along the view direction.
            const float v = static_cast<float>(std::max(0.0, nc.z()));
            rgb[0] = rgb[1] = rgb[2] = v;
        }
    }

    VertexProjections vp = project_vertices(mesh, camera, view);
    view.visible = std::move(vp.visible);
    view.projections = std::move(vp.projections);
    double zmin = std::numeric_limits<double>::infinity(), zmax = 0.0;
    for (std::size_t i = 0; i < V.size(); ++i) {
        if (!in_front[i]) continue;
        zmin = std::min(zmin, sv[i].depth);
        zmax = std::max(zmax, sv[i].depth);
    }
    view.depth_tolerance = zmax > 0.0 ? 1e-3 * std::max(zmax - zmin, 1e-6 * zmax) : 0.0;
    return view;
}

PixelCoord nearest_mask_pixel(const RenderedView& view, PixelCoord p) {
    const int H = view.size.height, W = view.size.width;
    const int sr = std::clamp(static_cast<int>(std::floor(p.row)), 0, H - 1);
    const int sc = std::clamp(static_cast<int>(std::floor(p.col)), 0, W - 1);
    const double d0 = std::hypot(p.row - (sr + 0.5), p.col - (sc + 0.5));
    double best = std::numeric_limits<double>::infinity();
    PixelCoord arg{-1.0, -1.0};
    const int max_radius = std::max(H, W);
    for (int R = 0; R <= max_radius; ++R) {
        if (R - d0 > best) break;
        const int rlo = sr - R, rhi = sr + R, clo = sc - R, chi = sc + R;
        for (int r = std::max(rlo, 0); r <= std::min(rhi, H - 1); ++r) {
            const bool edge_row = r == rlo || r == rhi;
            for (int c = std::max(clo, 0); c <= std::min(chi, W - 1); ++c) {
                if (!edge_row && c != clo && c != chi) continue;
                if (!view.mask[view.pixel(r, c)]) continue;
                const double d = std::hypot(p.row - (r + 0.5), p.col - (c + 0.5));
                if (d < best) {
                    best = d;
                    arg = {static_cast<double>(r), static_cast<double>(c)};
                }
            }
        }
    }
    return arg;
}

VertexProjections project_vertices(const Mesh& mesh, const Camera& camera, const RenderedView& view) {
    const auto& V = mesh.vertices();
    const std::size_t K = V.size();
    const int H = view.size.height, W = view.size.width;
    VertexProjections out;
    out.visible.assign(K, 0);
    out.projections.assign(K, PixelCoord{-1.0, -1.0});
    if (view.mask_count() == 0) return out;

    std::vector<std::optional<PixelCoord>> raw(K);
    double zmin = std::numeric_limits<double>::infinity(), zmax = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        raw[k] = camera.project(V[k]);
        if (raw[k]) {
            const double z = camera.depth(V[k]);
            zmin = std::min(zmin, z);
            zmax = std::max(zmax, z);
        }
    }
    const double eps_z = 1e-3 * std::max(zmax - zmin, 1e-6 * zmax);

    for (std::size_t k = 0; k < K; ++k) {
        if (!raw[k]) continue;
        const PixelCoord p = *raw[k];
        const int r = static_cast<int>(std::floor(p.row));
        const int c = static_cast<int>(std::floor(p.col));
        const bool in_mask = view.in_mask(r, c);
        out.projections[k] = in_mask ? PixelCoord{static_cast<double>(r), static_cast<double>(c)}
                                     : nearest_mask_pixel(view, p);
        // nothing rasterized at the raw pixel: the buffer is empty there (silhouette vertex)
        if (!in_mask) {
            out.visible[k] = 1;
            continue;
        }

        const Face& f = mesh.faces()[view.face_id[view.pixel(r, c)]];
        if (f[0] == static_cast<int>(k) || f[1] == static_cast<int>(k) || f[2] == static_cast<int>(k)) {
            out.visible[k] = 1;
            continue;
        }
        // Depth of the covering face's plane at the vertex's exact projection.
        std::array<PixelCoord, 3> s;
        std::array<double, 3> z;
        for (int i = 0; i < 3; ++i) {
            s[i] = *camera.project(V[f[i]]);
            z[i] = camera.depth(V[f[i]]);
        }
        const double area = edge(s[0].row, s[0].col, s[1].row, s[1].col, s[2].row, s[2].col);
        const double w0 = edge(s[1].row, s[1].col, s[2].row, s[2].col, p.row, p.col) / area;
        const double w1 = edge(s[2].row, s[2].col, s[0].row, s[0].col, p.row, p.col) / area;
        const double w2 = edge(s[0].row, s[0].col, s[1].row, s[1].col, p.row, p.col) / area;
        const double inv_z = w0 / z[0] + w1 / z[1] + w2 / z[2];
        if (inv_z <= 0.0) continue;
        if (camera.depth(V[k]) <= 1.0 / inv_z + eps_z) out.visible[k] = 1;
    }
    (void)H;
    (void)W;
    return out;
}

void write_rgb_ppm(const std::vector<float>& rgb, ImageSize size, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << "P6\n" << size.width << ' ' << size.height << "\n255\n";
    std::vector<char> bytes(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        bytes[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(rgb[i], 0.0f, 1.0f) * 255.0f)));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_ppm(const RenderedView& view, const std::filesystem::path& path) {
    write_rgb_ppm(view.image, view.size, path);
}

void write_mask_pgm(const RenderedView& view, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << "P5\n" << view.size.width << ' ' << view.size.height << "\n255\n";
    for (std::uint8_t m : view.mask) out.put(static_cast<char>(m ? 255 : 0));
}

void write_depth_pgm(const RenderedView& view, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << "P5\n" << view.size.width << ' ' << view.size.height << "\n65535\n";
    float max_depth = 0.0f;
    for (float d : view.depth) max_depth = std::max(max_depth, d);
    for (float d : view.depth) {
        const auto q = static_cast<std::uint16_t>(max_depth > 0 ? std::lround(d / max_depth * 65535.0f) : 0);
        out.put(static_cast<char>(q >> 8));  // PGM samples are big-endian
        out.put(static_cast<char>(q & 0xff));
    }
}

void save_vertex_projections(const VertexProjections& vp, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("CVP1");
    w.u32(static_cast<std::uint32_t>(vp.visible.size()));
    for (std::size_t k = 0; k < vp.visible.size(); ++k) {
        w.u8(vp.visible[k]);
        w.f32(static_cast<float>(vp.projections[k].row));
        w.f32(static_cast<float>(vp.projections[k].col));
    }
    w.write_file(path);
}

VertexProjections load_vertex_projections(const std::filesystem::path& path) {
    auto r = io::ByteReader::from_file(path);
    r.expect_magic("CVP1");
    const std::uint32_t K = r.u32();
    r.require(static_cast<std::size_t>(K) * 9);
    VertexProjections vp;
    vp.visible.resize(K);
    vp.projections.resize(K);
    for (std::uint32_t k = 0; k < K; ++k) {
        vp.visible[k] = r.u8();
        vp.projections[k].row = r.f32();
        vp.projections[k].col = r.f32();
    }
    return vp;
}

}  // namespace canonmap
