#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "canonmap/features.hpp"
#include "canonmap/mesh.hpp"
#include "canonmap/renderer.hpp"

namespace canonmap {

enum class Pooling { Max, Mean };

const char* to_string(Pooling pooling);
Pooling parse_pooling(const std::string& name);

// One template render as seen by the matcher: its features plus, per vertex,
// visibility and the feature cell holding the vertex's projection.
struct BankView {
    FeatureMap features;
    std::vector<std::uint8_t> visible;
    std::vector<CellCoord> vertex_cell;  // meaningful where visible
};

// Converts a render's snapped pixel projections to foreground cells of
// `features`, snapping to the nearest foreground cell when the mapped cell is
// background.
BankView make_bank_view(const VertexProjections& projections, ImageSize image, FeatureMap features);

struct ViewBank {
    std::string mesh_id;
    std::size_t num_vertices = 0;
    std::vector<BankView> views;
};

// Produces the feature map for view i given its render.
using ViewFeatureSource = std::function<FeatureMap(int view_index, const RenderedView& view)>;

// Reads <dir>/view_###.cfm; throws MissingInput naming the absent file.
ViewFeatureSource directory_view_features(std::filesystem::path dir);
std::filesystem::path view_feature_path(const std::filesystem::path& dir, int view_index);

struct ViewBankOptions {
    int views = 72;
    RenderStyle style = RenderStyle::Normals;
    double radius_scale = 2.5;
    ImageSize size{};
    int workers = 1;
};

ViewBank build_view_bank(const Mesh& mesh, const std::string& mesh_id, const ViewBankOptions& options,
                         const ViewFeatureSource& source);

// Per-vertex pool over the views where the vertex is visible of the cosine
// similarity between img(u) and the view's feature at the vertex cell.
// Vertices visible nowhere score kMaskedScore.
std::vector<double> vertex_similarity(const FeatureMap& img, CellCoord u, const ViewBank& bank, Pooling pooling);

struct PseudoGtEntry {
    CellCoord cell;
    std::uint32_t vertex = 0;
    float score = 0.0f;
};

struct PseudoGt {
    std::vector<PseudoGtEntry> entries;
};

// Samples min(samples, #foreground) distinct foreground cells uniformly and
// stores the argmax vertex of each. Throws EmptyForeground.
PseudoGt build_pseudo_gt(const FeatureMap& img, const ViewBank& bank, int samples, Pooling pooling,
                         std::uint64_t seed);

// Argmax with ties to the lowest index; -1 when every score is kMaskedScore.
int argmax_vertex(const std::vector<double>& scores);

// CPG1: magic, u32 count, then (u16 row, u16 col, u32 vertex, f32 score).
void save_pseudo_gt(const PseudoGt& gt, const std::filesystem::path& path);
PseudoGt load_pseudo_gt(const std::filesystem::path& path);

}  // namespace canonmap
