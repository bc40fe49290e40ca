#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "canonmap/eval.hpp"
#include "canonmap/losses.hpp"
#include "canonmap/pseudo_gt.hpp"
#include "canonmap/renderer.hpp"
#include "canonmap/symmetry.hpp"
#include "canonmap/trainer.hpp"

namespace canonmap::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// Stage manifest: config, seed, SHA-256 of every input and output, links to
// upstream manifests, and wall time.
class ManifestBuilder {
public:
    ManifestBuilder(std::string stage, std::uint64_t seed, json config);
    void input(const fs::path& path);
    void output(const fs::path& path);
    void upstream(const fs::path& manifest);
    void set(const std::string& key, json value) { extra_[key] = std::move(value); }
    // Writes <dir>/manifest.json.
    fs::path write(const fs::path& dir, double seconds) const;

private:
    std::string stage_;
    std::uint64_t seed_;
    json config_;
    json inputs_ = json::array();
    json outputs_ = json::array();
    json upstream_ = json::array();
    json extra_ = json::object();
};

json read_manifest(const fs::path& path);

// Re-hashes every recorded output (and, when recursive, every upstream
// manifest's outputs). Throws HashMismatch naming the first stale file and
// MissingInput for absent files or manifests.
void verify_manifest(const fs::path& path, bool recursive = true);

struct Common {
    fs::path out_dir = "canonmap_out";
    std::uint64_t seed = 0;
    int workers = 1;
};

// Default stage directories under out_dir.
fs::path stage_dir(const Common& common, const std::string& stage);

// --- precompute -----------------------------------------------------------

struct PrecomputeConfig {
    fs::path mesh;
    int basis_size = 64;
    std::optional<fs::path> cache_dir;  // else $CANONMAP_CACHE, else <out>/cache
    std::optional<fs::path> output_dir;
};

struct PrecomputeResult {
    fs::path dir;
    bool cache_hit = false;
    std::string cache_key;
    double max_geodesic = 0.0;
};

PrecomputeResult cmd_precompute(const Common& common, const PrecomputeConfig& config);

struct Precomputed {
    SpectralBasis basis;
    GeodesicTable geodesics;
    SymmetryMap symmetry;
};
// Loads precompute outputs and checks they were produced from `mesh_path`.
Precomputed load_precomputed(const fs::path& dir, const fs::path& mesh_path);

// --- render ---------------------------------------------------------------

struct RenderConfig {
    fs::path mesh;
    int views = 72;
    RenderStyle style = RenderStyle::Normals;
    ImageSize size{256, 256};
    double radius_scale = 2.5;
    bool write_images = true;
    std::optional<fs::path> output_dir;
};

fs::path cmd_render(const Common& common, const RenderConfig& config);

// --- synth (toy corpus of oracle features) ---------------------------------

struct SynthConfig {
    fs::path mesh;
    std::optional<fs::path> render_dir;
    int instances = 20;
    int test_instances = 10;
    int grid = 32;
    int dim = 16;
    double noise = 0.05;
    double domain_shift = 1.0;
    bool boundary_bleed = true;
    double grazing = 0.4;
    int annotations_per_image = 30;
    int keypoints_per_pair = 10;
    std::uint64_t embedding_seed = 0xFEA7;
    std::optional<fs::path> output_dir;  // features dir
};

fs::path cmd_synth(const Common& common, const SynthConfig& config);

// --- pseudo-gt --------------------------------------------------------------

struct PseudoGtConfig {
    fs::path mesh;
    int views = 72;
    RenderStyle style = RenderStyle::Normals;
    Pooling pooling = Pooling::Max;
    int samples = 100;
    std::optional<fs::path> render_dir;
    std::optional<fs::path> features_dir;
    std::optional<fs::path> output_dir;
};

fs::path cmd_pseudo_gt(const Common& common, const PseudoGtConfig& config);

// --- train ----------------------------------------------------------------

struct TrainStageConfig {
    fs::path mesh;
    std::optional<fs::path> precompute_dir;
    std::optional<fs::path> render_dir;
    std::optional<fs::path> features_dir;
    std::optional<fs::path> pseudo_dir;
    int synth_views = -1;  // -1: every rendered view; 0 disables the synthetic term
    int epochs = 40;
    double lr = 1e-3;
    int decay_epoch = 20;
    int batch_size = 1;
    int embed_dim = 16;
    int hidden = 64;
    LossWeights weights;
    std::optional<fs::path> model_out;  // default <out>/train/model.cck
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainStageResult {
    fs::path model;
    std::vector<EpochRecord> history;
};

TrainStageResult cmd_train(const Common& common, const TrainStageConfig& config);

// --- eval -------------------------------------------------------------------

struct EvalConfig {
    fs::path mesh;
    std::optional<fs::path> precompute_dir;
    std::optional<fs::path> model;
    std::optional<fs::path> features_dir;
    std::optional<fs::path> annotations;  // default <features>/annotations.jsonl
    std::optional<fs::path> keypoints;    // default <features>/keypoints.jsonl when present
    bool zero_shot = true;
    std::optional<fs::path> render_dir;
    Pooling pooling = Pooling::Max;
    TransferRoute route = TransferRoute::ThroughMesh;
    double pck_threshold = 0.1;
    std::optional<fs::path> output_dir;
};

struct EvalResult {
    GeodesicReport model;
    std::optional<GeodesicReport> zero_shot;
    std::optional<double> pck;
    json report;
};

EvalResult cmd_eval(const Common& common, const EvalConfig& config);

// --- visualize -------------------------------------------------------------

struct VisualizeConfig {
    fs::path mesh;
    std::optional<fs::path> precompute_dir;
    std::optional<fs::path> model;
    fs::path features;  // one CFM1 image
    std::vector<CellCoord> queries;
    ImageSize size{256, 256};
    std::optional<fs::path> output_dir;
};

struct VisualizeResult {
    std::vector<fs::path> heatmaps;
    fs::path texture;
    double smoothness = 0.0;
};

VisualizeResult cmd_visualize(const Common& common, const VisualizeConfig& config);

}  // namespace canonmap::pipeline
