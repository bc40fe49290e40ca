#include "canonmap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>

#include "canonmap/binary_io.hpp"
#include "canonmap/error.hpp"
#include "canonmap/hash.hpp"
#include "canonmap/parallel.hpp"
#include "canonmap/rng.hpp"
#include "canonmap/symmetry.hpp"
#include "canonmap/synth.hpp"
#include "canonmap/visualize.hpp"

namespace canonmap::pipeline {

namespace {

constexpr const char* kManifest = "manifest.json";

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string indexed_name(const char* prefix, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d%s", prefix, i, ext);
    return buf;
}

void write_json(const json& j, const fs::path& path) {
    io::ByteWriter w;
    const std::string text = j.dump(2) + "\n";
    w.raw(text);
    w.write_file(path);
}

json read_json(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorKind::MissingInput, "missing " + path.string());
    std::ifstream in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void require_stage(const fs::path& dir, const std::string& command) {
    if (!fs::exists(dir / kManifest))
        fail(ErrorKind::MissingInput,
             "no stage manifest in " + dir.string() + "; run `canonmap " + command + "` first");
}

std::string mesh_identifier(const fs::path& mesh_path) {
    return mesh_path.stem().string() + "-" + sha256_file(mesh_path).substr(0, 12);
}

Mesh load_checked_mesh(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorKind::MissingInput, "mesh not found: " + path.string());
    return load_mesh(path);
}

std::vector<std::string> list_ids(const fs::path& dir, const std::string& ext, bool skip_flips) {
    std::vector<std::string> ids;
    if (!fs::is_directory(dir)) return ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() <= ext.size() || name.compare(name.size() - ext.size(), ext.size(), ext) != 0) continue;
        const std::string id = name.substr(0, name.size() - ext.size());
        if (skip_flips && id.size() > 5 && id.compare(id.size() - 5, 5, ".flip") == 0) continue;
        ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

struct RenderSetup {
    int views = 0;
    RenderStyle style = RenderStyle::Normals;
    ImageSize size;
    double radius_scale = 2.5;
};

RenderSetup render_setup(const fs::path& render_dir) {
    require_stage(render_dir, "render");
    const json m = read_json(render_dir / kManifest);
    const json& c = m.at("config");
    RenderSetup s;
    s.views = c.at("views").get<int>();
    s.style = parse_render_style(c.at("style").get<std::string>());
    s.size = {c.at("height").get<int>(), c.at("width").get<int>()};
    s.radius_scale = c.at("radius_scale").get<double>();
    return s;
}

// View bank from the render stage's projections and the per-view features.
ViewBank load_view_bank(const fs::path& render_dir, const fs::path& features_dir, const std::string& mesh_id,
                        std::size_t num_vertices, int workers) {
    const RenderSetup setup = render_setup(render_dir);
    ViewBank bank;
    bank.mesh_id = mesh_id;
    bank.num_vertices = num_vertices;
    bank.views.resize(setup.views);
    const ViewFeatureSource source = directory_view_features(features_dir / "views");
    const RenderedView unused;
    parallel_for(bank.views.size(), workers, [&](std::size_t i) {
        const VertexProjections vp = load_vertex_projections(render_dir / indexed_name("view", static_cast<int>(i), ".cvp"));
        if (vp.visible.size() != num_vertices)
            fail(ErrorKind::DimensionMismatch, "view projections do not match the mesh vertex count");
        FeatureMap features = source(static_cast<int>(i), unused);
        const ImageSize image = features.source_size();
        bank.views[i] = make_bank_view(vp, image, std::move(features));
    });
    return bank;
}

fs::path cache_root(const Common& common, const std::optional<fs::path>& configured) {
    if (configured) return *configured;
    if (const char* env = std::getenv("CANONMAP_CACHE"); env && *env) return env;
    return common.out_dir / "cache";
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    return fs::exists(a) && fs::exists(b) && io::read_file_bytes(a) == io::read_file_bytes(b);
}

json history_json(const std::vector<EpochRecord>& history) {
    json out = json::array();
    for (const auto& r : history)
        out.push_back({{"epoch", r.epoch},
                       {"lr", r.lr},
                       {"pseudo", r.loss.pseudo},
                       {"dist", r.loss.dist},
                       {"cyc", r.loss.cyc},
                       {"eq", r.loss.eq},
                       {"syn", r.loss.syn},
                       {"total", r.loss.total}});
    return out;
}

json geodesic_json(const GeodesicReport& r) {
    return {{"mean", r.mean}, {"per_class", r.per_class}, {"count", r.count}};
}

json weights_json(const LossWeights& w) {
    return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"delta", w.delta}, {"zeta", w.zeta}};
}

}  // namespace

// --- manifests ---------------------------------------------------------------

ManifestBuilder::ManifestBuilder(std::string stage, std::uint64_t seed, json config)
    : stage_(std::move(stage)), seed_(seed), config_(std::move(config)) {}

void ManifestBuilder::input(const fs::path& path) {
    inputs_.push_back({{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha256_file(path)}});
}

void ManifestBuilder::output(const fs::path& path) {
    outputs_.push_back({{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha256_file(path)}});
}

void ManifestBuilder::upstream(const fs::path& manifest) {
    upstream_.push_back(fs::absolute(manifest).lexically_normal().string());
}

fs::path ManifestBuilder::write(const fs::path& dir, double seconds) const {
    json j = {{"stage", stage_}, {"seed", seed_},         {"config", config_},  {"inputs", inputs_},
              {"outputs", outputs_}, {"upstream", upstream_}, {"seconds", seconds}};
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    const fs::path path = dir / kManifest;
    write_json(j, path);
    return path;
}

json read_manifest(const fs::path& path) { return read_json(path); }

void verify_manifest(const fs::path& path, bool recursive) {
    const json m = read_json(path);
    for (const auto& entry : m.at("outputs")) {
        const fs::path file = entry.at("path").get<std::string>();
        if (!fs::exists(file))
            fail(ErrorKind::MissingInput, "output " + file.string() + " recorded in " + path.string() + " is missing");
        if (sha256_file(file) != entry.at("sha256").get<std::string>())
            fail(ErrorKind::HashMismatch, file.string() + " no longer matches the hash recorded in " + path.string() +
                                              "; rerun `canonmap " + m.at("stage").get<std::string>() + "`");
    }
    for (const auto& entry : m.at("inputs")) {
        const fs::path file = entry.at("path").get<std::string>();
        if (!fs::exists(file)) fail(ErrorKind::MissingInput, "input " + file.string() + " of " + path.string() + " is missing");
        if (sha256_file(file) != entry.at("sha256").get<std::string>())
            fail(ErrorKind::HashMismatch, "input " + file.string() + " changed since " + path.string() +
                                              " was written; rerun `canonmap " + m.at("stage").get<std::string>() + "`");
    }
    if (!recursive) return;
    for (const auto& up : m.at("upstream")) verify_manifest(up.get<std::string>(), true);
}

fs::path stage_dir(const Common& common, const std::string& stage) { return common.out_dir / stage; }

// --- precompute -----------------------------------------------------------

PrecomputeResult cmd_precompute(const Common& common, const PrecomputeConfig& config) {
    Stopwatch clock;
    const Mesh mesh = load_checked_mesh(config.mesh);
    const std::string mesh_sha = sha256_file(config.mesh);
    PrecomputeResult result;
    result.cache_key = sha256_hex("canonmap-precompute-v1:" + mesh_sha + ":q=" + std::to_string(config.basis_size));
    const fs::path cache = cache_root(common, config.cache_dir) / result.cache_key;
    const char* files[] = {"basis.csb", "geodesics.cgt", "symmetry.json"};

    result.cache_hit = std::all_of(std::begin(files), std::end(files), [&](const char* f) { return fs::exists(cache / f); });
    if (!result.cache_hit) {
        const SpectralBasis basis = compute_spectral_basis(mesh, config.basis_size);
        const GeodesicTable geo = compute_geodesics(mesh, common.workers);
        const SymmetryMap sym = detect_symmetry(mesh);
        save_spectral_basis(basis, cache / files[0]);
        save_geodesics(geo, cache / files[1]);
        save_symmetry(sym, cache / files[2]);
    }

    result.dir = config.output_dir.value_or(stage_dir(common, "precompute"));
    fs::create_directories(result.dir);
    for (const char* f : files) {
        if (!same_bytes(cache / f, result.dir / f)) {
            io::ByteWriter w;
            w.raw(io::read_file_bytes(cache / f));
            w.write_file(result.dir / f);
        }
    }
    const GeodesicTable geo = load_geodesics(result.dir / files[1]);
    result.max_geodesic = *std::max_element(geo.data().begin(), geo.data().end());

    ManifestBuilder manifest("precompute", common.seed,
                             {{"mesh", fs::absolute(config.mesh).string()}, {"basis_size", config.basis_size}});
    manifest.input(config.mesh);
    for (const char* f : files) manifest.output(result.dir / f);
    manifest.set("cache_key", result.cache_key);
    manifest.set("cache_hit", result.cache_hit);
    manifest.set("mesh_id", mesh_identifier(config.mesh));
    manifest.set("max_geodesic", result.max_geodesic);
    manifest.write(result.dir, clock.seconds());
    return result;
}

Precomputed load_precomputed(const fs::path& dir, const fs::path& mesh_path) {
    require_stage(dir, "precompute");
    const json m = read_json(dir / kManifest);
    const std::string recorded = m.at("inputs").at(0).at("sha256").get<std::string>();
    if (recorded != sha256_file(mesh_path))
        fail(ErrorKind::HashMismatch, "precompute outputs in " + dir.string() + " were built from a different mesh than " +
                                          mesh_path.string() + "; rerun `canonmap precompute`");
    return {load_spectral_basis(dir / "basis.csb"), load_geodesics(dir / "geodesics.cgt"),
            load_symmetry(dir / "symmetry.json")};
}

// --- render ---------------------------------------------------------------

fs::path cmd_render(const Common& common, const RenderConfig& config) {
    Stopwatch clock;
    const Mesh mesh = load_checked_mesh(config.mesh);
    const fs::path dir = config.output_dir.value_or(stage_dir(common, "render"));
    fs::create_directories(dir);
    const auto cameras = sample_viewpoints(mesh, config.views, config.radius_scale, {config.size});

    std::vector<std::vector<fs::path>> written(cameras.size());
    parallel_for(cameras.size(), common.workers, [&](std::size_t i) {
        const RenderedView view = render(mesh, cameras[i], config.style);
        const int vi = static_cast<int>(i);
        auto& out = written[i];
        out.push_back(dir / indexed_name("view", vi, ".cvp"));
        save_vertex_projections({view.visible, view.projections}, out.back());
        if (config.write_images) {
            out.push_back(dir / indexed_name("view", vi, ".ppm"));
            write_ppm(view, out.back());
            out.push_back(dir / indexed_name("view", vi, "_mask.pgm"));
            write_mask_pgm(view, out.back());
        }
    });

    json cams = json::array();
    for (const auto& cam : cameras) {
        const Vec3& p = cam.position();
        const Vec3& t = cam.look_at();
        const Vec3& u = cam.up();
        cams.push_back({{"position", {p.x(), p.y(), p.z()}},
                        {"look_at", {t.x(), t.y(), t.z()}},
                        {"up", {u.x(), u.y(), u.z()}},
                        {"fov_y", cam.fov_y()}});
    }
    write_json(cams, dir / "cameras.json");

    ManifestBuilder manifest("render", common.seed,
                             {{"views", config.views},
                              {"style", to_string(config.style)},
                              {"height", config.size.height},
                              {"width", config.size.width},
                              {"radius_scale", config.radius_scale}});
    manifest.input(config.mesh);
    for (const auto& files : written)
        for (const auto& f : files) manifest.output(f);
    manifest.output(dir / "cameras.json");
    manifest.set("mesh_id", mesh_identifier(config.mesh));
    manifest.write(dir, clock.seconds());
    return dir;
}

// --- synth ----------------------------------------------------------------

fs::path cmd_synth(const Common& common, const SynthConfig& config) {
    Stopwatch clock;
    const Mesh mesh = load_checked_mesh(config.mesh);
    const fs::path render_dir = config.render_dir.value_or(stage_dir(common, "render"));
    const RenderSetup setup = render_setup(render_dir);
    const fs::path dir = config.output_dir.value_or(stage_dir(common, "features"));
    if (config.instances < 0 || config.test_instances < 0) fail(ErrorKind::InvalidArgument, "negative instance count");
    const SyntheticFeatureGenerator generator(mesh, config.dim, config.embedding_seed);
    const int G = config.grid;
    std::vector<fs::path> outputs;

    // Render-view features: clean geometry, no appearance nuisance.
    const auto cameras = sample_viewpoints(mesh, setup.views, setup.radius_scale, {setup.size});
    std::vector<fs::path> view_files(cameras.size());
    parallel_for(cameras.size(), common.workers, [&](std::size_t i) {
        const RenderedView view = render(mesh, cameras[i], setup.style);
        SynthOptions o;
        o.noise = config.noise;
        o.noise_seed = derive_seed(common.seed, 0x100000 + i);
        o.boundary_bleed = config.boundary_bleed;
        o.grazing = config.grazing;
        view_files[i] = view_feature_path(dir / "views", static_cast<int>(i));
        save_feature_map(generator.generate(aggregate_cells(mesh, view, cameras[i], G, G), view.size, o), view_files[i]);
    });
    outputs.insert(outputs.end(), view_files.begin(), view_files.end());

    // Posed instances.
    struct Instance {
        std::string id;
        RenderedView view;
        CellSurface cells;
        FeatureMap features;
    };
    Rng camera_rng(derive_seed(common.seed, 0xCA3E5A));
    const int total = config.instances + config.test_instances;
    std::vector<Instance> test;
    for (int j = 0; j < total; ++j) {
        const bool is_test = j >= config.instances;
        const Camera cam = random_posed_camera(mesh, camera_rng, setup.radius_scale, setup.size);
        Instance inst;
        inst.id = is_test ? indexed_name("test", j - config.instances, "") : indexed_name("train", j, "");
        inst.view = render(mesh, cam, setup.style);
        inst.cells = aggregate_cells(mesh, inst.view, cam, G, G);
        SynthOptions o;
        o.noise = config.noise;
        o.noise_seed = derive_seed(common.seed, 0x200000 + j);
        o.domain_shift = config.domain_shift;
        o.domain_seed = derive_seed(common.seed, 0x300000 + j);
        o.boundary_bleed = config.boundary_bleed;
        o.grazing = config.grazing;
        o.mirror_plane = detect_symmetry(mesh).plane;
        inst.features = generator.generate(inst.cells, setup.size, o);
        if (inst.features.foreground_count() == 0)
            fail(ErrorKind::EmptyForeground, "posed instance " + inst.id + " has no foreground cells");
        o.flipped = true;
        o.noise_seed = derive_seed(common.seed, 0x400000 + j);
        const FeatureMap flipped = generator.generate(inst.cells, setup.size, o);
        const fs::path sub = dir / (is_test ? "test" : "images");
        outputs.push_back(sub / (inst.id + ".cfm"));
        save_feature_map(inst.features, outputs.back());
        outputs.push_back(sub / (inst.id + ".flip.cfm"));
        save_feature_map(flipped, outputs.back());
        if (is_test) test.push_back(std::move(inst));
    }

    // Held-out annotations and keypoint pairs from the generator's ground truth.
    Rng label_rng(derive_seed(common.seed, 0xA77));
    std::vector<Annotation> annotations;
    const std::string category = mesh.num_vertices() > 0 ? config.mesh.stem().string() : "";
    for (const auto& inst : test) {
        const auto cells = inst.features.foreground_cells();
        const auto picks = label_rng.sample_without_replacement(
            cells.size(), std::min<std::size_t>(config.annotations_per_image, cells.size()));
        for (std::size_t p : picks)
            annotations.push_back({inst.id, cells[p], nearest_vertex(mesh, inst.cells.point(cells[p])), category});
    }
    std::vector<KeypointPair> pairs;
    for (std::size_t a = 0; a + 1 < test.size() + (test.size() > 1 ? 1 : 0); ++a) {
        const Instance& A = test[a];
        const Instance& B = test[(a + 1) % test.size()];
        KeypointPair pair{A.id, B.id, {}, 0.0, 0.0};
        const auto cells_b = B.features.foreground_cells();
        int rmin = G, rmax = -1, cmin = G, cmax = -1;
        for (CellCoord v : cells_b) {
            rmin = std::min(rmin, v.row);
            rmax = std::max(rmax, v.row);
            cmin = std::min(cmin, v.col);
            cmax = std::max(cmax, v.col);
        }
        pair.bbox_height = rmax - rmin + 1;
        pair.bbox_width = cmax - cmin + 1;
        auto cells_a = A.features.foreground_cells();
        label_rng.shuffle(cells_a);
        for (CellCoord u : cells_a) {
            if (static_cast<int>(pair.keypoints.size()) >= config.keypoints_per_pair) break;
            const int k = nearest_vertex(mesh, A.cells.point(u));
            if (!B.view.visible[k]) continue;
            CellCoord v = pixel_to_cell(B.view.projections[k], B.view.size, G, G);
            if (!B.features.foreground(v))
                v = nearest_foreground_cell(B.features, (B.view.projections[k].row + 0.5) * G / B.view.size.height,
                                            (B.view.projections[k].col + 0.5) * G / B.view.size.width);
            pair.keypoints.emplace_back(u, v);
        }
        if (!pair.keypoints.empty()) pairs.push_back(std::move(pair));
    }
    outputs.push_back(dir / "annotations.jsonl");
    save_annotations(annotations, outputs.back());
    if (!pairs.empty()) {
        outputs.push_back(dir / "keypoints.jsonl");
        save_keypoint_pairs(pairs, outputs.back());
    }

    ManifestBuilder manifest("synth", common.seed,
                             {{"instances", config.instances},
                              {"test_instances", config.test_instances},
                              {"grid", G},
                              {"dim", config.dim},
                              {"noise", config.noise},
                              {"domain_shift", config.domain_shift},
                              {"boundary_bleed", config.boundary_bleed},
                              {"grazing", config.grazing},
                              {"annotations_per_image", config.annotations_per_image},
                              {"keypoints_per_pair", config.keypoints_per_pair},
                              {"embedding_seed", config.embedding_seed}});
    manifest.input(config.mesh);
    manifest.upstream(render_dir / kManifest);
    for (const auto& f : outputs) manifest.output(f);
    manifest.write(dir, clock.seconds());
    return dir;
}

// --- pseudo-gt --------------------------------------------------------------

fs::path cmd_pseudo_gt(const Common& common, const PseudoGtConfig& config) {
    Stopwatch clock;
    const Mesh mesh = load_checked_mesh(config.mesh);
    const fs::path render_dir = config.render_dir.value_or(stage_dir(common, "render"));
    const fs::path features_dir = config.features_dir.value_or(stage_dir(common, "features"));
    const fs::path dir = config.output_dir.value_or(stage_dir(common, "pseudo_gt"));

    const RenderSetup setup = render_setup(render_dir);
    if (setup.views != config.views || setup.style != config.style)
        fail(ErrorKind::InvalidArgument, "render stage in " + render_dir.string() + " has " +
                                             std::to_string(setup.views) + " " + to_string(setup.style) +
                                             " views; rerun `canonmap render --views " + std::to_string(config.views) +
                                             " --style " + to_string(config.style) + "`");
    const ViewBank bank =
        load_view_bank(render_dir, features_dir, mesh_identifier(config.mesh), mesh.num_vertices(), common.workers);
    const auto ids = list_ids(features_dir / "images", ".cfm", true);
    if (ids.empty()) fail(ErrorKind::MissingInput, "no image features in " + (features_dir / "images").string());

    std::vector<fs::path> outputs(ids.size());
    std::vector<std::size_t> counts(ids.size());
    parallel_for(ids.size(), common.workers, [&](std::size_t i) {
        const FeatureMap img = load_feature_map(features_dir / "images" / (ids[i] + ".cfm"));
        const PseudoGt gt = build_pseudo_gt(img, bank, config.samples, config.pooling, derive_seed(common.seed, fnv1a(ids[i])));
        outputs[i] = dir / (ids[i] + ".cpg");
        save_pseudo_gt(gt, outputs[i]);
        counts[i] = gt.entries.size();
    });

    ManifestBuilder manifest("pseudo-gt", common.seed,
                             {{"views", config.views},
                              {"style", to_string(config.style)},
                              {"pooling", to_string(config.pooling)},
                              {"samples", config.samples}});
    manifest.input(config.mesh);
    for (const auto& id : ids) manifest.input(features_dir / "images" / (id + ".cfm"));
    manifest.upstream(render_dir / kManifest);
    if (fs::exists(features_dir / kManifest)) manifest.upstream(features_dir / kManifest);
    for (const auto& f : outputs) manifest.output(f);
    manifest.set("images", ids.size());
    manifest.set("entries", std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    manifest.write(dir, clock.seconds());
    return dir;
}

// --- train ----------------------------------------------------------------

TrainStageResult cmd_train(const Common& common, const TrainStageConfig& config) {
    Stopwatch clock;
    const Mesh mesh = load_checked_mesh(config.mesh);
    const fs::path pre_dir = config.precompute_dir.value_or(stage_dir(common, "precompute"));
    const fs::path render_dir = config.render_dir.value_or(stage_dir(common, "render"));
    const fs::path features_dir = config.features_dir.value_or(stage_dir(common, "features"));
    const fs::path pseudo_dir = config.pseudo_dir.value_or(stage_dir(common, "pseudo_gt"));
    const fs::path model_path = config.model_out.value_or(stage_dir(common, "train") / "model.cck");
    const fs::path dir = model_path.parent_path().empty() ? fs::path(".") : model_path.parent_path();

    const Precomputed pre = load_precomputed(pre_dir, config.mesh);
    require_stage(pseudo_dir, "pseudo-gt");
    const std::string mesh_id = mesh_identifier(config.mesh);

    TrainingCorpus corpus;
    for (const auto& id : list_ids(pseudo_dir, ".cpg", false)) {
        TrainingImage img;
        img.id = id;
        img.features = load_feature_map(features_dir / "images" / (id + ".cfm"));
        const fs::path flip = features_dir / "images" / (id + ".flip.cfm");
        if (fs::exists(flip)) img.flipped = load_feature_map(flip);
        img.pseudo = load_pseudo_gt(pseudo_dir / (id + ".cpg"));
        corpus.images.push_back(std::move(img));
    }
    if (corpus.images.empty()) fail(ErrorKind::MissingInput, "no pseudo-GT files in " + pseudo_dir.string());

    int n_syn = 0;
    if (config.synth_views != 0) {
        ViewBank bank = load_view_bank(render_dir, features_dir, mesh_id, mesh.num_vertices(), common.workers);
        const int n = static_cast<int>(bank.views.size());
        n_syn = config.synth_views < 0 ? n : std::min(config.synth_views, n);
        for (int i = 0; i < n_syn; ++i) corpus.views.push_back(std::move(bank.views[static_cast<std::size_t>(i) * n / n_syn]));
    }

    const int feature_dim = corpus.images.front().features.dim();
    CseModel model(CseModel::model_basis(pre.basis), config.embed_dim, feature_dim, config.hidden);
    model.set_mesh_id(mesh_id);
    model.initialize(derive_seed(common.seed, 0x1417));

    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.lr = config.lr;
    tc.decay_epoch = config.decay_epoch;
    tc.batch_size = config.batch_size;
    tc.seed = derive_seed(common.seed, 0x7EA1);
    tc.weights = config.weights;
    tc.workers = common.workers;
    tc.on_epoch = config.on_epoch;
    TrainResult trained = train(std::move(model), corpus, pre.geodesics, pre.symmetry.flip_index, tc);

    save_checkpoint(trained.model, model_path);
    write_json(history_json(trained.history), dir / "history.json");

    ManifestBuilder manifest("train", common.seed,
                             {{"epochs", config.epochs},
                              {"lr", config.lr},
                              {"decay_epoch", config.decay_epoch},
                              {"batch_size", config.batch_size},
                              {"embed_dim", config.embed_dim},
                              {"hidden", config.hidden},
                              {"synth_views", n_syn},
                              {"weights", weights_json(config.weights)}});
    manifest.input(config.mesh);
    manifest.upstream(pre_dir / kManifest);
    manifest.upstream(pseudo_dir / kManifest);
    if (n_syn > 0) manifest.upstream(render_dir / kManifest);
    if (fs::exists(features_dir / kManifest)) manifest.upstream(features_dir / kManifest);
    manifest.output(model_path);
    manifest.output(dir / "history.json");
    manifest.set("mesh_id", mesh_id);
    manifest.write(dir, clock.seconds());
    return {model_path, std::move(trained.history)};
}

// --- eval -------------------------------------------------------------------

EvalResult cmd_eval(const Common& common, const EvalConfig& config) {
    Stopwatch clock;
    const Mesh mesh = load_checked_mesh(config.mesh);
    const fs::path pre_dir = config.precompute_dir.value_or(stage_dir(common, "precompute"));
    const fs::path model_path = config.model.value_or(stage_dir(common, "train") / "model.cck");
    const fs::path features_dir = config.features_dir.value_or(stage_dir(common, "features"));
    const fs::path render_dir = config.render_dir.value_or(stage_dir(common, "render"));
    const fs::path dir = config.output_dir.value_or(stage_dir(common, "eval"));

    if (!fs::exists(model_path))
        fail(ErrorKind::MissingInput, "model " + model_path.string() + " not found; run `canonmap train` first");
    const fs::path train_manifest = model_path.parent_path() / kManifest;
    require_stage(model_path.parent_path(), "train");
    verify_manifest(train_manifest, true);

    const Precomputed pre = load_precomputed(pre_dir, config.mesh);
    const CseModel model = load_checkpoint(model_path, CseModel::model_basis(pre.basis));
    if (model.mesh_id() != mesh_identifier(config.mesh))
        fail(ErrorKind::HashMismatch, "model was trained on mesh '" + model.mesh_id() + "', not " + config.mesh.string());

    std::map<std::string, FeatureMap> maps;
    auto lookup = [&](const std::string& id) -> const FeatureMap& {
        auto it = maps.find(id);
        if (it != maps.end()) return it->second;
        for (const char* sub : {"test", "images"}) {
            const fs::path p = features_dir / sub / (id + ".cfm");
            if (fs::exists(p)) return maps.emplace(id, load_feature_map(p)).first->second;
        }
        fail(ErrorKind::MissingInput, "missing feature map for image '" + id + "' under " + features_dir.string());
    };

    const fs::path ann_path = config.annotations.value_or(features_dir / "annotations.jsonl");
    const auto annotations = load_annotations(ann_path);
    EvalResult result;
    result.model = geodesic_error(model, lookup, annotations, pre.geodesics);
    result.report["geodesic_error"] = geodesic_json(result.model);

    if (config.zero_shot) {
        const ViewBank bank =
            load_view_bank(render_dir, features_dir, model.mesh_id(), mesh.num_vertices(), common.workers);
        result.zero_shot = geodesic_error(zero_shot_predictor(bank, config.pooling), lookup, annotations, pre.geodesics);
        result.report["zero_shot"] = geodesic_json(*result.zero_shot);
        result.report["zero_shot"]["pooling"] = to_string(config.pooling);
    }

    const fs::path kp_path = config.keypoints.value_or(features_dir / "keypoints.jsonl");
    if (fs::exists(kp_path)) {
        const auto pairs = load_keypoint_pairs(kp_path);
        result.pck = pck(model, pairs, lookup, config.pck_threshold, config.route);
        result.report["pck"] = {
            {"value", *result.pck}, {"threshold", config.pck_threshold}, {"route", to_string(config.route)}};
    } else if (config.keypoints) {
        fail(ErrorKind::MissingInput, "keypoint file not found: " + kp_path.string());
    }

    fs::create_directories(dir);
    write_json(result.report, dir / "report.json");
    ManifestBuilder manifest("eval", common.seed,
                             {{"zero_shot", config.zero_shot},
                              {"pooling", to_string(config.pooling)},
                              {"route", to_string(config.route)},
                              {"pck_threshold", config.pck_threshold}});
    manifest.input(config.mesh);
    manifest.input(model_path);
    manifest.input(ann_path);
    manifest.upstream(train_manifest);
    manifest.output(dir / "report.json");
    manifest.write(dir, clock.seconds());
    return result;
}

// --- visualize -------------------------------------------------------------

VisualizeResult cmd_visualize(const Common& common, const VisualizeConfig& config) {
    Stopwatch clock;
    const Mesh mesh = load_checked_mesh(config.mesh);
    const fs::path pre_dir = config.precompute_dir.value_or(stage_dir(common, "precompute"));
    const fs::path model_path = config.model.value_or(stage_dir(common, "train") / "model.cck");
    const fs::path dir = config.output_dir.value_or(stage_dir(common, "visualize"));
    if (!fs::exists(model_path))
        fail(ErrorKind::MissingInput, "model " + model_path.string() + " not found; run `canonmap train` first");

    const Precomputed pre = load_precomputed(pre_dir, config.mesh);
    const CseModel model = load_checkpoint(model_path, CseModel::model_basis(pre.basis));
    const FeatureMap img = load_feature_map(config.features);

    std::vector<CellCoord> queries = config.queries;
    if (queries.empty()) {
        const auto cells = img.foreground_cells();
        const double cr = img.height() / 2.0, cc = img.width() / 2.0;
        queries.push_back(*std::min_element(cells.begin(), cells.end(), [&](CellCoord a, CellCoord b) {
            return std::hypot(a.row + 0.5 - cr, a.col + 0.5 - cc) < std::hypot(b.row + 0.5 - cr, b.col + 0.5 - cc);
        }));
    }

    const Eigen::MatrixXd E = model.vertex_embeddings();
    const Camera front = sample_viewpoints(mesh, 1, 2.5, {config.size}).front();
    const Vec3 center = mesh.centroid();
    const double distance = (front.position() - center).norm();
    VisualizeResult result;
    for (CellCoord u : queries) {
        if (!img.foreground(u))
            fail(ErrorKind::InvalidArgument,
                 "query cell (" + std::to_string(u.row) + ", " + std::to_string(u.col) + ") is background");
        const Eigen::VectorXd p = match_distribution(E, model.pixel_embed(img.feature(u.row, u.col)));
        // Look at the peak from outside so the hot spot is always on screen.
        Eigen::Index peak = 0;
        p.maxCoeff(&peak);
        Vec3 toward = mesh.vertices()[peak] - center;
        toward = toward.norm() > 0 ? toward.normalized() : Vec3(0, 0, 1);
        const Vec3 up = std::abs(toward.y()) > 0.95 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        const RenderedView view =
            render(mesh, Camera(center + distance * toward, center, up, front.fov_y(), config.size), RenderStyle::Normals);
        const fs::path out = dir / ("heatmap_" + std::to_string(u.row) + "_" + std::to_string(u.col) + ".ppm");
        write_rgb_ppm(heatmap_image(mesh, view, vertex_heat(p)), view.size, out);
        result.heatmaps.push_back(out);
    }
    const auto matches = match_cells(model, img);
    result.texture = dir / "texture_transfer.ppm";
    write_rgb_ppm(texture_transfer_image(mesh, img, matches), img.source_size(), result.texture);
    result.smoothness = transfer_smoothness(mesh, img, matches);

    json q = json::array();
    for (CellCoord u : queries) q.push_back({u.row, u.col});
    ManifestBuilder manifest("visualize", common.seed, {{"queries", q}});
    manifest.input(config.mesh);
    manifest.input(model_path);
    manifest.input(config.features);
    for (const auto& h : result.heatmaps) manifest.output(h);
    manifest.output(result.texture);
    manifest.set("smoothness", result.smoothness);
    manifest.write(dir, clock.seconds());
    return result;
}

}  // namespace canonmap::pipeline
