// canonmap command-line driver. Exit codes: 0 ok, 1 usage, 2 data error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "canonmap/error.hpp"
#include "canonmap/pipeline.hpp"

namespace cp = canonmap::pipeline;
using canonmap::CellCoord;

namespace {

const std::vector<std::string> kStyles{"normals", "shaded", "depth"};
const std::vector<std::string> kPoolings{"max", "mean"};
const std::vector<std::string> kRoutes{"im2m2im", "im2im"};

std::string fmt(double v, int prec = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

void print_report(const cp::EvalResult& r) {
    std::cout << "metric                       value\n";
    std::cout << "geodesic error (model)       " << fmt(r.model.mean) << "  (" << r.model.count << " annotations)\n";
    if (r.zero_shot) std::cout << "geodesic error (zero-shot)   " << fmt(r.zero_shot->mean) << "\n";
    for (const auto& [name, v] : r.model.per_class) std::cout << "  class " << name << "  " << fmt(v) << "\n";
    if (r.pck) std::cout << "PCK                          " << fmt(*r.pck) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"canonical surface maps: precompute, render, synth, pseudo-gt, train, eval, visualize"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    cp::Common common;
    std::string out_dir = common.out_dir.string();
    app.add_option("--seed", common.seed, "base seed");
    app.add_option("--workers", common.workers, "worker threads per stage")->check(CLI::PositiveNumber);
    app.add_option("--out-dir", out_dir, "root directory for stage outputs");
    app.fallthrough();

    std::string mesh;
    auto mesh_option = [&](CLI::App* sub) {
        sub->add_option("--mesh", mesh, "template mesh (Wavefront .obj)")->required()->check(CLI::ExistingFile);
    };
    auto opt_path = [](CLI::App* sub, const std::string& name, std::optional<cp::fs::path>& target,
                       const std::string& help) {
        sub->add_option_function<std::string>(name, [&target](const std::string& v) { target = v; }, help);
    };

    // precompute
    cp::PrecomputeConfig pre;
    auto* precompute = app.add_subcommand("precompute", "spectral basis, geodesics and symmetry (cached)");
    mesh_option(precompute);
    precompute->add_option("--basis-size", pre.basis_size, "number of Laplacian eigenvectors")->check(CLI::PositiveNumber);
    opt_path(precompute, "--cache-dir", pre.cache_dir, "cache directory (overrides CANONMAP_CACHE)");

    // render
    cp::RenderConfig rc;
    std::string style = "normals";
    bool no_images = false;
    auto* render = app.add_subcommand("render", "render template views and vertex projections");
    mesh_option(render);
    render->add_option("--views", rc.views)->check(CLI::PositiveNumber);
    render->add_option("--style", style)->check(CLI::IsMember(kStyles));
    render->add_option("--height", rc.size.height)->check(CLI::PositiveNumber);
    render->add_option("--width", rc.size.width)->check(CLI::PositiveNumber);
    render->add_option("--radius-scale", rc.radius_scale)->check(CLI::PositiveNumber);
    render->add_flag("--no-images", no_images, "skip PPM/PGM previews");

    // synth
    cp::SynthConfig sc;
    bool no_bleed = false;
    auto* synth = app.add_subcommand("synth", "synthetic oracle features, annotations and keypoints for a toy run");
    mesh_option(synth);
    opt_path(synth, "--render-dir", sc.render_dir, "render stage directory");
    synth->add_option("--instances", sc.instances, "training instances")->check(CLI::NonNegativeNumber);
    synth->add_option("--test-instances", sc.test_instances, "held-out instances")->check(CLI::NonNegativeNumber);
    synth->add_option("--grid", sc.grid, "feature grid side")->check(CLI::PositiveNumber);
    synth->add_option("--dim", sc.dim, "feature dimension")->check(CLI::Range(5, 4096));
    synth->add_option("--noise", sc.noise)->check(CLI::NonNegativeNumber);
    synth->add_option("--domain-shift", sc.domain_shift)->check(CLI::NonNegativeNumber);
    synth->add_flag("--no-bleed", no_bleed, "disable background bleed at silhouette cells");
    synth->add_option("--grazing", sc.grazing, "fade cells seen more obliquely than this |cos| (0: off)")
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--annotations", sc.annotations_per_image, "annotations per test image")->check(CLI::NonNegativeNumber);
    synth->add_option("--keypoints", sc.keypoints_per_pair, "keypoints per test pair")->check(CLI::NonNegativeNumber);

    // pseudo-gt
    cp::PseudoGtConfig pg;
    std::string pooling = "max";
    auto* pseudo = app.add_subcommand("pseudo-gt", "pool image-to-render similarities into per-image pseudo labels");
    mesh_option(pseudo);
    pseudo->add_option("--views", pg.views)->check(CLI::PositiveNumber);
    pseudo->add_option("--style", style)->check(CLI::IsMember(kStyles));
    pseudo->add_option("--pooling", pooling)->check(CLI::IsMember(kPoolings));
    pseudo->add_option("--samples", pg.samples, "foreground cells per image")->check(CLI::PositiveNumber);
    opt_path(pseudo, "--render-dir", pg.render_dir, "render stage directory");
    opt_path(pseudo, "--features-dir", pg.features_dir, "features directory (views/ and images/)");

    // train
    cp::TrainStageConfig tc;
    bool quiet = false;
    auto* trainc = app.add_subcommand("train", "fit the spectral embedding and pixel head");
    mesh_option(trainc);
    opt_path(trainc, "--precompute-dir", tc.precompute_dir, "precompute stage directory");
    opt_path(trainc, "--render-dir", tc.render_dir, "render stage directory");
    opt_path(trainc, "--features-dir", tc.features_dir, "features directory");
    opt_path(trainc, "--pseudo-dir", tc.pseudo_dir, "pseudo-gt stage directory");
    opt_path(trainc, "--out", tc.model_out, "checkpoint path");
    trainc->add_option("--synth-views", tc.synth_views, "render views for the synthetic term (-1: all, 0: off)")
        ->check(CLI::Range(-1, 1 << 20));
    trainc->add_option("--epochs", tc.epochs)->check(CLI::PositiveNumber);
    trainc->add_option("--lr", tc.lr)->check(CLI::PositiveNumber);
    trainc->add_option("--decay-epoch", tc.decay_epoch)->check(CLI::NonNegativeNumber);
    trainc->add_option("--batch-size", tc.batch_size)->check(CLI::PositiveNumber);
    trainc->add_option("--embed-dim", tc.embed_dim)->check(CLI::PositiveNumber);
    trainc->add_option("--hidden", tc.hidden)->check(CLI::PositiveNumber);
    trainc->add_option("--alpha", tc.weights.alpha, "pseudo-label weight")->check(CLI::NonNegativeNumber);
    trainc->add_option("--beta", tc.weights.beta, "cycle weight")->check(CLI::NonNegativeNumber);
    trainc->add_option("--gamma", tc.weights.gamma, "distance weight")->check(CLI::NonNegativeNumber);
    trainc->add_option("--delta", tc.weights.delta, "equivariance weight")->check(CLI::NonNegativeNumber);
    trainc->add_option("--zeta", tc.weights.zeta, "synthetic weight")->check(CLI::NonNegativeNumber);
    trainc->add_flag("--quiet", quiet, "no per-epoch log");

    // eval
    cp::EvalConfig ec;
    bool no_zero_shot = false;
    std::string route = "im2m2im";
    std::string eval_pooling = "max";
    auto* evalc = app.add_subcommand("eval", "geodesic error, zero-shot baseline and keypoint PCK");
    mesh_option(evalc);
    opt_path(evalc, "--precompute-dir", ec.precompute_dir, "precompute stage directory");
    opt_path(evalc, "--model", ec.model, "checkpoint");
    opt_path(evalc, "--features-dir", ec.features_dir, "features directory");
    opt_path(evalc, "--annotations", ec.annotations, "annotation JSONL");
    opt_path(evalc, "--keypoints", ec.keypoints, "keypoint pair JSONL");
    opt_path(evalc, "--render-dir", ec.render_dir, "render stage directory (zero-shot baseline)");
    evalc->add_flag("--no-zero-shot", no_zero_shot, "skip the zero-shot pooled baseline");
    evalc->add_option("--pooling", eval_pooling, "zero-shot pooling")->check(CLI::IsMember(kPoolings));
    evalc->add_option("--route", route, "keypoint transfer route")->check(CLI::IsMember(kRoutes));
    evalc->add_option("--pck-threshold", ec.pck_threshold)->check(CLI::Bound(1e-6, 0.999999));

    // visualize
    cp::VisualizeConfig vc;
    std::string features;
    std::vector<std::string> queries;
    auto* vis = app.add_subcommand("visualize", "match heatmaps and texture transfer for one image");
    mesh_option(vis);
    opt_path(vis, "--precompute-dir", vc.precompute_dir, "precompute stage directory");
    opt_path(vis, "--model", vc.model, "checkpoint");
    vis->add_option("--features", features, "CFM1 image features")->required()->check(CLI::ExistingFile);
    vis->add_option("--query", queries, "query cell as row,col (repeatable)");
    vis->add_option("--height", vc.size.height)->check(CLI::PositiveNumber);
    vis->add_option("--width", vc.size.width)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    std::vector<CellCoord> parsed_queries;
    for (const auto& q : queries) {
        std::istringstream in(q);
        CellCoord c{};
        char comma = 0;
        if (!(in >> c.row >> comma >> c.col) || comma != ',' || c.row < 0 || c.col < 0) {
            std::cerr << "error: --query expects row,col with non-negative integers, got '" << q << "'\n";
            return 1;
        }
        parsed_queries.push_back(c);
    }

    common.out_dir = out_dir;
    try {
        if (*precompute) {
            pre.mesh = mesh;
            const auto r = cp::cmd_precompute(common, pre);
            std::cout << "precompute -> " << r.dir.string() << (r.cache_hit ? " (cache hit " : " (computed, key ")
                      << r.cache_key.substr(0, 12) << ")\n";
        } else if (*render) {
            rc.mesh = mesh;
            rc.style = canonmap::parse_render_style(style);
            rc.write_images = !no_images;
            std::cout << "render -> " << cp::cmd_render(common, rc).string() << "\n";
        } else if (*synth) {
            sc.mesh = mesh;
            sc.boundary_bleed = !no_bleed;
            std::cout << "synth -> " << cp::cmd_synth(common, sc).string() << "\n";
        } else if (*pseudo) {
            pg.mesh = mesh;
            pg.style = canonmap::parse_render_style(style);
            pg.pooling = canonmap::parse_pooling(pooling);
            std::cout << "pseudo-gt -> " << cp::cmd_pseudo_gt(common, pg).string() << "\n";
        } else if (*trainc) {
            tc.mesh = mesh;
            if (!quiet)
                tc.on_epoch = [](const canonmap::EpochRecord& r) {
                    std::cerr << "epoch " << r.epoch << "  lr " << r.lr << "  loss " << fmt(r.loss.total, 5)
                              << "  (pseudo " << fmt(r.loss.pseudo, 4) << ", syn " << fmt(r.loss.syn, 4) << ")\n";
                };
            const auto r = cp::cmd_train(common, tc);
            std::cout << "train -> " << r.model.string() << "\n";
        } else if (*evalc) {
            ec.mesh = mesh;
            ec.zero_shot = !no_zero_shot;
            ec.pooling = canonmap::parse_pooling(eval_pooling);
            ec.route = canonmap::parse_transfer_route(route);
            print_report(cp::cmd_eval(common, ec));
        } else if (*vis) {
            vc.mesh = mesh;
            vc.features = features;
            vc.queries = parsed_queries;
            const auto r = cp::cmd_visualize(common, vc);
            for (const auto& h : r.heatmaps) std::cout << "heatmap -> " << h.string() << "\n";
            std::cout << "texture -> " << r.texture.string() << "  smoothness " << fmt(r.smoothness, 4) << "\n";
        }
    } catch (const canonmap::Error& e) {
        std::cerr << "error [" << canonmap::to_string(e.kind()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
