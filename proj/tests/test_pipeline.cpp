#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "canonmap/error.hpp"
#include "canonmap/hash.hpp"
#include "canonmap/pipeline.hpp"
#include "oracles.hpp"

using namespace canonmap;
namespace cp = canonmap::pipeline;
namespace fs = std::filesystem;

namespace {

// Runs every stage at toy scale into `out`.
struct ToyRun {
    oracle::TempDir tmp{"pipe"};
    cp::Common common;
    fs::path mesh;

    ToyRun() {
        mesh = tmp / "ico.obj";
        save_obj(make_icosphere(2), mesh);
        common.out_dir = tmp / "out";
        common.seed = 5;
    }

    cp::PrecomputeResult precompute() {
        cp::PrecomputeConfig c;
        c.mesh = mesh;
        c.basis_size = 16;
        c.cache_dir = tmp / "cache";
        return cp::cmd_precompute(common, c);
    }
    void render() {
        cp::RenderConfig c;
        c.mesh = mesh;
        c.views = 8;
        c.size = {64, 64};
        cp::cmd_render(common, c);
    }
    void synth() {
        cp::SynthConfig c;
        c.mesh = mesh;
        c.instances = 3;
        c.test_instances = 2;
        c.grid = 12;
        c.dim = 8;
        c.annotations_per_image = 10;
        c.keypoints_per_pair = 5;
        cp::cmd_synth(common, c);
    }
    void pseudo(Pooling p = Pooling::Max) {
        cp::PseudoGtConfig c;
        c.mesh = mesh;
        c.views = 8;
        c.pooling = p;
        c.samples = 20;
        cp::cmd_pseudo_gt(common, c);
    }
    cp::TrainStageResult train() {
        cp::TrainStageConfig c;
        c.mesh = mesh;
        c.epochs = 2;
        c.embed_dim = 4;
        c.hidden = 8;
        return cp::cmd_train(common, c);
    }
    cp::EvalResult eval() {
        cp::EvalConfig c;
        c.mesh = mesh;
        return cp::cmd_eval(common, c);
    }
    void all() {
        precompute();
        render();
        synth();
        pseudo();
        train();
    }
};

ErrorKind kind_of(const std::function<void()>& f, std::string* message = nullptr) {
    try {
        f();
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Io;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CANONMAP_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("precompute caches by mesh content") {
    ToyRun t;
    const auto first = t.precompute();
    CHECK_FALSE(first.cache_hit);
    CHECK(first.max_geodesic == 228.0);
    const std::string h = sha256_file(first.dir / "geodesics.cgt");
    const auto second = t.precompute();
    CHECK(second.cache_hit);
    CHECK(second.cache_key == first.cache_key);
    CHECK(sha256_file(second.dir / "geodesics.cgt") == h);
    CHECK(cp::read_manifest(second.dir / "manifest.json").at("cache_hit") == true);

    // a different mesh misses
    save_obj(make_icosphere(1), t.mesh);
    CHECK_FALSE(t.precompute().cache_hit);
}

TEST_CASE("cache directory from the environment") {
    ToyRun t;
    const fs::path env_cache = t.tmp / "envcache";
    setenv("CANONMAP_CACHE", env_cache.c_str(), 1);
    cp::PrecomputeConfig c;
    c.mesh = t.mesh;
    c.basis_size = 8;
    const auto r = cp::cmd_precompute(t.common, c);
    unsetenv("CANONMAP_CACHE");
    CHECK(fs::exists(env_cache / r.cache_key / "basis.csb"));
}

TEST_CASE("missing inputs name what to do") {
    ToyRun t;
    std::string msg;
    cp::PrecomputeConfig c;
    c.mesh = t.tmp / "nope.obj";
    CHECK(kind_of([&] { cp::cmd_precompute(t.common, c); }, &msg) == ErrorKind::MissingInput);
    CHECK(msg.find("nope.obj") != std::string::npos);

    CHECK(kind_of([&] { t.pseudo(); }, &msg) == ErrorKind::MissingInput);
    CHECK(msg.find("canonmap render") != std::string::npos);
    CHECK(kind_of([&] { t.train(); }, &msg) == ErrorKind::MissingInput);
    CHECK(msg.find("canonmap precompute") != std::string::npos);
    CHECK(kind_of([&] { t.eval(); }, &msg) == ErrorKind::MissingInput);
    CHECK(msg.find("canonmap train") != std::string::npos);
}

TEST_CASE("full toy run, determinism and DAG verification") {
    ToyRun a;
    a.all();
    const cp::EvalResult ev = a.eval();
    CHECK(ev.model.count == 20);
    CHECK(ev.zero_shot.has_value());
    CHECK(ev.pck.has_value());
    CHECK(fs::exists(a.common.out_dir / "eval" / "report.json"));
    CHECK(cp::read_manifest(a.common.out_dir / "pseudo_gt" / "manifest.json").at("config").at("pooling") == "max");

    // same seed, fresh directory: every recorded output hash agrees
    ToyRun b;
    save_obj(make_icosphere(2), b.mesh);
    b.all();
    for (const char* stage : {"precompute", "render", "features", "pseudo_gt", "train"}) {
        const auto ma = cp::read_manifest(a.common.out_dir / stage / "manifest.json");
        const auto mb = cp::read_manifest(b.common.out_dir / stage / "manifest.json");
        REQUIRE(ma.at("outputs").size() == mb.at("outputs").size());
        for (std::size_t i = 0; i < ma.at("outputs").size(); ++i)
            CHECK(ma["outputs"][i]["sha256"] == mb["outputs"][i]["sha256"]);
    }

    cp::verify_manifest(a.common.out_dir / "eval" / "manifest.json");
    // corrupt an upstream output: eval must refuse
    {
        std::ofstream(a.common.out_dir / "render" / "view_003.cvp", std::ios::app) << "junk";
    }
    std::string msg;
    CHECK(kind_of([&] { a.eval(); }, &msg) == ErrorKind::HashMismatch);
    CHECK(msg.find("view_003.cvp") != std::string::npos);
}

TEST_CASE("mean pooling flows into the manifest") {
    ToyRun t;
    t.precompute();
    t.render();
    t.synth();
    t.pseudo(Pooling::Mean);
    CHECK(cp::read_manifest(t.common.out_dir / "pseudo_gt" / "manifest.json").at("config").at("pooling") == "mean");
}

TEST_CASE("pseudo-gt refuses a render with other settings") {
    ToyRun t;
    t.precompute();
    t.render();
    t.synth();
    cp::PseudoGtConfig c;
    c.mesh = t.mesh;
    c.views = 72;
    std::string msg;
    CHECK(kind_of([&] { cp::cmd_pseudo_gt(t.common, c); }, &msg) == ErrorKind::InvalidArgument);
    CHECK(msg.find("--views 72") != std::string::npos);
}

TEST_CASE("visualize") {
    ToyRun t;
    t.all();
    cp::VisualizeConfig c;
    c.mesh = t.mesh;
    c.features = t.common.out_dir / "features" / "test" / "test_000.cfm";
    c.size = {48, 48};
    const auto r = cp::cmd_visualize(t.common, c);
    CHECK(r.heatmaps.size() == 1);
    CHECK(fs::exists(r.texture));
    CHECK(r.smoothness >= 0.0);
    c.queries = {{0, 0}};
    CHECK(kind_of([&] { cp::cmd_visualize(t.common, c); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("command line exit codes") {
    ToyRun t;
    const std::string out = "--out-dir " + (t.tmp / "cli").string();
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("") == 1);
    CHECK(run_cli("precompute") == 1);
    CHECK(run_cli(out + " render --mesh " + t.mesh.string() + " --style cartoon") == 1);
    CHECK(run_cli(out + " precompute --mesh " + (t.tmp / "missing.obj").string()) == 1);
    {
        std::ofstream(t.tmp / "quad.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
    }
    CHECK(run_cli(out + " precompute --mesh " + (t.tmp / "quad.obj").string()) == 2);
    CHECK(run_cli(out + " --seed 3 precompute --basis-size 8 --mesh " + t.mesh.string()) == 0);
    CHECK(run_cli(out + " train --mesh " + t.mesh.string()) == 2);
}

}
