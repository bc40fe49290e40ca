// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "canonmap/error.hpp"
#include "canonmap/geodesics.hpp"
#include "canonmap/hash.hpp"
#include "canonmap/losses.hpp"
#include "canonmap/pipeline.hpp"
#include "canonmap/pseudo_gt.hpp"
#include "canonmap/renderer.hpp"
#include "canonmap/spectral.hpp"
#include "model_helpers.hpp"
#include "oracles.hpp"

using namespace canonmap;
namespace cp = canonmap::pipeline;
namespace fs = std::filesystem;

namespace {

// tolerances
constexpr double kEigTol = 1e-6;
constexpr double kOrthoTol = 1e-5;
constexpr double kSpectralSeconds = 10.0;
constexpr double kGeodesicRelErr = 0.05;
constexpr double kTriangleSlack = 0.02;
constexpr int kTriples = 1000;
constexpr double kGeodesicSeconds = 30.0;
constexpr double kVisibilityAgreement = 0.98;
constexpr int kVisibilityPairs = 1000;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradStep = 1e-4;
constexpr double kGradientSeconds = 60.0;
constexpr double kLnKTol = 1e-9;
constexpr double kZeroLossTol = 1e-9;
constexpr double kOneHotScale = 60.0;
constexpr double kClosedLoopError = 20.0;
constexpr double kClosedLoopSeconds = 300.0;
constexpr double kNoPseudoFactor = 2.0;
constexpr std::uint64_t kSeed = 7;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void guarded(const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(false, name, std::string("threw: ") + e.what());
    }
}

void spectral() {
    const Mesh m = make_icosphere(2);  // 162 vertices
    const int q = 32;
    const auto t0 = std::chrono::steady_clock::now();
    const SpectralBasis b = compute_spectral_basis(m, q);
    const double secs = seconds_since(t0);
    const auto [vals, vecs] = oracle::dense_eigenpairs(m, q);
    double eig = 0.0;
    for (int i = 0; i < q; ++i) eig = std::max(eig, std::abs(b.eigenvalues[i] - vals[i]));
    const Eigen::MatrixXd G = b.basis_U.transpose() * b.mass_weights.asDiagonal() * b.basis_U;
    const double ortho = (G - Eigen::MatrixXd::Identity(q, q)).cwiseAbs().maxCoeff();
    const double lam0 = std::abs(b.eigenvalues[0]);
    const bool ok = m.num_vertices() <= 200 && eig <= kEigTol && ortho <= kOrthoTol && lam0 <= kEigTol &&
                    secs < kSpectralSeconds;
    report(ok, "spectral",
           fmt("K=%zu Q=%d max|dlambda|=%.2e (tol %.0e) ortho=%.2e (tol %.0e) |lambda0|=%.2e time=%.2fs", m.num_vertices(),
               q, eig, kEigTol, ortho, kOrthoTol, lam0, secs));
}

void geodesic() {
    const Mesh m = make_icosphere(3);
    const std::size_t K = m.num_vertices();
    const auto t0 = std::chrono::steady_clock::now();
    const auto raw = heat_distances_all_pairs(m);
    const GeodesicTable table = normalize_geodesics(K, raw);
    const double secs = seconds_since(t0);

    double rel = 0.0, rel_sphere = 0.0;
    std::size_t n = 0;
    const double R = m.vertices()[0].norm();
    for (std::size_t s = 0; s < K; ++s) {
        const auto d = oracle::dijkstra(m, static_cast<int>(s));
        for (std::size_t k = 0; k < K; ++k) {
            if (k == s) continue;
            rel += std::abs(raw[s * K + k] - d[k]) / d[k];
            const double gc = R * oracle::great_circle(m.vertices()[s], m.vertices()[k]);
            rel_sphere += std::abs(raw[s * K + k] - gc) / gc;
            ++n;
        }
    }
    rel /= static_cast<double>(n);
    rel_sphere /= static_cast<double>(n);

    float mx = 0.0f;
    for (float v : table.data()) mx = std::max(mx, v);

    Rng rng(kSeed);
    int violations = 0;
    for (int t = 0; t < kTriples; ++t) {
        const std::size_t a = rng.below(K), b = rng.below(K), c = rng.below(K);
        if (table(a, c) > (1.0 + kTriangleSlack) * (table(a, b) + table(b, c)) + 1e-9) ++violations;
    }
    const bool ok = rel <= kGeodesicRelErr && mx == 228.0f && violations == 0 && secs < kGeodesicSeconds;
    report(ok, "geodesic",
           fmt("K=%zu mean rel err vs Dijkstra=%.4f (tol %.2f) [vs great circle %.4f] max=%.6g "
               "triangle violations=%d/%d time=%.2fs",
               K, rel, kGeodesicRelErr, rel_sphere, static_cast<double>(mx), violations, kTriples, secs));
}

void visibility() {
    const Mesh m = make_icosphere(3);
    const auto cams = sample_viewpoints(m, 72, 2.5, {{128, 128}});
    std::vector<RenderedView> views;
    views.reserve(cams.size());
    for (const auto& c : cams) views.push_back(render(m, c, RenderStyle::Normals));
    Rng rng(kSeed);
    int agree = 0;
    for (int i = 0; i < kVisibilityPairs; ++i) {
        const int k = static_cast<int>(rng.below(m.num_vertices()));
        const std::size_t v = rng.below(cams.size());
        agree += (views[v].visible[k] != 0) == oracle::ray_cast_visible(m, cams[v], k);
    }
    const double frac = static_cast<double>(agree) / kVisibilityPairs;
    report(frac >= kVisibilityAgreement, "visibility",
           fmt("agreement %.4f on %d (vertex, view) pairs (need >= %.2f)", frac, kVisibilityPairs, kVisibilityAgreement));
}

FeatureMap random_map(int h, int w, int d, Rng& rng) {
    FeatureMap m(h, w, d, {h * 4, w * 4});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            m.set_foreground(r, c, rng.uniform() < 0.8);
            for (float& x : m.feature(r, c)) x = static_cast<float>(rng.normal());
        }
    m.set_foreground(0, 0, true);
    return m;
}

ViewBank random_bank(int K, int N, Rng& rng) {
    ViewBank bank;
    bank.num_vertices = K;
    for (int n = 0; n < N; ++n) {
        BankView v;
        v.features = random_map(8, 8, 16, rng);
        const auto fg = v.features.foreground_cells();
        v.visible.resize(K);
        v.vertex_cell.resize(K);
        for (int k = 0; k < K; ++k) {
            v.visible[k] = rng.uniform() < 0.6;
            v.vertex_cell[k] = fg[rng.below(fg.size())];
        }
        bank.views.push_back(std::move(v));
    }
    return bank;
}

std::vector<double> brute_force(const FeatureMap& img, CellCoord u, const ViewBank& bank, Pooling pooling) {
    std::vector<double> out(bank.num_vertices);
    const auto q = img.feature(u.row, u.col);
    for (std::size_t k = 0; k < bank.num_vertices; ++k) {
        double acc = pooling == Pooling::Max ? kMaskedScore : 0.0;
        int n = 0;
        for (const BankView& v : bank.views) {
            if (!v.visible[k]) continue;
            const auto t = v.features.feature(v.vertex_cell[k].row, v.vertex_cell[k].col);
            double qq = 0, dot = 0, tt = 0;
            for (int d = 0; d < img.dim(); ++d) {
                qq += static_cast<double>(q[d]) * q[d];
                dot += static_cast<double>(q[d]) * t[d];
                tt += static_cast<double>(t[d]) * t[d];
            }
            const double s = std::clamp(dot / (std::sqrt(qq) * std::sqrt(tt)), -1.0, 1.0);
            acc = pooling == Pooling::Max ? std::max(acc, s) : acc + s;
            ++n;
        }
        out[k] = n == 0 ? kMaskedScore : (pooling == Pooling::Max ? acc : acc / n);
    }
    return out;
}

void pooling() {
    Rng rng(kSeed);
    const ViewBank bank = random_bank(50, 4, rng);
    const FeatureMap img = random_map(8, 8, 16, rng);
    std::size_t mismatches = 0, compared = 0;
    for (CellCoord u : img.foreground_cells())
        for (Pooling p : {Pooling::Max, Pooling::Mean}) {
            const auto got = vertex_similarity(img, u, bank, p);
            const auto want = brute_force(img, u, bank, p);
            for (std::size_t k = 0; k < want.size(); ++k) mismatches += got[k] != want[k];
            compared += want.size();
        }
    std::size_t order_violations = 0, order_checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const ViewBank b = random_bank(50, 2 + trial % 6, rng);
        const FeatureMap im = random_map(8, 8, 16, rng);
        for (CellCoord u : im.foreground_cells()) {
            const auto mx = vertex_similarity(im, u, b, Pooling::Max);
            const auto mn = vertex_similarity(im, u, b, Pooling::Mean);
            for (std::size_t k = 0; k < mx.size(); ++k) order_violations += mx[k] < mn[k];
            order_checked += mx.size();
        }
    }
    report(mismatches == 0 && order_violations == 0, "pooling",
           fmt("K=50 N=4: %zu/%zu scores differ from brute force; max < mean in %zu/%zu", mismatches, compared,
               order_violations, order_checked));
}

GeodesicTable random_table(int K, Rng& rng) {
    std::vector<double> raw(static_cast<std::size_t>(K) * K, 0.0);
    for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b) raw[a * K + b] = raw[b * K + a] = 1.0 + rng.uniform();
    return normalize_geodesics(K, raw);
}

void gradient() {
    const int K = 20, Q = 8, D = 4, Df = 6, H = 5;
    const auto t0 = std::chrono::steady_clock::now();
    CseModel model = helpers::random_model(K, Q, D, Df, H, kSeed);
    Rng rng(kSeed + 1);
    helpers::FeaturePool pool;
    const GeodesicTable geo = random_table(K, rng);
    std::vector<int> flip(K);
    for (int k = 0; k < K; ++k) flip[k] = K - 1 - k;

    LossBatch batch;
    for (int img = 0; img < 2; ++img) {
        ImageTerms t;
        for (int i = 0; i < 6; ++i) t.pseudo.push_back({pool.add(Df, rng), static_cast<int>(rng.below(K))});
        for (int i = 0; i < 5; ++i) t.cycle.push_back({pool.add(Df, rng), rng.uniform(0, 8), rng.uniform(0, 8)});
        for (int i = 0; i < 4; ++i) t.flips.push_back({pool.add(Df, rng), pool.add(Df, rng)});
        batch.images.push_back(std::move(t));
    }
    for (int i = 0; i < 5; ++i) batch.synthetic.push_back({pool.add(Df, rng), static_cast<int>(rng.below(K))});
    batch.synthetic_scale = 0.5;
    const LossWeights w;  // 0.1, 0.002, 0.002, 0.001, 0.1

    ModelGradient g(model);
    const LossReport rep = total_loss(model, batch, geo, flip, w, &g);
    const Eigen::VectorXd analytic = g.flatten(model);

    Eigen::VectorXd theta = model.parameters();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double t = theta[i];
        theta[i] = t + kGradStep;
        model.set_parameters(theta);
        const double up = total_loss(model, batch, geo, flip, w).total;
        theta[i] = t - kGradStep;
        model.set_parameters(theta);
        const double dn = total_loss(model, batch, geo, flip, w).total;
        theta[i] = t;
        const double num = (up - dn) / (2 * kGradStep);
        const double denom = std::max({std::abs(analytic[i]), std::abs(num), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - num) / denom);
    }
    model.set_parameters(theta);
    const double secs = seconds_since(t0);
    const bool active = rep.pseudo > 0 && rep.dist > 0 && rep.cyc > 0 && rep.eq > 0 && rep.syn > 0;
    report(active && worst <= kGradRelTol && secs < kGradientSeconds, "gradient",
           fmt("K=%d Q=%d D=%d, %ld params, terms (%.3g %.3g %.3g %.3g %.3g), worst rel err %.2e (tol %.0e) time=%.2fs",
               K, Q, D, static_cast<long>(theta.size()), rep.pseudo, rep.dist, rep.cyc, rep.eq, rep.syn, worst,
               kGradRelTol, secs));
}

void loss_sanity() {
    const int K = 20;
    Rng rng(kSeed);
    helpers::FeaturePool pool;

    // uniform: all-zero vertex embeddings
    CseModel uniform = helpers::random_model(K, 8, 4, 6, 5, kSeed);
    uniform.coeffs().setZero();
    std::vector<LabeledFeature> batch;
    for (int i = 0; i < 10; ++i) batch.push_back({pool.add(6, rng), static_cast<int>(rng.below(K))});
    const double lu = loss_pseudo(uniform, batch);
    const double uerr = std::abs(lu - std::log(static_cast<double>(K)));

    const CseModel hot = helpers::one_hot_model(K, kOneHotScale);
    const GeodesicTable geo = random_table(K, rng);
    std::vector<LabeledFeature> labeled;
    for (int k = 0; k < K; ++k) labeled.push_back({pool.add(helpers::one_hot(K, k)), k});
    const double lp = loss_pseudo(hot, labeled);
    const double ld = loss_dist(hot, labeled, geo);
    const std::vector<PositionedFeature> single{{pool.add(helpers::one_hot(K, 3)), 2.0, 5.0}};
    const double lc = loss_cyc(hot, single);
    const double ls = loss_syn(hot, labeled);
    const bool ok = uerr <= kLnKTol && lp <= kZeroLossTol && ld <= kZeroLossTol && lc <= kZeroLossTol &&
                    ls <= kZeroLossTol;
    report(ok, "loss sanity",
           fmt("uniform pseudo - ln K = %.1e (tol %.0e); one-hot pseudo=%.1e dist=%.1e cyc=%.1e syn=%.1e (tol %.0e)",
               uerr, kLnKTol, lp, ld, lc, ls, kZeroLossTol));
}

struct Stages {
    oracle::TempDir tmp{"accept"};
    fs::path mesh = fs::path(CANONMAP_DATA_DIR) / "icosphere.obj";

    cp::Common common(const std::string& name) const {
        cp::Common c;
        c.out_dir = tmp / name;
        c.seed = kSeed;
        return c;
    }

    // precompute, render and synth into `base`
    void upstream(const cp::Common& c) const {
        cp::PrecomputeConfig pc;
        pc.mesh = mesh;
        pc.cache_dir = c.out_dir / "cache";
        cp::cmd_precompute(c, pc);
        cp::RenderConfig rc;
        rc.mesh = mesh;
        rc.views = 72;
        rc.style = RenderStyle::Normals;
        cp::cmd_render(c, rc);
        cp::SynthConfig sc;
        sc.mesh = mesh;
        sc.instances = 20;
        sc.noise = 0.05;
        cp::cmd_synth(c, sc);
    }

    // pseudo-gt, train and eval in `variant`, reading upstream stages from `base`
    cp::EvalResult downstream(const cp::Common& base, const cp::Common& variant, Pooling pooling, bool pseudo_terms,
                              bool zero_shot) const {
        const fs::path b = base.out_dir;
        cp::PseudoGtConfig pg;
        pg.mesh = mesh;
        pg.views = 72;
        pg.pooling = pooling;
        pg.samples = 100;
        pg.render_dir = b / "render";
        pg.features_dir = b / "features";
        cp::cmd_pseudo_gt(variant, pg);
        cp::TrainStageConfig tc;
        tc.mesh = mesh;
        tc.precompute_dir = b / "precompute";
        tc.render_dir = b / "render";
        tc.features_dir = b / "features";
        tc.epochs = 40;
        tc.lr = 1e-3;
        tc.decay_epoch = 20;
        if (!pseudo_terms) tc.weights.alpha = tc.weights.gamma = 0.0;
        cp::cmd_train(variant, tc);
        cp::EvalConfig ec;
        ec.mesh = mesh;
        ec.precompute_dir = b / "precompute";
        ec.features_dir = b / "features";
        ec.render_dir = b / "render";
        ec.zero_shot = zero_shot;
        return cp::cmd_eval(variant, ec);
    }
};

void closed_loop_and_ablations() {
    Stages s;
    const cp::Common full = s.common("full");
    double full_error = 0.0;
    bool have_full = false;
    guarded("closed loop", [&] {
        const auto t0 = std::chrono::steady_clock::now();
        s.upstream(full);
        const cp::EvalResult r = s.downstream(full, full, Pooling::Max, true, true);
        const double secs = seconds_since(t0);
        full_error = r.model.mean;
        have_full = true;
        const double zs = r.zero_shot ? r.zero_shot->mean : 0.0;
        const bool ok = r.model.mean < kClosedLoopError && r.zero_shot && zs > r.model.mean && secs < kClosedLoopSeconds;
        report(ok, "closed loop",
               fmt("trained %.3f of 228 (need < %.0f), zero-shot %.3f (must be worse), %zu annotations, pck %.3f, "
                   "time=%.1fs (limit %.0fs)",
                   r.model.mean, kClosedLoopError, zs, r.model.count, r.pck.value_or(-1.0), secs, kClosedLoopSeconds));
    });
    if (!have_full) {
        report(false, "ablation mean pooling", "closed loop did not run");
        report(false, "ablation no pseudo-gt", "closed loop did not run");
        report(false, "determinism", "closed loop did not run");
        return;
    }

    guarded("ablation mean pooling", [&] {
        const cp::EvalResult r = s.downstream(full, s.common("mean"), Pooling::Mean, true, false);
        report(r.model.mean >= full_error, "ablation mean pooling",
               fmt("mean-pooled %.3f vs max-pooled %.3f (need mean >= max)", r.model.mean, full_error));
    });
    guarded("ablation no pseudo-gt", [&] {
        const cp::EvalResult r = s.downstream(full, s.common("nopseudo"), Pooling::Max, false, false);
        report(r.model.mean >= kNoPseudoFactor * full_error, "ablation no pseudo-gt",
               fmt("without pseudo-gt %.3f vs full %.3f, ratio %.2f (need >= %.1f)", r.model.mean, full_error,
                   r.model.mean / full_error, kNoPseudoFactor));
    });

    guarded("determinism", [&] {
        const cp::Common again = s.common("again");
        s.upstream(again);
        s.downstream(again, again, Pooling::Max, true, true);
        std::size_t files = 0, differ = 0;
        for (const char* stage : {"precompute", "render", "features", "pseudo_gt", "train", "eval"}) {
            const auto a = cp::read_manifest(full.out_dir / stage / "manifest.json");
            const auto b = cp::read_manifest(again.out_dir / stage / "manifest.json");
            if (a.at("outputs").size() != b.at("outputs").size()) {
                ++differ;
                continue;
            }
            for (std::size_t i = 0; i < a.at("outputs").size(); ++i) {
                const fs::path pa = a["outputs"][i]["path"].get<std::string>();
                const fs::path pb = b["outputs"][i]["path"].get<std::string>();
                ++files;
                differ += pa.filename() != pb.filename() || sha256_file(pa) != sha256_file(pb);
            }
        }
        bool dag = true;
        std::string why;
        for (const cp::Common* c : {&full, &again}) {
            try {
                cp::verify_manifest(c->out_dir / "eval" / "manifest.json");
            } catch (const Error& e) {
                dag = false;
                why = e.what();
            }
        }
        report(differ == 0 && files > 0 && dag, "determinism",
               fmt("%zu stage outputs compared across two runs, %zu differ; manifest DAG %s%s", files, differ,
                   dag ? "verified" : "failed: ", why.c_str()));
    });
}

}  // namespace

int main() {
    guarded("spectral", spectral);
    guarded("geodesic", geodesic);
    guarded("visibility", visibility);
    guarded("pooling", pooling);
    guarded("gradient", gradient);
    guarded("loss sanity", loss_sanity);
    closed_loop_and_ablations();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
