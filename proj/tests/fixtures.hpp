#pragma once

// Small shared builders for tests that need a rendered icosphere bank.

#include "canonmap/pseudo_gt.hpp"
#include "canonmap/rng.hpp"
#include "canonmap/synth.hpp"

namespace fixture {

using namespace canonmap;

inline ViewBank oracle_bank(const Mesh& mesh, const SyntheticFeatureGenerator& gen, int views, int grid,
                            ImageSize size, const SynthOptions& options = {}) {
    const auto cams = sample_viewpoints(mesh, views, 2.5, {size});
    ViewBankOptions o;
    o.views = views;
    o.size = size;
    return build_view_bank(mesh, "test", o, [&](int i, const RenderedView& view) {
        return gen.generate(aggregate_cells(mesh, view, cams[i], grid, grid), view.size, options);
    });
}

struct PosedInstance {
    Camera camera;
    RenderedView view;
    CellSurface cells;
    FeatureMap features;
};

inline PosedInstance posed(const Mesh& mesh, const SyntheticFeatureGenerator& gen, std::uint64_t seed, int grid,
                           ImageSize size, const SynthOptions& options = {}) {
    Rng rng(seed);
    const Camera cam = random_posed_camera(mesh, rng, 2.5, size);
    RenderedView view = render(mesh, cam, RenderStyle::Normals);
    CellSurface cells = aggregate_cells(mesh, view, cam, grid, grid);
    FeatureMap f = gen.generate(cells, size, options);
    return {cam, std::move(view), std::move(cells), std::move(f)};
}

}  // namespace fixture
