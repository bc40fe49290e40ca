#include <doctest.h>

#include "canonmap/visualize.hpp"
#include "model_helpers.hpp"

using namespace canonmap;

TEST_SUITE("visualize") {

TEST_CASE("one-hot distribution has a single hot vertex") {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(42);
    p[17] = 1.0;
    const Eigen::VectorXd h = vertex_heat(p);
    CHECK(h[17] == 1.0);
    CHECK((h.array() > 0).count() == 1);
}

TEST_CASE("uniform distribution paints a uniform heatmap") {
    const Mesh m = make_icosphere(2);
    const Eigen::VectorXd h = vertex_heat(Eigen::VectorXd::Constant(m.num_vertices(), 1.0 / m.num_vertices()));
    CHECK((h.array() == 1.0).all());
    const RenderedView v = render(m, sample_viewpoints(m, 1, 2.5, {{48, 48}})[0], RenderStyle::Normals);
    const auto rgb = heatmap_image(m, v, h);
    std::array<float, 3> first{-1, -1, -1};
    for (int r = 0; r < 48; ++r)
        for (int c = 0; c < 48; ++c) {
            const std::size_t i = v.pixel(r, c) * 3;
            if (!v.in_mask(r, c)) {
                CHECK(rgb[i] == 0.0f);
                continue;
            }
            if (first[0] < 0) first = {rgb[i], rgb[i + 1], rgb[i + 2]};
            for (int ch = 0; ch < 3; ++ch) CHECK(rgb[i + ch] == doctest::Approx(first[ch]).epsilon(1e-5));
        }
    CHECK(first[0] == doctest::Approx(1.0f));
}

TEST_CASE("canonical colours span the unit cube") {
    const Mesh m = make_cube();
    for (int k = 0; k < 8; ++k) {
        const Vec3 c = canonical_color(m, k);
        CHECK(c.minCoeff() >= 0.0);
        CHECK(c.maxCoeff() <= 1.0);
    }
}

TEST_CASE("texture transfer and smoothness") {
    const Mesh m = make_icosphere(0);  // 12 vertices
    const CseModel hot = helpers::one_hot_model(12, 30.0);
    FeatureMap img(3, 3, 12, {6, 6});
    for (int c = 0; c < 3; ++c) {
        img.set_foreground(1, c, true);
        img.feature(1, c)[c == 2 ? 5 : 0] = 1.0f;
    }
    const auto matches = match_cells(hot, img);
    CHECK(matches[img.index(1, 0)] == 0);
    CHECK(matches[img.index(1, 2)] == 5);
    CHECK(matches[img.index(0, 0)] == -1);
    const auto rgb = texture_transfer_image(m, img, matches);
    CHECK(rgb.size() == 6 * 6 * 3);
    const double jump = (m.vertices()[0] - m.vertices()[5]).norm() / m.bounding_radius();
    CHECK(transfer_smoothness(m, img, matches) == doctest::Approx(jump / 2.0));
}

}
