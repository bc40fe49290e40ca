#include "canonmap/geodesics.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

#include "canonmap/binary_io.hpp"
#include "canonmap/error.hpp"
#include "canonmap/parallel.hpp"
#include "canonmap/spectral.hpp"

namespace canonmap {

struct HeatGeodesicSolver::Impl {
    const Mesh* mesh = nullptr;
    double t = 0.0;
    Eigen::VectorXd mass;
    Eigen::SimplicialLDLT<SparseMatrix> heat;     // M + t L
    Eigen::SimplicialLDLT<SparseMatrix> poisson;  // L + eps M
    // Per-face data: cotangent of the angle at each corner and the face normal.
    std::vector<std::array<double, 3>> cot;
    std::vector<Vec3> unit_normal;
    std::vector<double> double_area;
};

HeatGeodesicSolver::HeatGeodesicSolver(const Mesh& mesh, double time_step) : impl_(std::make_unique<Impl>()) {
    impl_->mesh = &mesh;
    const double h = mesh.mean_edge_length();
    impl_->t = time_step > 0.0 ? time_step : h * h;

    const LaplaceOperators ops = assemble_laplacian(mesh);
    impl_->mass = ops.mass;
    const int n = static_cast<int>(mesh.num_vertices());

    SparseMatrix heat_op = impl_->t * ops.stiffness;
    for (int i = 0; i < n; ++i) heat_op.coeffRef(i, i) += ops.mass[i];
    impl_->heat.compute(heat_op);
    if (impl_->heat.info() != Eigen::Success) fail(ErrorKind::LinearSolve, "heat operator factorization failed");

    // Tiny mass shift removes the constant kernel; right-hand sides are
    // projected to have no kernel component before solving.
    SparseMatrix poisson_op = ops.stiffness;
    const double eps = 1e-10 * (ops.stiffness.diagonal().array() / ops.mass.array()).mean();
    for (int i = 0; i < n; ++i) poisson_op.coeffRef(i, i) += eps * ops.mass[i];
    impl_->poisson.compute(poisson_op);
    if (impl_->poisson.info() != Eigen::Success) fail(ErrorKind::LinearSolve, "Poisson operator factorization failed");

    const auto& V = mesh.vertices();
    impl_->cot.resize(mesh.num_faces());
    impl_->unit_normal.resize(mesh.num_faces());
    impl_->double_area.resize(mesh.num_faces());
    for (std::size_t fi = 0; fi < mesh.num_faces(); ++fi) {
        const Face& f = mesh.faces()[fi];
        const Vec3 cross = (V[f[1]] - V[f[0]]).cross(V[f[2]] - V[f[0]]);
        const double a2 = std::max(cross.norm(), 1e-300);
        impl_->double_area[fi] = a2;
        impl_->unit_normal[fi] = cross / a2;
        for (int c = 0; c < 3; ++c) {
            const Vec3 ea = V[f[(c + 1) % 3]] - V[f[c]];
            const Vec3 eb = V[f[(c + 2) % 3]] - V[f[c]];
            impl_->cot[fi][c] = ea.dot(eb) / a2;
        }
    }
}

HeatGeodesicSolver::~HeatGeodesicSolver() = default;
HeatGeodesicSolver::HeatGeodesicSolver(HeatGeodesicSolver&&) noexcept = default;

double HeatGeodesicSolver::time_step() const { return impl_->t; }

Eigen::VectorXd HeatGeodesicSolver::distances_from(int source) const {
    const Mesh& mesh = *impl_->mesh;
    const auto& V = mesh.vertices();
    const int n = static_cast<int>(mesh.num_vertices());

    Eigen::VectorXd delta = Eigen::VectorXd::Zero(n);
    delta[source] = 1.0;
    const Eigen::VectorXd u = impl_->heat.solve(delta);
    if (impl_->heat.info() != Eigen::Success) fail(ErrorKind::LinearSolve, "heat solve failed");

    // Integrated divergence of the normalized negative heat gradient.
    Eigen::VectorXd div = Eigen::VectorXd::Zero(n);
    for (std::size_t fi = 0; fi < mesh.num_faces(); ++fi) {
        const Face& f = mesh.faces()[fi];
        const Vec3& N = impl_->unit_normal[fi];
        Vec3 grad = Vec3::Zero();
        for (int c = 0; c < 3; ++c) {
            const Vec3 opposite = V[f[(c + 2) % 3]] - V[f[(c + 1) % 3]];
            grad += u[f[c]] * N.cross(opposite);
        }
        grad /= impl_->double_area[fi];
        const double len = grad.norm();
        if (len <= 0.0) continue;
        const Vec3 X = -grad / len;
        for (int c = 0; c < 3; ++c) {
            const int i = f[c];
            const int j = f[(c + 1) % 3];
            const int k = f[(c + 2) % 3];
            // cot at corner k weights edge (i, j); cot at corner j weights edge (i, k).
            const double cot_k = impl_->cot[fi][(c + 2) % 3];
            const double cot_j = impl_->cot[fi][(c + 1) % 3];
            div[i] += 0.5 * (cot_k * (V[j] - V[i]).dot(X) + cot_j * (V[k] - V[i]).dot(X));
        }
    }
    // Stiffness L is the negated cotan Laplacian, so L phi = -div.
    Eigen::VectorXd rhs = -div;
    rhs -= (rhs.sum() / impl_->mass.sum()) * impl_->mass;
    Eigen::VectorXd phi = impl_->poisson.solve(rhs);
    if (impl_->poisson.info() != Eigen::Success) fail(ErrorKind::LinearSolve, "Poisson solve failed");
    phi.array() -= phi[source];
    return phi.cwiseMax(0.0);
}

std::vector<double> heat_distances_all_pairs(const Mesh& mesh, int workers) {
    const std::size_t n = mesh.num_vertices();
    const HeatGeodesicSolver solver(mesh);
    std::vector<double> raw(n * n, 0.0);
    parallel_for(n, workers, [&](std::size_t s) {
        const Eigen::VectorXd d = solver.distances_from(static_cast<int>(s));
        std::copy(d.data(), d.data() + n, raw.begin() + static_cast<std::ptrdiff_t>(s * n));
    });
    // The heat method is not exactly symmetric; average the two directions.
    for (std::size_t a = 0; a < n; ++a) {
        raw[a * n + a] = 0.0;
        for (std::size_t b = a + 1; b < n; ++b) {
            const double m = 0.5 * (raw[a * n + b] + raw[b * n + a]);
            raw[a * n + b] = m;
            raw[b * n + a] = m;
        }
    }
    return raw;
}

GeodesicTable normalize_geodesics(std::size_t k, const std::vector<double>& raw) {
    const double max_d = *std::max_element(raw.begin(), raw.end());
    if (!(max_d > 0.0) || !std::isfinite(max_d)) fail(ErrorKind::LinearSolve, "geodesic table has no positive finite maximum");
    std::vector<float> dist(raw.size());
    // d / max is exactly 1 at the maximum, so the scaled maximum is exactly 228.
    for (std::size_t i = 0; i < raw.size(); ++i) dist[i] = static_cast<float>((raw[i] / max_d) * kGeodesicScale);
    return GeodesicTable(k, std::move(dist));
}

GeodesicTable compute_geodesics(const Mesh& mesh, int workers) {
    return normalize_geodesics(mesh.num_vertices(), heat_distances_all_pairs(mesh, workers));
}

void save_geodesics(const GeodesicTable& table, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("CGT1");
    w.u32(static_cast<std::uint32_t>(table.size()));
    w.u32(static_cast<std::uint32_t>(table.size()));
    w.f32s(table.data());
    w.write_file(path);
}

GeodesicTable load_geodesics(const std::filesystem::path& path) {
    auto r = io::ByteReader::from_file(path);
    r.expect_magic("CGT1");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != cols) fail(ErrorKind::DimensionMismatch, "geodesic table is not square in " + path.string());
    std::vector<float> dist(static_cast<std::size_t>(rows) * cols);
    r.f32s(dist);
    return GeodesicTable(rows, std::move(dist));
}

}  // namespace canonmap
