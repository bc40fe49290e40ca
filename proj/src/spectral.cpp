#include "canonmap/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <vector>

#include "canonmap/binary_io.hpp"
#include "canonmap/error.hpp"
#include "canonmap/rng.hpp"

namespace canonmap {
namespace {

constexpr double kMinCot = 1e-6;
constexpr double kMaxCot = 1e6;

}  // namespace

LaplaceOperators assemble_laplacian(const Mesh& mesh) {
    const auto& V = mesh.vertices();
    const int n = static_cast<int>(mesh.num_vertices());
    const double scale = std::max(mesh.mean_edge_length(), 1e-300);
    const double area_eps = 1e-12 * scale * scale;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.num_faces() * 12);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);
    int degenerate = 0;

    for (const Face& f : mesh.faces()) {
        const Vec3 cross = (V[f[1]] - V[f[0]]).cross(V[f[2]] - V[f[0]]);
        const double double_area = cross.norm();
        const bool is_degenerate = double_area <= 2.0 * area_eps;
        if (is_degenerate) ++degenerate;
        for (int i = 0; i < 3; ++i) mass[f[i]] += double_area / 6.0;

        for (int c = 0; c < 3; ++c) {
            // Angle at corner c is opposite edge (a, b).
            const int a = f[(c + 1) % 3];
            const int b = f[(c + 2) % 3];
            const Vec3 ea = V[a] - V[f[c]];
            const Vec3 eb = V[b] - V[f[c]];
            double cot;
            if (is_degenerate) {
                cot = ea.dot(eb) / std::max(double_area, area_eps);
                cot = std::clamp(cot, kMinCot, kMaxCot);
            } else {
                cot = ea.dot(eb) / double_area;
            }
            const double w = 0.5 * cot;
            triplets.emplace_back(a, b, -w);
            triplets.emplace_back(b, a, -w);
            triplets.emplace_back(a, a, w);
            triplets.emplace_back(b, b, w);
        }
    }
    if (degenerate > 0) {
        std::cerr << "warning: " << degenerate << " degenerate face(s); cotangent weights clamped to ["
                  << kMinCot << ", " << kMaxCot << "]\n";
    }
    const double min_mass = 1e-12 * scale * scale;
    for (int i = 0; i < n; ++i) mass[i] = std::max(mass[i], min_mass);

    LaplaceOperators ops;
    ops.stiffness.resize(n, n);
    ops.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    ops.stiffness.makeCompressed();
    ops.mass = std::move(mass);
    ops.degenerate_faces = degenerate;
    return ops;
}

SpectralBasis compute_spectral_basis(const Mesh& mesh, int q, const EigensolverOptions& options) {
    const int n = static_cast<int>(mesh.num_vertices());
    if (q < 1 || q > n) {
        fail(ErrorKind::InvalidArgument,
             "requested " + std::to_string(q) + " eigenpairs from a mesh with " + std::to_string(n) + " vertices");
    }
    const LaplaceOperators ops = assemble_laplacian(mesh);
    const SparseMatrix& L = ops.stiffness;
    const Eigen::VectorXd& mass = ops.mass;
    const Eigen::VectorXd sqrt_mass = mass.cwiseSqrt();
    const Eigen::VectorXd inv_mass = mass.cwiseInverse();

    // Shift below zero so L - sigma M is SPD despite the constant kernel.
    const double spectral_scale = (L.diagonal().array() / mass.array()).mean();
    const double shift = 1e-3 * spectral_scale;
    SparseMatrix shifted = L;
    for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift * mass[i];
    Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
    if (solver.info() != Eigen::Success) fail(ErrorKind::LinearSolve, "factorization of shifted Laplacian failed");

    // Guard columns speed up convergence of the wanted block.
    const int block = std::min(n, std::max(2 * q, q + 8));
    Rng rng(options.seed);
    Eigen::MatrixXd X(n, block);
    for (int j = 0; j < block; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = rng.normal();

    // M-orthonormalize via QR of M^{1/2} X (M is diagonal).
    auto m_orthonormalize = [&](Eigen::MatrixXd& Y) {
        Eigen::MatrixXd scaled = sqrt_mass.asDiagonal() * Y;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled);
        Eigen::MatrixXd Qm = qr.householderQ() * Eigen::MatrixXd::Identity(n, Y.cols());
        Y = sqrt_mass.cwiseInverse().asDiagonal() * Qm;
    };

    Eigen::VectorXd theta;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Eigen::MatrixXd Y = solver.solve(mass.asDiagonal() * X);
        if (solver.info() != Eigen::Success) fail(ErrorKind::LinearSolve, "shift-invert solve failed");
        m_orthonormalize(Y);

        const Eigen::MatrixXd reduced = Y.transpose() * (L * Y);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (reduced + reduced.transpose()));
        X = Y * ritz.eigenvectors();
        theta = ritz.eigenvalues();

        const Eigen::MatrixXd R = L * X.leftCols(q) - mass.asDiagonal() * X.leftCols(q) * theta.head(q).asDiagonal();
        const double lambda_ref = std::max(std::abs(theta[q - 1]), shift);  // floor keeps the kernel from stalling
        double worst = 0.0;
        for (int j = 0; j < q; ++j) {
            const double r = std::sqrt((R.col(j).array().square() * inv_mass.array()).sum());
            worst = std::max(worst, r / std::max(std::abs(theta[j]), lambda_ref));
        }
        if (worst < options.tolerance) {
            SpectralBasis basis;
            basis.eigenvalues = theta.head(q);
            basis.basis_U = X.leftCols(q);
            basis.mass_weights = mass;
            // Sign convention: largest-magnitude entry of each column is positive.
            for (int j = 0; j < q; ++j) {
                Eigen::Index arg;
                basis.basis_U.col(j).cwiseAbs().maxCoeff(&arg);
                if (basis.basis_U(arg, j) < 0) basis.basis_U.col(j) *= -1.0;
            }
            return basis;
        }
    }
    fail(ErrorKind::NoConvergence, "eigensolver did not converge after " + std::to_string(options.max_iterations) +
                                       " iterations");
}

void save_spectral_basis(const SpectralBasis& basis, const std::filesystem::path& path) {
    const auto K = static_cast<std::uint32_t>(basis.basis_U.rows());
    const auto Q = static_cast<std::uint32_t>(basis.basis_U.cols());
    io::ByteWriter w;
    w.magic("CSB1");
    w.u32(K);
    w.u32(Q);
    for (std::uint32_t j = 0; j < Q; ++j) w.f32(static_cast<float>(basis.eigenvalues[j]));
    for (std::uint32_t i = 0; i < K; ++i) w.f32(static_cast<float>(basis.mass_weights[i]));
    for (std::uint32_t i = 0; i < K; ++i)
        for (std::uint32_t j = 0; j < Q; ++j) w.f32(static_cast<float>(basis.basis_U(i, j)));
    w.write_file(path);
}

SpectralBasis load_spectral_basis(const std::filesystem::path& path) {
    auto r = io::ByteReader::from_file(path);
    r.expect_magic("CSB1");
    const std::uint32_t K = r.u32();
    const std::uint32_t Q = r.u32();
    r.require((static_cast<std::size_t>(Q) + K + static_cast<std::size_t>(K) * Q) * 4);
    SpectralBasis basis;
    basis.eigenvalues.resize(Q);
    basis.mass_weights.resize(K);
    basis.basis_U.resize(K, Q);
    for (std::uint32_t j = 0; j < Q; ++j) basis.eigenvalues[j] = r.f32();
    for (std::uint32_t i = 0; i < K; ++i) basis.mass_weights[i] = r.f32();
    for (std::uint32_t i = 0; i < K; ++i)
        for (std::uint32_t j = 0; j < Q; ++j) basis.basis_U(i, j) = r.f32();
    return basis;
}

}  // namespace canonmap
