#include <doctest.h>

#include <fstream>

#include "canonmap/error.hpp"
#include "canonmap/spectral.hpp"
#include "oracles.hpp"

using namespace canonmap;

namespace {

// Largest principal-angle residual between two column spaces.
double subspace_gap(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::VectorXd& mass) {
    // A, B have M-orthonormal columns; project B onto span(A) in the M inner product.
    const Eigen::MatrixXd P = A * (A.transpose() * mass.asDiagonal() * B);
    return (B - P).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("stiffness and mass match a dense assembly") {
    const Mesh m = make_icosphere(1);
    const LaplaceOperators ops = assemble_laplacian(m);
    const auto ref = oracle::dense_laplacian(m);
    CHECK((Eigen::MatrixXd(ops.stiffness) - ref.L).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ops.mass - ref.M).cwiseAbs().maxCoeff() < 1e-14);
    // rows of L sum to zero
    CHECK((Eigen::MatrixXd(ops.stiffness).rowwise().sum()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("q = 1 gives the constant kernel") {
    const Mesh m = make_icosphere(2);
    const SpectralBasis b = compute_spectral_basis(m, 1);
    CHECK(std::abs(b.eigenvalues[0]) < 1e-8);
    const Eigen::VectorXd u = b.basis_U.col(0);
    CHECK(u.maxCoeff() - u.minCoeff() < 1e-6 * std::abs(u.mean()));
    CHECK(u.dot(b.mass_weights.cwiseProduct(u)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("icosphere first nonzero eigenvalue has multiplicity three") {
    const SpectralBasis b = compute_spectral_basis(make_icosphere(3), 4);
    const double lo = b.eigenvalues.segment(1, 3).minCoeff(), hi = b.eigenvalues.segment(1, 3).maxCoeff();
    CHECK(hi / lo - 1.0 < 0.05);
    // continuum value l(l+1) = 2 on the unit sphere
    CHECK(lo == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("tetrahedron eigenpairs match the dense solver") {
    const Mesh m = make_tetrahedron();
    const SpectralBasis b = compute_spectral_basis(m, 4);
    const auto [vals, vecs] = oracle::dense_eigenpairs(m, 4);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(b.eigenvalues[i] - vals[i]) < 1e-6 * std::max(1.0, vals[3]));
    CHECK(subspace_gap(b.basis_U, vecs, b.mass_weights) < 1e-6);
}

TEST_CASE("sorted ascending and mass-orthonormal") {
    const Mesh m = make_icosphere(2);
    const SpectralBasis b = compute_spectral_basis(m, 16);
    for (int i = 1; i < b.size(); ++i) CHECK(b.eigenvalues[i] >= b.eigenvalues[i - 1]);
    CHECK(std::abs(b.eigenvalues[0]) <= 1e-6 * b.eigenvalues[b.size() - 1]);
    const Eigen::MatrixXd G = b.basis_U.transpose() * b.mass_weights.asDiagonal() * b.basis_U;
    CHECK((G - Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("q larger than K is rejected") {
    try {
        compute_spectral_basis(make_tetrahedron(), 5);
        FAIL("expected InvalidArgument");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
}

TEST_CASE("CSB1 round trip and bad magic") {
    oracle::TempDir tmp("csb");
    const SpectralBasis b = compute_spectral_basis(make_icosphere(1), 6);
    save_spectral_basis(b, tmp / "b.csb");
    const SpectralBasis c = load_spectral_basis(tmp / "b.csb");
    CHECK(c.basis_U.rows() == b.basis_U.rows());
    CHECK((c.basis_U - b.basis_U).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((c.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() < 1e-5);
    {
        std::ofstream(tmp / "bad.csb", std::ios::binary) << "XXXX0000";
    }
    try {
        load_spectral_basis(tmp / "bad.csb");
        FAIL("expected BadMagic");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadMagic);
    }
}

}
