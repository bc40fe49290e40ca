#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <filesystem>

#include "canonmap/mesh.hpp"

namespace canonmap {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Positive semi-definite cotangent Laplacian L (off-diagonals -w_ij, rows sum
// to zero) and the lumped barycentric mass diagonal.
struct LaplaceOperators {
    SparseMatrix stiffness;
    Eigen::VectorXd mass;
    int degenerate_faces = 0;
};

LaplaceOperators assemble_laplacian(const Mesh& mesh);

// Q lowest generalized eigenpairs  L u = lambda M u.
struct SpectralBasis {
    Eigen::VectorXd eigenvalues;   // ascending, size Q
    Eigen::MatrixXd basis_U;       // K x Q, columns M-orthonormal
    Eigen::VectorXd mass_weights;  // K lumped vertex masses

    int size() const { return static_cast<int>(eigenvalues.size()); }
};

struct EigensolverOptions {
    double tolerance = 1e-8;
    int max_iterations = 10000;
    std::uint64_t seed = 0x5eed;
};

// Shift-invert block subspace iteration with Rayleigh-Ritz extraction.
// Throws InvalidArgument when q > K and NoConvergence after max_iterations.
SpectralBasis compute_spectral_basis(const Mesh& mesh, int q, const EigensolverOptions& options = {});

// CSB1: magic, u32 K, u32 Q, f32 eigenvalues[Q], f32 mass[K], f32 U[K*Q] row-major.
void save_spectral_basis(const SpectralBasis& basis, const std::filesystem::path& path);
SpectralBasis load_spectral_basis(const std::filesystem::path& path);

}  // namespace canonmap
