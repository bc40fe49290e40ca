#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "canonmap/spectral.hpp"

namespace canonmap {

enum class Activation { Tanh, Identity };

// Two-layer per-cell map D_f -> hidden -> D.
struct PixelHead {
    Activation activation = Activation::Tanh;
    Eigen::MatrixXd W1;  // hidden x D_f
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;  // D x hidden
    Eigen::VectorXd b2;

    int input_dim() const { return static_cast<int>(W1.cols()); }
    int hidden_dim() const { return static_cast<int>(W1.rows()); }
    int output_dim() const { return static_cast<int>(W2.rows()); }

    // Hidden pre-activation is not kept; `hidden_out` receives the activated layer.
    Eigen::VectorXd forward(std::span<const float> feature, Eigen::VectorXd* hidden_out = nullptr) const;
};

// Vertex embeddings E = U C over a fixed vertex basis U (K x Q) and a pixel
// head producing e(u) from cell features; p(k | u) = softmax_k <e(u), E_k>.
class CseModel {
public:
    CseModel() = default;
    CseModel(Eigen::MatrixXd basis, int embed_dim, int feature_dim, int hidden_dim = 64,
             Activation activation = Activation::Tanh);

    // Basis used by the model: the mass-orthonormal eigenvectors rescaled by
    // sqrt(total mass), which gives each column unit root-mean-square.
    static Eigen::MatrixXd model_basis(const SpectralBasis& spectral);

    int num_vertices() const { return static_cast<int>(basis_.rows()); }
    int basis_size() const { return static_cast<int>(basis_.cols()); }
    int embed_dim() const { return static_cast<int>(coeffs_.cols()); }
    int feature_dim() const { return head_.input_dim(); }
    int hidden_dim() const { return head_.hidden_dim(); }

    const Eigen::MatrixXd& basis() const { return basis_; }
    const Eigen::MatrixXd& coeffs() const { return coeffs_; }
    Eigen::MatrixXd& coeffs() { return coeffs_; }
    const PixelHead& head() const { return head_; }
    PixelHead& head() { return head_; }

    const std::string& mesh_id() const { return mesh_id_; }
    void set_mesh_id(std::string id) { mesh_id_ = std::move(id); }

    // Coefficients and head weights from N(0, std^2), biases zero.
    void initialize(std::uint64_t seed, double std = 0.02);

    Eigen::MatrixXd vertex_embeddings() const { return basis_ * coeffs_; }
    // Throws DimensionMismatch when the feature length differs from D_f.
    Eigen::VectorXd pixel_embed(std::span<const float> feature) const;

    // Flattened parameters in the order C, W1, b1, W2, b2 (all row-major).
    std::size_t num_parameters() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& theta);

private:
    Eigen::MatrixXd basis_;
    Eigen::MatrixXd coeffs_;  // Q x D
    PixelHead head_;
    std::string mesh_id_;
};

// Softmax of E * e with max subtraction.
Eigen::VectorXd match_distribution(const Eigen::MatrixXd& vertex_embeddings, const Eigen::VectorXd& pixel_embedding);
inline Eigen::VectorXd match_distribution(const CseModel& model, const Eigen::VectorXd& pixel_embedding) {
    return match_distribution(model.vertex_embeddings(), pixel_embedding);
}

// In-place numerically stable softmax.
void softmax_inplace(Eigen::Ref<Eigen::VectorXd> logits);

// CCK1: magic, u32 Q, D, D_f, hidden, f32 C[Q*D], W1[hidden*D_f], b1[hidden],
// W2[D*hidden], b2[D], then the mesh id string. The basis is not stored;
// loading requires the template's basis.
void save_checkpoint(const CseModel& model, const std::filesystem::path& path);
CseModel load_checkpoint(const std::filesystem::path& path, const Eigen::MatrixXd& basis);

}  // namespace canonmap
