#include "canonmap/cse_model.hpp"

#include <cmath>

#include "canonmap/binary_io.hpp"
#include "canonmap/error.hpp"
#include "canonmap/rng.hpp"

namespace canonmap {

Eigen::VectorXd PixelHead::forward(std::span<const float> feature, Eigen::VectorXd* hidden_out) const {
    const int n = input_dim();
    Eigen::VectorXd h = b1;
    for (int j = 0; j < n; ++j) {
        const double x = feature[j];
        if (x != 0.0) h += W1.col(j) * x;
    }
    if (activation == Activation::Tanh) h = h.array().tanh().matrix();
    Eigen::VectorXd out = W2 * h + b2;
    if (hidden_out) *hidden_out = std::move(h);
    return out;
}

CseModel::CseModel(Eigen::MatrixXd basis, int embed_dim, int feature_dim, int hidden_dim, Activation activation)
    : basis_(std::move(basis)) {
    if (embed_dim < 1 || feature_dim < 1 || hidden_dim < 1)
        fail(ErrorKind::InvalidArgument, "model dimensions must be positive");
    if (basis_.size() == 0) fail(ErrorKind::InvalidArgument, "empty vertex basis");
    coeffs_ = Eigen::MatrixXd::Zero(basis_.cols(), embed_dim);
    head_.activation = activation;
    head_.W1 = Eigen::MatrixXd::Zero(hidden_dim, feature_dim);
    head_.b1 = Eigen::VectorXd::Zero(hidden_dim);
    head_.W2 = Eigen::MatrixXd::Zero(embed_dim, hidden_dim);
    head_.b2 = Eigen::VectorXd::Zero(embed_dim);
}

Eigen::MatrixXd CseModel::model_basis(const SpectralBasis& spectral) {
    return spectral.basis_U * std::sqrt(spectral.mass_weights.sum());
}

void CseModel::initialize(std::uint64_t seed, double std) {
    Rng rng(seed);
    auto fill = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std * rng.normal();
    };
    fill(coeffs_);
    fill(head_.W1);
    fill(head_.W2);
    head_.b1.setZero();
    head_.b2.setZero();
}

Eigen::VectorXd CseModel::pixel_embed(std::span<const float> feature) const {
    if (static_cast<int>(feature.size()) != feature_dim())
        fail(ErrorKind::DimensionMismatch, "feature has " + std::to_string(feature.size()) + " dims, head expects " +
                                               std::to_string(feature_dim()));
    return head_.forward(feature);
}

std::size_t CseModel::num_parameters() const {
    return coeffs_.size() + head_.W1.size() + head_.b1.size() + head_.W2.size() + head_.b2.size();
}

namespace {

template <typename M, typename F>
void visit_rowmajor(M& m, F&& f) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) f(m(i, j));
}

}  // namespace

Eigen::VectorXd CseModel::parameters() const {
    Eigen::VectorXd theta(num_parameters());
    Eigen::Index n = 0;
    auto put = [&](double x) { theta[n++] = x; };
    visit_rowmajor(coeffs_, put);
    visit_rowmajor(head_.W1, put);
    visit_rowmajor(head_.b1, put);
    visit_rowmajor(head_.W2, put);
    visit_rowmajor(head_.b2, put);
    return theta;
}

void CseModel::set_parameters(const Eigen::VectorXd& theta) {
    if (static_cast<std::size_t>(theta.size()) != num_parameters())
        fail(ErrorKind::DimensionMismatch, "parameter vector has the wrong length");
    Eigen::Index n = 0;
    auto get = [&](double& x) { x = theta[n++]; };
    visit_rowmajor(coeffs_, get);
    visit_rowmajor(head_.W1, get);
    visit_rowmajor(head_.b1, get);
    visit_rowmajor(head_.W2, get);
    visit_rowmajor(head_.b2, get);
}

void softmax_inplace(Eigen::Ref<Eigen::VectorXd> logits) {
    const double m = logits.maxCoeff();
    logits = (logits.array() - m).exp().matrix();
    logits /= logits.sum();
}

Eigen::VectorXd match_distribution(const Eigen::MatrixXd& vertex_embeddings, const Eigen::VectorXd& pixel_embedding) {
    if (vertex_embeddings.cols() != pixel_embedding.size())
        fail(ErrorKind::DimensionMismatch, "pixel embedding dimension differs from vertex embeddings");
    Eigen::VectorXd p = vertex_embeddings * pixel_embedding;
    softmax_inplace(p);
    return p;
}

void save_checkpoint(const CseModel& model, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic("CCK1");
    w.u32(static_cast<std::uint32_t>(model.basis_size()));
    w.u32(static_cast<std::uint32_t>(model.embed_dim()));
    w.u32(static_cast<std::uint32_t>(model.feature_dim()));
    w.u32(static_cast<std::uint32_t>(model.hidden_dim()));
    auto put = [&](double x) { w.f32(static_cast<float>(x)); };
    visit_rowmajor(model.coeffs(), put);
    visit_rowmajor(model.head().W1, put);
    visit_rowmajor(model.head().b1, put);
    visit_rowmajor(model.head().W2, put);
    visit_rowmajor(model.head().b2, put);
    w.str(model.mesh_id());
    w.write_file(path);
}

CseModel load_checkpoint(const std::filesystem::path& path, const Eigen::MatrixXd& basis) {
    auto r = io::ByteReader::from_file(path);
    r.expect_magic("CCK1");
    const int q = static_cast<int>(r.u32());
    const int d = static_cast<int>(r.u32());
    const int df = static_cast<int>(r.u32());
    const int hidden = static_cast<int>(r.u32());
    if (q != basis.cols())
        fail(ErrorKind::DimensionMismatch, path.string() + ": checkpoint has Q=" + std::to_string(q) +
                                               " but the basis has " + std::to_string(basis.cols()) + " columns");
    const std::size_t payload = static_cast<std::size_t>(q) * d + static_cast<std::size_t>(hidden) * df + hidden +
                                static_cast<std::size_t>(d) * hidden + d;
    r.require(payload * 4);
    CseModel model(basis, d, df, hidden);
    auto get = [&](double& x) {
        const float v = r.f32();
        if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "non-finite parameter in " + path.string());
        x = v;
    };
    visit_rowmajor(model.coeffs(), get);
    visit_rowmajor(model.head().W1, get);
    visit_rowmajor(model.head().b1, get);
    visit_rowmajor(model.head().W2, get);
    visit_rowmajor(model.head().b2, get);
    model.set_mesh_id(r.str());
    if (r.remaining() != 0) fail(ErrorKind::DimensionMismatch, "trailing bytes in " + path.string());
    return model;
}

}  // namespace canonmap
