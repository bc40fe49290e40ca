#include "canonmap/losses.hpp"

#include <cmath>
#include <optional>

#include "canonmap/error.hpp"
#include "canonmap/parallel.hpp"

namespace canonmap {

ModelGradient::ModelGradient(const CseModel& model)
    : vertex_embeddings(Eigen::MatrixXd::Zero(model.num_vertices(), model.embed_dim())),
      W1(Eigen::MatrixXd::Zero(model.head().W1.rows(), model.head().W1.cols())),
      b1(Eigen::VectorXd::Zero(model.head().b1.size())),
      W2(Eigen::MatrixXd::Zero(model.head().W2.rows(), model.head().W2.cols())),
      b2(Eigen::VectorXd::Zero(model.head().b2.size())) {}

ModelGradient& ModelGradient::operator+=(const ModelGradient& other) {
    vertex_embeddings += other.vertex_embeddings;
    W1 += other.W1;
    b1 += other.b1;
    W2 += other.W2;
    b2 += other.b2;
    return *this;
}

Eigen::MatrixXd ModelGradient::coefficient_gradient(const CseModel& model) const {
    return model.basis().transpose() * vertex_embeddings;
}

Eigen::VectorXd ModelGradient::flatten(const CseModel& model) const {
    const Eigen::MatrixXd dC = coefficient_gradient(model);
    Eigen::VectorXd out(model.num_parameters());
    Eigen::Index n = 0;
    auto put = [&](const auto& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) out[n++] = m(i, j);
    };
    put(dC);
    put(W1);
    put(b1);
    put(W2);
    put(b2);
    return out;
}

namespace {

Eigen::Map<const Eigen::VectorXf> as_vector(std::span<const float> f) {
    return {f.data(), static_cast<Eigen::Index>(f.size())};
}

struct PixelPass {
    Eigen::VectorXd hidden;
    Eigen::VectorXd embedding;
};

PixelPass forward_pixel(const CseModel& model, std::span<const float> feature) {
    if (static_cast<int>(feature.size()) != model.feature_dim())
        fail(ErrorKind::DimensionMismatch, "feature dimension differs from the pixel head input");
    PixelPass pass;
    pass.embedding = model.head().forward(feature, &pass.hidden);
    return pass;
}

void backward_pixel(const CseModel& model, const PixelPass& pass, std::span<const float> feature,
                    const Eigen::VectorXd& d_embedding, ModelGradient& grad) {
    const PixelHead& head = model.head();
    grad.W2.noalias() += d_embedding * pass.hidden.transpose();
    grad.b2 += d_embedding;
    Eigen::VectorXd d_hidden = head.W2.transpose() * d_embedding;
    if (head.activation == Activation::Tanh) d_hidden.array() *= 1.0 - pass.hidden.array().square();
    grad.W1.noalias() += d_hidden * as_vector(feature).cast<double>().transpose();
    grad.b1 += d_hidden;
}

// Adds the effect of dL/dlogits for one pixel to the gradient.
void backward_logits(const CseModel& model, const Eigen::MatrixXd& E, const PixelPass& pass,
                     std::span<const float> feature, const Eigen::VectorXd& d_logits, ModelGradient& grad) {
    grad.vertex_embeddings.noalias() += d_logits * pass.embedding.transpose();
    backward_pixel(model, pass, feature, E.transpose() * d_logits, grad);
}

double log_sum_exp(const Eigen::VectorXd& z) {
    const double m = z.maxCoeff();
    return m + std::log((z.array() - m).exp().sum());
}

void check_vertex(int k, const Eigen::MatrixXd& E) {
    if (k < 0 || k >= E.rows()) fail(ErrorKind::InvalidIndex, "target vertex " + std::to_string(k) + " out of range");
}

// Mean cross-entropy of `batch` scaled by `norm`, gradient scaled by weight.
double cross_entropy(const CseModel& model, const Eigen::MatrixXd& E, std::span<const LabeledFeature> batch,
                     double norm, ModelGradient* grad, double weight) {
    double total = 0.0;
    for (const auto& item : batch) {
        check_vertex(item.vertex, E);
        const PixelPass pass = forward_pixel(model, item.feature);
        Eigen::VectorXd z = E * pass.embedding;
        total += log_sum_exp(z) - z[item.vertex];
        if (grad) {
            softmax_inplace(z);
            z[item.vertex] -= 1.0;
            backward_logits(model, E, pass, item.feature, z * (weight / norm), *grad);
        }
    }
    return total / norm;
}

double pseudo_impl(const CseModel& model, const Eigen::MatrixXd& E, std::span<const LabeledFeature> batch,
                   ModelGradient* grad, double weight) {
    if (batch.empty()) return 0.0;
    return cross_entropy(model, E, batch, static_cast<double>(batch.size()), grad, weight);
}

double dist_impl(const CseModel& model, const Eigen::MatrixXd& E, std::span<const LabeledFeature> batch,
                 const GeodesicTable& geo, ModelGradient* grad, double weight) {
    if (batch.empty()) return 0.0;
    if (geo.size() != static_cast<std::size_t>(E.rows()))
        fail(ErrorKind::DimensionMismatch, "geodesic table size differs from vertex count");
    const double n = static_cast<double>(batch.size());
    const Eigen::Index K = E.rows();
    double total = 0.0;
    Eigen::VectorXd d(K);
    for (const auto& item : batch) {
        check_vertex(item.vertex, E);
        const PixelPass pass = forward_pixel(model, item.feature);
        Eigen::VectorXd p = E * pass.embedding;
        softmax_inplace(p);
        const float* row = geo.row(item.vertex);
        for (Eigen::Index k = 0; k < K; ++k) d[k] = row[k];
        const double expected = p.dot(d);
        total += expected;
        if (grad) {
            const Eigen::VectorXd dz = p.cwiseProduct((d.array() - expected).matrix()) * (weight / n);
            backward_logits(model, E, pass, item.feature, dz, *grad);
        }
    }
    return total / n;
}

double cyc_impl(const CseModel& model, const Eigen::MatrixXd& E, std::span<const PositionedFeature> cells,
                ModelGradient* grad, double weight, bool normalize) {
    const Eigen::Index n = static_cast<Eigen::Index>(cells.size());
    if (n < 2) return 0.0;
    const Eigen::Index K = E.rows();
    std::vector<PixelPass> passes;
    passes.reserve(n);
    Eigen::MatrixXd emb(n, E.cols());
    for (Eigen::Index u = 0; u < n; ++u) {
        passes.push_back(forward_pixel(model, cells[u].feature));
        emb.row(u) = passes.back().embedding.transpose();
    }
    const Eigen::MatrixXd Z = emb * E.transpose();  // n x K

    Eigen::MatrixXd R = Z;  // p(x_k | u), rows
    for (Eigen::Index u = 0; u < n; ++u) {
        const double m = R.row(u).maxCoeff();
        R.row(u) = (R.row(u).array() - m).exp().matrix();
        R.row(u) /= R.row(u).sum();
    }
    Eigen::MatrixXd C = Z;  // p(v | x_k), columns
    for (Eigen::Index k = 0; k < K; ++k) {
        const double m = C.col(k).maxCoeff();
        C.col(k) = (C.col(k).array() - m).exp().matrix();
        C.col(k) /= C.col(k).sum();
    }
    Eigen::MatrixXd dist(n, n);
    for (Eigen::Index u = 0; u < n; ++u)
        for (Eigen::Index v = 0; v < n; ++v)
            dist(u, v) = std::hypot(cells[u].row - cells[v].row, cells[u].col - cells[v].col);

    const Eigen::MatrixXd G = dist * C;  // G(u,k) = sum_v |u-v| p(v|x_k)
    const double raw = R.cwiseProduct(G).sum();
    const double norm = normalize ? static_cast<double>(n) : 1.0;
    if (grad) {
        const double s = weight / norm;
        Eigen::MatrixXd dZ(n, K);
        for (Eigen::Index u = 0; u < n; ++u) {
            const double mean = R.row(u).dot(G.row(u));
            dZ.row(u) = R.row(u).cwiseProduct((G.row(u).array() - mean).matrix()) * s;
        }
        const Eigen::MatrixXd H = dist.transpose() * R;  // H(v,k) = sum_u |u-v| p(x_k|u)
        for (Eigen::Index k = 0; k < K; ++k) {
            const double mean = C.col(k).dot(H.col(k));
            dZ.col(k) += C.col(k).cwiseProduct((H.col(k).array() - mean).matrix()) * s;
        }
        grad->vertex_embeddings.noalias() += dZ.transpose() * emb;
        const Eigen::MatrixXd d_emb = dZ * E;
        for (Eigen::Index u = 0; u < n; ++u)
            backward_pixel(model, passes[u], cells[u].feature, d_emb.row(u).transpose(), *grad);
    }
    return raw / norm;
}

double eq_impl(const CseModel& model, const Eigen::MatrixXd& E, std::span<const FlipPairFeature> pairs,
               const std::vector<int>& flip_index, ModelGradient* grad, double weight) {
    if (pairs.empty()) return 0.0;
    const Eigen::Index K = E.rows();
    if (static_cast<Eigen::Index>(flip_index.size()) != K)
        fail(ErrorKind::DimensionMismatch, "flip index length differs from vertex count");
    const double n = static_cast<double>(pairs.size());
    double total = 0.0;
    Eigen::VectorXd gp(K), gq(K);
    for (const auto& pair : pairs) {
        const PixelPass a = forward_pixel(model, pair.feature);
        const PixelPass b = forward_pixel(model, pair.flipped_feature);
        Eigen::VectorXd p = E * a.embedding;
        Eigen::VectorXd q = E * b.embedding;
        softmax_inplace(p);
        softmax_inplace(q);
        gq.setZero();
        for (Eigen::Index k = 0; k < K; ++k) {
            const double diff = p[k] - q[flip_index[k]];
            total += std::abs(diff);
            const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            gp[k] = s;
            gq[flip_index[k]] -= s;
        }
        if (grad) {
            const double w = weight / n;
            const Eigen::VectorXd dzp = p.cwiseProduct((gp.array() - p.dot(gp)).matrix()) * w;
            const Eigen::VectorXd dzq = q.cwiseProduct((gq.array() - q.dot(gq)).matrix()) * w;
            backward_logits(model, E, a, pair.feature, dzp, *grad);
            backward_logits(model, E, b, pair.flipped_feature, dzq, *grad);
        }
    }
    return total / n;
}

double syn_impl(const CseModel& model, const Eigen::MatrixXd& E, std::span<const LabeledFeature> pairs,
                ModelGradient* grad, double weight) {
    if (pairs.empty()) return 0.0;
    return cross_entropy(model, E, pairs, static_cast<double>(E.rows()), grad, weight);
}

}  // namespace

double loss_pseudo(const CseModel& model, std::span<const LabeledFeature> batch, ModelGradient* grad, double weight) {
    return pseudo_impl(model, model.vertex_embeddings(), batch, grad, weight);
}

double loss_dist(const CseModel& model, std::span<const LabeledFeature> batch, const GeodesicTable& geo,
                 ModelGradient* grad, double weight) {
    return dist_impl(model, model.vertex_embeddings(), batch, geo, grad, weight);
}

double loss_cyc(const CseModel& model, std::span<const PositionedFeature> cells, ModelGradient* grad, double weight,
                bool normalize) {
    return cyc_impl(model, model.vertex_embeddings(), cells, grad, weight, normalize);
}

double loss_eq(const CseModel& model, std::span<const FlipPairFeature> pairs, const std::vector<int>& flip_index,
               ModelGradient* grad, double weight) {
    return eq_impl(model, model.vertex_embeddings(), pairs, flip_index, grad, weight);
}

double loss_syn(const CseModel& model, std::span<const LabeledFeature> pairs, ModelGradient* grad, double weight) {
    return syn_impl(model, model.vertex_embeddings(), pairs, grad, weight);
}

LossReport total_loss(const CseModel& model, const LossBatch& batch, const GeodesicTable& geo,
                      const std::vector<int>& flip_index, const LossWeights& weights, ModelGradient* grad,
                      int workers) {
    if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0 || weights.delta < 0 || weights.zeta < 0)
        fail(ErrorKind::InvalidArgument, "loss weights must be non-negative");
    const Eigen::MatrixXd E = model.vertex_embeddings();
    LossReport report;
    report.weights = weights;

    // Work items: one per image, then fixed-size chunks of synthetic pairs.
    // Partial results are reduced in index order, independent of `workers`.
    constexpr std::size_t kSynChunk = 256;
    const std::size_t n_images = batch.images.size();
    const std::size_t n_chunks = (batch.synthetic.size() + kSynChunk - 1) / kSynChunk;
    const std::size_t n_items = n_images + n_chunks;
    struct Partial {
        double pseudo = 0, dist = 0, cyc = 0, eq = 0, syn = 0;
        std::optional<ModelGradient> grad;
    };
    std::vector<Partial> parts(n_items);
    const double inv_images = n_images > 0 ? 1.0 / static_cast<double>(n_images) : 0.0;
    const double syn_weight = weights.zeta * batch.synthetic_scale;

    parallel_for(n_items, workers, [&](std::size_t i) {
        Partial& part = parts[i];
        if (grad) part.grad.emplace(model);
        ModelGradient* g = part.grad ? &*part.grad : nullptr;
        auto use = [&](double w) { return w > 0.0 ? g : nullptr; };
        if (i < n_images) {
            const ImageTerms& img = batch.images[i];
            part.pseudo = pseudo_impl(model, E, img.pseudo, use(weights.alpha), weights.alpha * inv_images);
            part.dist = dist_impl(model, E, img.pseudo, geo, use(weights.gamma), weights.gamma * inv_images);
            part.cyc = cyc_impl(model, E, img.cycle, use(weights.beta), weights.beta * inv_images, true);
            part.eq = eq_impl(model, E, img.flips, flip_index, use(weights.delta), weights.delta * inv_images);
        } else {
            const std::size_t c = i - n_images;
            const std::size_t begin = c * kSynChunk;
            const std::size_t len = std::min(kSynChunk, batch.synthetic.size() - begin);
            part.syn = syn_impl(model, E, std::span(batch.synthetic).subspan(begin, len), use(syn_weight), syn_weight);
        }
    });

    for (Partial& part : parts) {
        report.pseudo += part.pseudo * inv_images;
        report.dist += part.dist * inv_images;
        report.cyc += part.cyc * inv_images;
        report.eq += part.eq * inv_images;
        report.syn += part.syn;
        if (grad) *grad += *part.grad;
    }
    report.syn *= batch.synthetic_scale;
    report.total = weights.alpha * report.pseudo + weights.beta * report.cyc + weights.gamma * report.dist +
                   weights.delta * report.eq + weights.zeta * report.syn;
    return report;
}

}  // namespace canonmap
