#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "canonmap/cse_model.hpp"
#include "canonmap/geodesics.hpp"

namespace canonmap {

// A cell feature with its target vertex (pseudo-GT entry or visible vertex of
// a render).
struct LabeledFeature {
    std::span<const float> feature;
    int vertex = 0;
};

// A cell feature with its position in normalized image units.
struct PositionedFeature {
    std::span<const float> feature;
    double row = 0.0;
    double col = 0.0;
};

// Feature of cell u in an image and of its mirror cell in the flipped image.
struct FlipPairFeature {
    std::span<const float> feature;
    std::span<const float> flipped_feature;
};

// Gradient accumulator. Vertex-embedding gradients are kept as dL/dE and
// mapped to dL/dC = U^T dL/dE by coefficient_gradient().
struct ModelGradient {
    Eigen::MatrixXd vertex_embeddings;  // K x D
    Eigen::MatrixXd W1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;
    Eigen::VectorXd b2;

    explicit ModelGradient(const CseModel& model);
    ModelGradient& operator+=(const ModelGradient& other);
    Eigen::MatrixXd coefficient_gradient(const CseModel& model) const;
    // Same layout as CseModel::parameters().
    Eigen::VectorXd flatten(const CseModel& model) const;
};

// Each loss returns its value; when `grad` is given, weight * dL/dtheta is
// added to it.
double loss_pseudo(const CseModel& model, std::span<const LabeledFeature> batch, ModelGradient* grad = nullptr,
                   double weight = 1.0);

// Expected geodesic distance to the target under p(. | u).
double loss_dist(const CseModel& model, std::span<const LabeledFeature> batch, const GeodesicTable& geo,
                 ModelGradient* grad = nullptr, double weight = 1.0);

// Image -> template -> image cycle: p(v|u) = sum_k p(v|x_k) p(x_k|u) where
// p(v|x_k) is the softmax of the same logits over the given cells. The loss
// is sum_u sum_v |u - v| p(v|u), divided by the number of cells when
// `normalize` is set.
double loss_cyc(const CseModel& model, std::span<const PositionedFeature> cells, ModelGradient* grad = nullptr,
                double weight = 1.0, bool normalize = true);

// (1/n) sum_u sum_k |p(k | u, I) - p(flip[k] | u_F, I_F)|.
double loss_eq(const CseModel& model, std::span<const FlipPairFeature> pairs, const std::vector<int>& flip_index,
               ModelGradient* grad = nullptr, double weight = 1.0);

// -(1/K) sum over (view, visible vertex) pairs of log p(k | v(k)).
double loss_syn(const CseModel& model, std::span<const LabeledFeature> pairs, ModelGradient* grad = nullptr,
                double weight = 1.0);

struct LossWeights {
    double alpha = 0.1;    // pseudo
    double beta = 0.002;   // cyc
    double gamma = 0.002;  // dist
    double delta = 0.001;  // eq
    double zeta = 0.1;     // syn
};

struct LossReport {
    double pseudo = 0.0, dist = 0.0, cyc = 0.0, eq = 0.0, syn = 0.0, total = 0.0;
    LossWeights weights;
};

struct ImageTerms {
    std::vector<LabeledFeature> pseudo;     // also drives the dist term
    std::vector<PositionedFeature> cycle;
    std::vector<FlipPairFeature> flips;
};

struct LossBatch {
    std::vector<ImageTerms> images;
    std::vector<LabeledFeature> synthetic;
    // Multiplier on the synthetic term, e.g. total views / views in this batch.
    double synthetic_scale = 1.0;
};

// Image terms are averaged over images and the synthetic term is summed over
// the supplied render pairs; total = a*pseudo + b*cyc + g*dist + d*eq + z*syn.
LossReport total_loss(const CseModel& model, const LossBatch& batch, const GeodesicTable& geo,
                      const std::vector<int>& flip_index, const LossWeights& weights, ModelGradient* grad = nullptr,
                      int workers = 1);

}  // namespace canonmap
