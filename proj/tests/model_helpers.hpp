#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "canonmap/cse_model.hpp"
#include "canonmap/rng.hpp"

namespace helpers {

using namespace canonmap;

inline CseModel random_model(int K, int Q, int D, int Df, int hidden, std::uint64_t seed,
                             Activation act = Activation::Tanh, double scale = 0.5) {
    Rng rng(seed);
    Eigen::MatrixXd U(K, Q);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < Q; ++j) U(i, j) = rng.normal();
    CseModel m(U, D, Df, hidden, act);
    Eigen::VectorXd theta(m.num_parameters());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = scale * rng.normal();
    m.set_parameters(theta);
    return m;
}

// Storage for feature spans used by loss inputs.
struct FeaturePool {
    std::vector<std::vector<float>> rows;
    std::span<const float> add(int dim, Rng& rng, double scale = 1.0) {
        rows.emplace_back(dim);
        for (float& x : rows.back()) x = static_cast<float>(scale * rng.normal());
        return rows.back();
    }
    std::span<const float> add(std::vector<float> v) {
        rows.push_back(std::move(v));
        return rows.back();
    }
    FeaturePool() { rows.reserve(4096); }
};

// Independent forward pass: tanh/identity MLP then softmax over vertices.
inline Eigen::VectorXd probs(const CseModel& m, std::span<const float> f) {
    const auto& h = m.head();
    Eigen::VectorXd x(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) x[i] = f[i];
    Eigen::VectorXd a = h.W1 * x + h.b1;
    if (h.activation == Activation::Tanh)
        for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = std::tanh(a[i]);
    const Eigen::VectorXd e = h.W2 * a + h.b2;
    const Eigen::MatrixXd E = m.basis() * m.coeffs();
    Eigen::VectorXd z(E.rows());
    for (Eigen::Index k = 0; k < E.rows(); ++k) z[k] = E.row(k).dot(e);
    const double mx = z.maxCoeff();
    double s = 0.0;
    for (Eigen::Index k = 0; k < z.size(); ++k) s += std::exp(z[k] - mx);
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = std::exp(z[k] - mx) / s;
    return z;
}

// Linear "one-hot" model: identity basis, identity head and C = s I, so a
// one-hot feature at k yields logits s * e_k.
inline CseModel one_hot_model(int K, double s) {
    CseModel m(Eigen::MatrixXd::Identity(K, K), K, K, K, Activation::Identity);
    m.coeffs() = s * Eigen::MatrixXd::Identity(K, K);
    m.head().W1 = Eigen::MatrixXd::Identity(K, K);
    m.head().b1.setZero();
    m.head().W2 = Eigen::MatrixXd::Identity(K, K);
    m.head().b2.setZero();
    return m;
}

inline std::vector<float> one_hot(int K, int k) {
    std::vector<float> v(K, 0.0f);
    v[k] = 1.0f;
    return v;
}

}  // namespace helpers
