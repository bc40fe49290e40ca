#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "canonmap/cse_model.hpp"
#include "canonmap/geodesics.hpp"
#include "canonmap/losses.hpp"
#include "canonmap/pseudo_gt.hpp"

namespace canonmap {

class Adam {
public:
    Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr);
    long steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

struct TrainingImage {
    std::string id;
    FeatureMap features;
    std::optional<FeatureMap> flipped;
    PseudoGt pseudo;
};

struct TrainingCorpus {
    std::vector<TrainingImage> images;
    std::vector<BankView> views;  // renders with known vertex cells
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    LossReport loss;  // mean over the epoch's steps
};

struct TrainConfig {
    int epochs = 40;
    double lr = 1e-3;
    int decay_epoch = 20;
    double decay_factor = 0.1;
    int batch_size = 1;
    std::uint64_t seed = 0;
    LossWeights weights;
    int cycle_cells = 64;
    int eq_cells = 64;
    int workers = 1;
    std::function<void(const EpochRecord&)> on_epoch;
};

// Learning rate in effect during (0-based) epoch.
double learning_rate(const TrainConfig& config, int epoch);

struct TrainResult {
    CseModel model;
    std::vector<EpochRecord> history;
};

// Adam on the flattened parameters. Each epoch visits the images in a
// shuffled order in batches of batch_size and spreads the render views
// evenly over the epoch's steps. Throws NonFinite naming the loss term when
// a loss becomes NaN or infinite.
TrainResult train(CseModel model, const TrainingCorpus& corpus, const GeodesicTable& geo,
                  const std::vector<int>& flip_index, const TrainConfig& config);

}  // namespace canonmap
