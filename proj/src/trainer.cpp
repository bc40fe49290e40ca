#include "canonmap/trainer.hpp"

#include <cmath>
#include <numeric>

#include "canonmap/error.hpp"
#include "canonmap/rng.hpp"

namespace canonmap {

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void Adam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double learning_rate(const TrainConfig& config, int epoch) {
    return epoch >= config.decay_epoch ? config.lr * config.decay_factor : config.lr;
}

namespace {

void check_finite(const LossReport& r, int epoch, int step) {
    const std::pair<const char*, double> terms[] = {
        {"pseudo", r.pseudo}, {"dist", r.dist}, {"cyc", r.cyc}, {"eq", r.eq}, {"syn", r.syn}};
    for (const auto& [name, value] : terms) {
        if (!std::isfinite(value))
            fail(ErrorKind::NonFinite, std::string("loss term '") + name + "' is not finite at epoch " +
                                           std::to_string(epoch) + " step " + std::to_string(step));
    }
}

void add_report(LossReport& acc, const LossReport& r, double w) {
    acc.pseudo += w * r.pseudo;
    acc.dist += w * r.dist;
    acc.cyc += w * r.cyc;
    acc.eq += w * r.eq;
    acc.syn += w * r.syn;
    acc.total += w * r.total;
}

struct ImageCache {
    std::vector<CellCoord> cells;
    std::vector<CellCoord> flip_cells;  // foreground cells whose mirror is foreground in the flipped map
};

ImageTerms image_terms(const TrainingImage& img, const ImageCache& cache, const TrainConfig& config, Rng& rng) {
    ImageTerms terms;
    const FeatureMap& f = img.features;
    for (const auto& e : img.pseudo.entries) {
        if (!f.contains(e.cell)) fail(ErrorKind::InvalidIndex, "pseudo-GT cell outside feature map of " + img.id);
        terms.pseudo.push_back({f.feature(e.cell.row, e.cell.col), static_cast<int>(e.vertex)});
    }
    const double scale = static_cast<double>(std::max(f.height(), f.width()));
    const auto cyc = rng.sample_without_replacement(cache.cells.size(),
                                                    std::min<std::size_t>(config.cycle_cells, cache.cells.size()));
    for (std::size_t i : cyc) {
        const CellCoord u = cache.cells[i];
        terms.cycle.push_back({f.feature(u.row, u.col), (u.row + 0.5) / scale, (u.col + 0.5) / scale});
    }
    if (img.flipped) {
        const auto eq = rng.sample_without_replacement(
            cache.flip_cells.size(), std::min<std::size_t>(config.eq_cells, cache.flip_cells.size()));
        for (std::size_t i : eq) {
            const CellCoord u = cache.flip_cells[i];
            const CellCoord m = mirror_cell(u, f.width());
            terms.flips.push_back({f.feature(u.row, u.col), img.flipped->feature(m.row, m.col)});
        }
    }
    return terms;
}

}  // namespace

TrainResult train(CseModel model, const TrainingCorpus& corpus, const GeodesicTable& geo,
                  const std::vector<int>& flip_index, const TrainConfig& config) {
    if (config.epochs < 0 || config.batch_size < 1)
        fail(ErrorKind::InvalidArgument, "epochs must be >= 0 and batch size >= 1");

    std::vector<ImageCache> caches(corpus.images.size());
    for (std::size_t i = 0; i < corpus.images.size(); ++i) {
        const TrainingImage& img = corpus.images[i];
        if (img.features.dim() != model.feature_dim())
            fail(ErrorKind::DimensionMismatch, "features of " + img.id + " do not match the pixel head input");
        caches[i].cells = img.features.foreground_cells();
        if (img.flipped) {
            if (img.flipped->height() != img.features.height() || img.flipped->width() != img.features.width())
                fail(ErrorKind::DimensionMismatch, "flipped features of " + img.id + " have a different grid");
            for (CellCoord u : caches[i].cells)
                if (img.flipped->foreground(mirror_cell(u, img.features.width()))) caches[i].flip_cells.push_back(u);
        }
    }

    const std::size_t n_images = corpus.images.size();
    const std::size_t n_views = corpus.views.size();
    const int steps = n_images > 0 ? static_cast<int>((n_images + config.batch_size - 1) / config.batch_size) : 1;

    Rng rng(config.seed);
    Adam adam(model.num_parameters());
    Eigen::VectorXd theta = model.parameters();
    TrainResult result;

    std::vector<std::size_t> image_order(n_images), view_order(n_views);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = learning_rate(config, epoch);
        std::iota(image_order.begin(), image_order.end(), std::size_t{0});
        std::iota(view_order.begin(), view_order.end(), std::size_t{0});
        rng.shuffle(image_order);
        rng.shuffle(view_order);

        EpochRecord record;
        record.epoch = epoch;
        record.lr = lr;
        record.loss.weights = config.weights;
        for (int step = 0; step < steps; ++step) {
            LossBatch batch;
            const std::size_t i0 = static_cast<std::size_t>(step) * config.batch_size;
            const std::size_t i1 = std::min(n_images, i0 + config.batch_size);
            for (std::size_t i = i0; i < i1; ++i) {
                const std::size_t id = image_order[i];
                batch.images.push_back(image_terms(corpus.images[id], caches[id], config, rng));
            }
            const std::size_t v0 = n_views * step / steps, v1 = n_views * (step + 1) / steps;
            for (std::size_t v = v0; v < v1; ++v) {
                const BankView& view = corpus.views[view_order[v]];
                for (std::size_t k = 0; k < view.visible.size(); ++k) {
                    if (!view.visible[k]) continue;
                    const CellCoord c = view.vertex_cell[k];
                    batch.synthetic.push_back({view.features.feature(c.row, c.col), static_cast<int>(k)});
                }
            }
            batch.synthetic_scale = v1 > v0 ? static_cast<double>(n_views) / static_cast<double>(v1 - v0) : 0.0;

            ModelGradient grad(model);
            const LossReport report = total_loss(model, batch, geo, flip_index, config.weights, &grad, config.workers);
            check_finite(report, epoch, step);
            adam.step(theta, grad.flatten(model), lr);
            if (!theta.allFinite())
                fail(ErrorKind::NonFinite, "parameters became non-finite at epoch " + std::to_string(epoch));
            model.set_parameters(theta);
            add_report(record.loss, report, 1.0 / steps);
        }
        if (config.on_epoch) config.on_epoch(record);
        result.history.push_back(record);
    }
    result.model = std::move(model);
    return result;
}

}  // namespace canonmap
