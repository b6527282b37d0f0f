#include "watershed/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "watershed/classifier.hpp"
#include "watershed/csv.hpp"
#include "watershed/evaluation.hpp"
#include "watershed/losses.hpp"

namespace watershed {

namespace {

// Substreams of the run seed.
enum Stream : std::uint64_t { kSplitStream = 0, kInitStream = 1, kBatchStream = 2, kEvalStream = 3 };

struct BatchGradient {
    double loss = 0.0;
    Matrix grad_weights;
    Matrix grad_head;
    RowVector grad_bias;
};

BatchGradient batch_gradient(const Matrix& x, std::span<const ClassLabel> labels, const Model& model,
                             const TrainConfig& config, std::size_t num_classes, Rng& rng) {
    const Matrix z = model.embedding.embed(x);
    BatchGradient out;
    Matrix grad_embed;
    switch (config.loss_kind) {
        case LossKind::watershed: {
            LossReport report = watershed_loss_forward(z, labels, config.n_seeds, rng, num_classes);
            out.loss = report.loss;
            grad_embed = std::move(report.grad_embed);
            break;
        }
        case LossKind::nca: {
            NcaResult r = nca_loss(z, labels);
            out.loss = r.loss;
            grad_embed = std::move(r.grad_embed);
            break;
        }
        case LossKind::linear: {
            SoftmaxResult r = linear_softmax_loss(z, *model.head, labels);
            out.loss = r.loss;
            grad_embed = std::move(r.grad_embed);
            out.grad_head = std::move(r.grad_weights);
            out.grad_bias = std::move(r.grad_bias);
            break;
        }
    }
    out.grad_weights = x.transpose() * grad_embed;
    return out;
}

class Sgd {
public:
    Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    template <typename Param, typename Grad>
    void step(Param& param, const Grad& grad, Param& velocity) const {
        if (momentum_ == 0.0) {
            param -= lr_ * grad;
            return;
        }
        if (velocity.size() == 0) velocity = Param::Zero(grad.rows(), grad.cols());
        velocity = momentum_ * velocity + grad;
        param -= lr_ * velocity;
    }

private:
    double lr_;
    double momentum_;
};

double validation_accuracy(const Model& model, const Matrix& z_train, std::span<const ClassLabel> train_labels,
                           const Matrix& x_valid, std::span<const ClassLabel> valid_labels,
                           const TrainConfig& config) {
    if (valid_labels.empty()) return 0.0;
    const Matrix z_valid = model.embedding.embed(x_valid);
    if (model.kind == LossKind::linear) return accuracy(predict_linear(*model.head, z_valid), valid_labels);
    EvalConfig eval;
    eval.n_batches = config.eval_batches;
    eval.batch_size = std::min(config.batch_size, static_cast<std::size_t>(z_train.rows()));
    eval.rng_seed = Rng(config.rng_seed).split(kEvalStream).next_u64();
    return accuracy(predict_embedded(z_valid, z_train, train_labels, model.num_classes, eval), valid_labels);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

void TrainConfig::validate() const {
    if (n_seeds == 0) throw UsageError("n_seeds must be positive");
    if (batch_size == 0) throw UsageError("batch size must be positive");
    if (batches_per_epoch == 0) throw UsageError("batches per epoch must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must be in [0, 1)");
    if (max_epochs == 0) throw UsageError("max_epochs must be positive");
    if (patience == 0) throw UsageError("patience must be positive");
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) throw UsageError("valid fraction must be in (0, 1)");
    if (embed_dim == 0) throw UsageError("embedding dimension must be positive");
    if (eval_batches == 0) throw UsageError("eval batches must be positive");
}

std::size_t class_floor(LossKind kind, std::size_t n_seeds) {
    switch (kind) {
        case LossKind::watershed: return n_seeds + 1;
        case LossKind::nca: return 2;
        case LossKind::linear: return 1;
    }
    return 1;
}

std::vector<std::size_t> sample_batch(std::span<const ClassLabel> labels, std::size_t batch_size,
                                      std::size_t floor, std::size_t num_classes, Rng& rng) {
    const std::size_t n = labels.size();
    if (batch_size > n) {
        throw UsageError("batch size " + std::to_string(batch_size) + " exceeds training set size " +
                         std::to_string(n));
    }
    const std::size_t k = std::max(num_classes, watershed::num_classes(labels));
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0) throw UsageError("sample_batch: unlabelled training point " + std::to_string(i));
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    if (k * floor > batch_size) {
        throw UsageError("batch size " + std::to_string(batch_size) + " cannot hold " + std::to_string(floor) +
                         " points for each of " + std::to_string(k) + " classes");
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (by_class[c].size() < floor) {
            throw PreconditionError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                                    " training points; each batch needs " + std::to_string(floor));
        }
    }

    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t id : rng.sample(by_class[c], floor)) {
            batch.push_back(id);
            taken[id] = true;
        }
    }
    std::vector<std::size_t> rest;
    rest.reserve(n - batch.size());
    for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) rest.push_back(i);
    for (std::size_t id : rng.sample(rest, batch_size - batch.size())) batch.push_back(id);
    std::sort(batch.begin(), batch.end());
    return batch;
}

TrainReport train(const PointSet& data, const TrainConfig& config) {
    config.validate();
    data.validate();
    if (data.size() < 2) throw UsageError("training needs at least two points");
    for (ClassLabel l : data.labels)
        if (l < 0) throw UsageError("training data must be fully labelled");

    const Rng root(config.rng_seed);
    const std::size_t n = data.size();
    const std::size_t num_classes = data.num_classes();

    TrainReport report;
    report.config = config;
    {
        Rng split_rng = root.split(kSplitStream);
        auto perm = split_rng.permutation(n);
        auto n_valid = static_cast<std::size_t>(std::llround(config.valid_fraction * static_cast<double>(n)));
        n_valid = std::clamp<std::size_t>(n_valid, 1, n - 1);
        report.valid_ids.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_valid));
        report.train_ids.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_valid), perm.end());
        std::sort(report.valid_ids.begin(), report.valid_ids.end());
        std::sort(report.train_ids.begin(), report.train_ids.end());
    }
    const PointSet train_set = data.subset(report.train_ids);
    const PointSet valid_set = data.subset(report.valid_ids);
    if (config.batch_size > train_set.size()) {
        throw UsageError("batch size " + std::to_string(config.batch_size) + " exceeds the training split (" +
                         std::to_string(train_set.size()) + " points)");
    }

    Model model;
    model.kind = config.loss_kind;
    model.num_classes = num_classes;
    model.standardizer = Standardizer::fit(train_set.coords);
    const Matrix x_train = model.standardizer.apply(train_set.coords);
    const Matrix x_valid = model.standardizer.apply(valid_set.coords);

    const auto d_in = static_cast<Eigen::Index>(data.dim());
    const auto d_embed = static_cast<Eigen::Index>(config.embed_dim);
    {
        Rng init = root.split(kInitStream);
        model.embedding.weights.resize(d_in, d_embed);
        const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
        for (Eigen::Index r = 0; r < d_in; ++r)
            for (Eigen::Index c = 0; c < d_embed; ++c) model.embedding.weights(r, c) = scale * init.normal();
    }
    if (config.loss_kind == LossKind::linear) {
        const auto k = static_cast<Eigen::Index>(num_classes);
        model.head = LinearHead{Matrix::Zero(d_embed, k), RowVector::Zero(k)};
    }

    const std::size_t floor = class_floor(config.loss_kind, config.n_seeds);
    const Sgd sgd(config.learning_rate, config.momentum);
    Matrix v_weights, v_head;
    RowVector v_bias;

    Model best = model;
    double best_acc = -1.0;
    std::size_t best_epoch = 0;
    const auto scale = 1.0 / static_cast<double>(config.batches_per_epoch);

    auto apply = [&](const BatchGradient& g, double weight) {
        sgd.step(model.embedding.weights, (weight * g.grad_weights).eval(), v_weights);
        if (model.head) {
            sgd.step(model.head->weights, (weight * g.grad_head).eval(), v_head);
            sgd.step(model.head->bias, (weight * g.grad_bias).eval(), v_bias);
        }
    };

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const Rng epoch_rng = root.split(kBatchStream).split(epoch);
        double loss_sum = 0.0;
        BatchGradient total;
        for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
            Rng rng = epoch_rng.split(b);
            const auto ids = sample_batch(train_set.labels, config.batch_size, floor, num_classes, rng);
            const Matrix xb = gather_rows(x_train, ids);
            std::vector<ClassLabel> yb(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) yb[i] = train_set.labels[ids[i]];

            BatchGradient g = batch_gradient(xb, yb, model, config, num_classes, rng);
            if (!std::isfinite(g.loss) || !all_finite(g.grad_weights)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(b));
            }
            loss_sum += g.loss;
            if (config.update_per_batch) {
                apply(g, 1.0);
            } else if (b == 0) {
                total = std::move(g);
            } else {
                total.grad_weights += g.grad_weights;
                if (model.head) {
                    total.grad_head += g.grad_head;
                    total.grad_bias += g.grad_bias;
                }
            }
        }
        if (!config.update_per_batch) apply(total, scale);
        if (!model.embedding.weights.allFinite()) {
            throw TrainingError("weights became non-finite at epoch " + std::to_string(epoch));
        }
        // Finite weights can still overflow once applied; distances would
        // then be inf and every point silently capped.
        const Matrix z_train = model.embedding.embed(x_train);
        if (!z_train.allFinite() || !(z_train.squaredNorm() < std::numeric_limits<double>::infinity())) {
            throw TrainingError("embedding overflowed at epoch " + std::to_string(epoch));
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum * scale;
        rec.valid_accuracy = validation_accuracy(model, z_train, train_set.labels, x_valid, valid_set.labels, config);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);

        if (rec.valid_accuracy > best_acc) {
            best_acc = rec.valid_accuracy;
            best_epoch = epoch;
            best = model;
        }
        if (epoch - best_epoch >= config.patience) break;
    }

    best.metadata = {
        {"loss", std::string(to_string(config.loss_kind))},
        {"n_seeds", std::to_string(config.n_seeds)},
        {"batch_size", std::to_string(config.batch_size)},
        {"batches_per_epoch", std::to_string(config.batches_per_epoch)},
        {"learning_rate", format_exact(config.learning_rate)},
        {"momentum", format_exact(config.momentum)},
        {"max_epochs", std::to_string(config.max_epochs)},
        {"patience", std::to_string(config.patience)},
        {"valid_fraction", format_exact(config.valid_fraction)},
        {"embed_dim", std::to_string(config.embed_dim)},
        {"update_per_batch", config.update_per_batch ? "true" : "false"},
        {"rng_seed", std::to_string(config.rng_seed)},
        {"epochs_run", std::to_string(report.epochs.size())},
        {"best_epoch", std::to_string(best_epoch)},
    };
    report.best_epoch = best_epoch;
    report.best_valid_accuracy = best_acc;
    report.model = std::move(best);
    return report;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
    out << "epoch,train_loss,valid_accuracy\n";
    for (const EpochRecord& r : report.epochs)
        out << r.epoch << ',' << format_number(r.train_loss) << ',' << format_number(r.valid_accuracy) << '\n';
}

CoordinateTrace train_coordinates(const PointSet& points, std::size_t epochs, double learning_rate, Rng& rng,
                                  std::size_t n_seeds) {
    points.validate();
    if (points.dim() != 2) throw UsageError("train_coordinates expects 2-D points");
    if (points.size() < 2) throw UsageError("train_coordinates needs at least two points");
    for (ClassLabel l : points.labels)
        if (l < 0) throw UsageError("train_coordinates: every point must be labelled");

    CoordinateTrace trace;
    trace.coords = points.coords;
    trace.initial_cross_edges = cross_edge_count(mst(trace.coords), points.labels);
    const std::size_t k = points.num_classes();
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        const LossReport r = watershed_loss_forward(trace.coords, points.labels, n_seeds, rng, k);
        if (!std::isfinite(r.loss)) throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
        trace.losses.push_back(r.loss);
        trace.coords -= learning_rate * r.grad_embed;
        trace.cross_edges.push_back(cross_edge_count(mst(trace.coords), points.labels));
    }
    return trace;
}

}  // namespace watershed
