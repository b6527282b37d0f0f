#include "watershed/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>

#include "watershed/csv.hpp"

namespace watershed {

namespace {

ClassLabel mode(std::span<const std::uint32_t> counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;
    return static_cast<ClassLabel>(best);
}

void check_labelled(std::span<const ClassLabel> labels) {
    for (ClassLabel l : labels)
        if (l < 0) throw UsageError("reference set must be fully labelled");
}

}  // namespace

std::vector<std::vector<std::size_t>> sample_reference_batches(std::size_t n_train, const EvalConfig& config) {
    if (n_train == 0) throw UsageError("empty training set");
    if (config.n_batches == 0) throw UsageError("n_batches must be positive");
    if (config.batch_size == 0 || config.batch_size > n_train) {
        throw UsageError("batch size " + std::to_string(config.batch_size) + " must be in 1.." +
                         std::to_string(n_train) + " (training set size)");
    }
    std::vector<std::size_t> all(n_train);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const Rng base(config.rng_seed);
    std::vector<std::vector<std::size_t>> batches(config.n_batches);
    for (std::size_t b = 0; b < config.n_batches; ++b) {
        Rng rng = base.split(b);
        batches[b] = rng.sample(all, config.batch_size);
        std::sort(batches[b].begin(), batches[b].end());
    }
    return batches;
}

std::vector<ClassLabel> predict_embedded(const Matrix& queries, const Matrix& train,
                                         std::span<const ClassLabel> train_labels, std::size_t num_classes,
                                         const EvalConfig& config, std::span<const long> exclude) {
    const auto m = static_cast<std::size_t>(queries.rows());
    const auto n = static_cast<std::size_t>(train.rows());
    const auto dim = static_cast<std::size_t>(train.cols());
    if (train_labels.size() != n) throw UsageError("predict: label count does not match training set");
    if (queries.cols() != train.cols()) throw UsageError("predict: query dimension mismatch");
    if (!exclude.empty() && exclude.size() != m) throw UsageError("predict: exclude list must match queries");
    check_labelled(train_labels);
    const std::size_t k = std::max(num_classes, watershed::num_classes(train_labels));
    if (k == 0) throw UsageError("predict: no classes");

    const auto batches = sample_reference_batches(n, config);
    std::vector<std::uint32_t> votes(m * k, 0);
    Matrix reference(static_cast<Eigen::Index>(config.batch_size), train.cols());
    std::vector<ClassLabel> ref_labels(config.batch_size);
    for (const auto& batch : batches) {
        for (std::size_t r = 0; r < batch.size(); ++r) {
            reference.row(static_cast<Eigen::Index>(r)) = train.row(static_cast<Eigen::Index>(batch[r]));
            ref_labels[r] = train_labels[batch[r]];
        }
        const double* ref = reference.data();
        parallel_for(0, m, [&](std::size_t q) {
            std::span<const double> zq(queries.data() + q * dim, dim);
            const long skip = exclude.empty() ? -1 : exclude[q];
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_r = batch.size();
            for (std::size_t r = 0; r < batch.size(); ++r) {
                if (static_cast<long>(batch[r]) == skip) continue;
                const double s = squared_distance(zq, {ref + r * dim, dim});
                if (s < best) {
                    best = s;
                    best_r = r;
                }
            }
            if (best_r < batch.size()) ++votes[q * k + static_cast<std::size_t>(ref_labels[best_r])];
        }, 32);
    }

    std::vector<ClassLabel> out(m);
    for (std::size_t q = 0; q < m; ++q) out[q] = mode({votes.data() + q * k, k});
    return out;
}

std::vector<ClassLabel> predict(const Matrix& queries, const PointSet& train,
                                const LinearEmbedding& embedding, const EvalConfig& config,
                                std::span<const long> exclude) {
    if (train.size() == 0) throw UsageError("predict: empty training set");
    if (train.labels.size() != train.size()) throw UsageError("predict: training labels missing");
    return predict_embedded(embedding.embed(queries), embedding.embed(train.coords), train.labels,
                            train.num_classes(), config, exclude);
}

std::vector<ClassLabel> predict_linear(const LinearHead& head, const Matrix& embedded) {
    if (embedded.cols() != head.weights.rows()) throw UsageError("linear head: input size mismatch");
    Matrix logits = embedded * head.weights;
    logits.rowwise() += head.bias;
    std::vector<ClassLabel> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = static_cast<ClassLabel>(best);
    }
    return out;
}

double accuracy(std::span<const ClassLabel> predictions, std::span<const ClassLabel> truth) {
    if (predictions.size() != truth.size()) throw UsageError("accuracy: length mismatch");
    if (predictions.empty()) throw UsageError("accuracy: no predictions");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<ClassLabel> predict_model(const Model& model, const Matrix& queries, const PointSet& train,
                                      const EvalConfig& config) {
    if (model.kind == LossKind::linear) {
        if (!model.head) throw UsageError("linear model without a classifier head");
        return predict_linear(*model.head, model.transform(queries));
    }
    return predict_embedded(model.transform(queries), model.transform(train.coords), train.labels,
                            std::max(model.num_classes, train.num_classes()), config);
}

double training_accuracy(const Model& model, const PointSet& train, const EvalConfig& config) {
    if (model.kind == LossKind::linear) {
        return accuracy(predict_model(model, train.coords, train, config), train.labels);
    }
    std::vector<long> self(train.size());
    std::iota(self.begin(), self.end(), 0L);
    const Matrix z = model.transform(train.coords);
    const auto preds = predict_embedded(z, z, train.labels, std::max(model.num_classes, train.num_classes()),
                                        config, self);
    return accuracy(preds, train.labels);
}

std::vector<GridCell> export_boundary_grid(const PointSet& train, const Model& model, const GridSpec& grid,
                                           const EvalConfig& config) {
    if (train.dim() != 2) throw UsageError("grid export needs 2-D training data");
    if (grid.nx < 2 || grid.ny < 2) throw UsageError("grid resolution must be at least 2 per axis");
    if (!(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min)) throw UsageError("grid bounds are empty");

    Matrix cells(static_cast<Eigen::Index>(grid.nx * grid.ny), 2);
    const double dx = (grid.x_max - grid.x_min) / static_cast<double>(grid.nx - 1);
    const double dy = (grid.y_max - grid.y_min) / static_cast<double>(grid.ny - 1);
    for (std::size_t iy = 0; iy < grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            const auto row = static_cast<Eigen::Index>(iy * grid.nx + ix);
            cells(row, 0) = grid.x_min + static_cast<double>(ix) * dx;
            cells(row, 1) = grid.y_min + static_cast<double>(iy) * dy;
        }
    }
    const auto labels = predict_model(model, cells, train, config);
    std::vector<GridCell> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = GridCell{cells(static_cast<Eigen::Index>(i), 0), cells(static_cast<Eigen::Index>(i), 1), labels[i]};
    return out;
}

void write_grid_csv(std::ostream& out, std::span<const GridCell> cells) {
    out << "x,y,label\n";
    for (const GridCell& c : cells) out << format_number(c.x) << ',' << format_number(c.y) << ',' << c.label << '\n';
}

void write_predictions_csv(std::ostream& out, std::span<const ClassLabel> predicted,
                           std::span<const ClassLabel> truth) {
    if (!truth.empty() && truth.size() != predicted.size()) throw UsageError("predictions/truth length mismatch");
    out << "id,predicted,truth\n";
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        out << i << ',' << predicted[i] << ',';
        if (!truth.empty()) out << truth[i];
        out << '\n';
    }
}

}  // namespace watershed
