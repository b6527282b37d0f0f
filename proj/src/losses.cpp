#include "watershed/losses.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "watershed/classifier.hpp"
#include "watershed/csv.hpp"

namespace watershed {

namespace {

std::size_t checked_classes(std::span<const ClassLabel> labels, std::size_t rows,
                            std::size_t num_classes, const char* who) {
    if (labels.size() != rows) throw UsageError(std::string(who) + ": label count does not match point count");
    for (ClassLabel l : labels)
        if (l < 0) throw UsageError(std::string(who) + ": every point needs a true label");
    const std::size_t inferred = watershed::num_classes(labels);
    if (num_classes != 0 && inferred > num_classes)
        throw UsageError(std::string(who) + ": label outside 0..K-1");
    return num_classes == 0 ? inferred : num_classes;
}

}  // namespace

std::vector<Seed> sample_seeds(std::span<const ClassLabel> labels, std::size_t n_seeds,
                               std::size_t num_classes, Rng& rng) {
    std::vector<std::vector<std::size_t>> members(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
            throw UsageError("sample_seeds: label outside 0..K-1");
        members[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    std::vector<Seed> seeds;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (members[c].size() <= n_seeds) {
            throw PreconditionError("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                    " samples in the batch; the watershed loss needs more than n_seeds = " +
                                    std::to_string(n_seeds));
        }
        for (std::size_t id : rng.sample(members[c], n_seeds))
            seeds.push_back(Seed{id, static_cast<ClassLabel>(c)});
    }
    return seeds;
}

LossReport watershed_loss_forward(const Matrix& embedded, std::span<const ClassLabel> labels,
                                  std::size_t n_seeds, Rng& rng, std::size_t num_classes) {
    if (n_seeds == 0) throw UsageError("watershed loss: n_seeds must be positive");
    const std::size_t k = checked_classes(labels, static_cast<std::size_t>(embedded.rows()), num_classes,
                                          "watershed loss");
    const std::vector<Seed> seeds = sample_seeds(labels, n_seeds, k, rng);
    return watershed_loss_with_seeds(embedded, labels, seeds, k);
}

LossReport watershed_loss_with_seeds(const Matrix& embedded, std::span<const ClassLabel> labels,
                                     std::span<const Seed> seeds, std::size_t num_classes) {
    const auto n = static_cast<std::size_t>(embedded.rows());
    const auto dim = static_cast<std::size_t>(embedded.cols());
    const std::size_t k = checked_classes(labels, n, num_classes, "watershed loss");
    if (n == 0) throw UsageError("watershed loss: empty batch");

    LossReport report;
    report.true_labels.assign(labels.begin(), labels.end());
    report.seeds_used.assign(seeds.begin(), seeds.end());

    std::vector<ClassLabel> seed_labels(n, kUnlabeled);
    for (const Seed& s : seeds) {
        if (s.point_id >= n) throw UsageError("watershed loss: seed id out of range");
        if (s.label != labels[s.point_id]) throw UsageError("watershed loss: seed label differs from true label");
        seed_labels[s.point_id] = s.label;
    }
    const PropagationResult prop = propagate(embedded, seed_labels, k, /*compute_margin=*/false);
    report.propagated = prop.labels;

    report.correct_mask.resize(n);
    std::vector<std::vector<std::size_t>> correct_by_class(k);
    for (std::size_t i = 0; i < n; ++i) {
        report.correct_mask[i] = prop.labels[i] == labels[i];
        if (report.correct_mask[i]) correct_by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }

    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(k);
    report.neighbor_ids = IndexMatrix::Constant(rows, cols, -1);
    report.probs = Matrix::Zero(rows, cols);
    report.capped.assign(n, false);
    std::vector<double> point_loss(n, 0.0);

    const double* base = embedded.data();
    parallel_for(0, n, [&](std::size_t i) {
        std::span<const double> zi(base + i * dim, dim);
        std::vector<double> dist(k, std::numeric_limits<double>::infinity());
        for (std::size_t c = 0; c < k; ++c) {
            double best = std::numeric_limits<double>::infinity();
            long best_id = -1;
            for (std::size_t j : correct_by_class[c]) {
                if (j == i) continue;
                const double s = squared_distance(zi, {base + j * dim, dim});
                if (s < best) {
                    best = s;
                    best_id = static_cast<long>(j);
                }
            }
            if (best_id < 0) continue;
            report.neighbor_ids(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = best_id;
            dist[c] = distance_unchecked(zi, {base + static_cast<std::size_t>(best_id) * dim, dim});
        }
        double nearest = std::numeric_limits<double>::infinity();
        for (double d : dist) nearest = std::min(nearest, d);
        if (!std::isfinite(nearest)) {
            report.capped[i] = true;
            point_loss[i] = kLossCap;
            return;
        }
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            if (std::isfinite(dist[c])) total += std::exp(nearest - dist[c]);
        for (std::size_t c = 0; c < k; ++c) {
            if (std::isfinite(dist[c]))
                report.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                    std::exp(nearest - dist[c]) / total;
        }
        const auto y = static_cast<std::size_t>(labels[i]);
        if (!std::isfinite(dist[y])) {
            report.capped[i] = true;
            point_loss[i] = kLossCap;
        } else {
            point_loss[i] = dist[y] - nearest + std::log(total);
        }
    }, 64);

    double sum = 0.0;
    for (double l : point_loss) sum += l;
    report.loss = sum / static_cast<double>(n);
    report.grad_embed = watershed_loss_backward(report, embedded);
    return report;
}

Matrix watershed_loss_backward(const LossReport& report, const Matrix& embedded) {
    const auto n = static_cast<std::size_t>(embedded.rows());
    const auto dim = static_cast<std::size_t>(embedded.cols());
    if (report.true_labels.size() != n || static_cast<std::size_t>(report.probs.rows()) != n)
        throw UsageError("watershed_loss_backward: report does not match the embedding");

    Matrix grad = Matrix::Zero(embedded.rows(), embedded.cols());
    const double inv_n = 1.0 / static_cast<double>(n);
    const double* base = embedded.data();
    for (std::size_t i = 0; i < n; ++i) {
        if (report.capped[i]) continue;
        std::span<const double> zi(base + i * dim, dim);
        for (Eigen::Index c = 0; c < report.probs.cols(); ++c) {
            const long j = report.neighbor_ids(static_cast<Eigen::Index>(i), c);
            if (j < 0) continue;
            const auto ju = static_cast<std::size_t>(j);
            const double d = distance_unchecked(zi, {base + ju * dim, dim});
            const double target = c == report.true_labels[i] ? 1.0 : 0.0;
            const double g = (report.probs(static_cast<Eigen::Index>(i), c) - target) * inv_n / d;
            if (g == 0.0) continue;
            for (std::size_t a = 0; a < dim; ++a) {
                const double diff = zi[a] - base[ju * dim + a];
                grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) -= g * diff;
                grad(static_cast<Eigen::Index>(ju), static_cast<Eigen::Index>(a)) += g * diff;
            }
        }
    }
    return grad;
}

void write_loss_csv(std::ostream& out, const LossReport& report) {
    out << "id,true_label,propagated,correct,p_true\n";
    for (std::size_t i = 0; i < report.true_labels.size(); ++i) {
        const double p = report.probs(static_cast<Eigen::Index>(i), report.true_labels[i]);
        out << i << ',' << report.true_labels[i] << ',' << report.propagated[i] << ','
            << (report.correct_mask[i] ? 1 : 0) << ',' << format_number(p) << '\n';
    }
}

NcaResult nca_loss(const Matrix& embedded, std::span<const ClassLabel> labels) {
    const auto n = static_cast<std::size_t>(embedded.rows());
    const auto dim = static_cast<std::size_t>(embedded.cols());
    checked_classes(labels, n, 0, "nca loss");
    if (n < 2) throw UsageError("nca loss: need at least two points");

    NcaResult result;
    result.p_correct.assign(n, 0.0);
    result.capped.assign(n, false);
    std::vector<double> point_loss(n, 0.0);
    // coeff(i, j) = d loss_i / d |z_i - z_j|^2
    Matrix coeff = Matrix::Zero(embedded.rows(), embedded.rows());
    const double* base = embedded.data();

    parallel_for(0, n, [&](std::size_t i) {
        std::span<const double> zi(base + i * dim, dim);
        std::vector<double> neg_sq(n);
        double top_all = -std::numeric_limits<double>::infinity();
        double top_same = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            neg_sq[j] = -squared_distance(zi, {base + j * dim, dim});
            top_all = std::max(top_all, neg_sq[j]);
            if (labels[j] == labels[i]) top_same = std::max(top_same, neg_sq[j]);
        }
        if (!std::isfinite(top_same)) {
            result.capped[i] = true;
            point_loss[i] = kLossCap;
            return;
        }
        double z_all = 0.0;
        double z_same = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            z_all += std::exp(neg_sq[j] - top_all);
            if (labels[j] == labels[i]) z_same += std::exp(neg_sq[j] - top_same);
        }
        const double log_all = top_all + std::log(z_all);
        const double log_same = top_same + std::log(z_same);
        point_loss[i] = log_all - log_same;
        result.p_correct[i] = std::exp(log_same - log_all);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double p_ij = std::exp(neg_sq[j] - log_all);
            const double q_ij = labels[j] == labels[i] ? std::exp(neg_sq[j] - log_same) : 0.0;
            coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q_ij - p_ij;
        }
    }, 16);

    double sum = 0.0;
    for (double l : point_loss) sum += l;
    result.loss = sum / static_cast<double>(n);

    // d|z_i - z_j|^2 / dz_i = 2 (z_i - z_j), and the negative for z_j.
    const Eigen::VectorXd row_sum = coeff.rowwise().sum();
    const Eigen::VectorXd col_sum = coeff.colwise().sum().transpose();
    result.grad_embed = (2.0 / static_cast<double>(n)) *
                        ((row_sum + col_sum).asDiagonal() * embedded - coeff * embedded -
                         coeff.transpose() * embedded);
    return result;
}

SoftmaxResult linear_softmax_loss(const Matrix& embedded, const LinearHead& head,
                                  std::span<const ClassLabel> labels) {
    const auto n = static_cast<std::size_t>(embedded.rows());
    if (head.weights.rows() != embedded.cols())
        throw UsageError("linear softmax: head input size does not match the embedding");
    if (head.bias.size() != head.weights.cols()) throw UsageError("linear softmax: bias size mismatch");
    const auto k = static_cast<std::size_t>(head.weights.cols());
    checked_classes(labels, n, k, "linear softmax");
    if (n == 0) throw UsageError("linear softmax: empty batch");

    Matrix logits = embedded * head.weights;
    logits.rowwise() += head.bias;
    Matrix g(logits.rows(), logits.cols());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double top = logits.row(i).maxCoeff();
        const RowVector e = (logits.row(i).array() - top).exp().matrix();
        const double z = e.sum();
        g.row(i) = e / z;
        const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
        sum += top + std::log(z) - logits(i, y);
        g(i, y) -= 1.0;
    }
    g /= static_cast<double>(n);

    SoftmaxResult result;
    result.loss = sum / static_cast<double>(n);
    result.grad_embed = g * head.weights.transpose();
    result.grad_weights = embedded.transpose() * g;
    result.grad_bias = g.colwise().sum();
    return result;
}

}  // namespace watershed
