#ifndef WATERSHED_LOSSES_HPP
#define WATERSHED_LOSSES_HPP

#include <iosfwd>
#include <span>
#include <vector>

#include "watershed/core.hpp"

namespace watershed {

// Per-point penalty when a point's own class has no usable neighbour
// (about -log of a probability floor of e^-30). Such points get no gradient.
inline constexpr double kLossCap = 30.0;

using IndexMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LossReport {
    double loss = 0.0;
    // probs(i, k): softmax weight of class k for point i; 0 for classes
    // dropped because X_correct_k has no point other than i.
    Matrix probs;
    // Nearest correctly propagated point of class k, excluding i; -1 if none.
    IndexMatrix neighbor_ids;
    Matrix grad_embed;
    std::vector<bool> correct_mask;
    std::vector<Seed> seeds_used;
    std::vector<ClassLabel> true_labels;
    std::vector<ClassLabel> propagated;
    // Point contributed kLossCap instead of -log p.
    std::vector<bool> capped;
};

// n_seeds distinct points per class, drawn uniformly (class order, then draw
// order). Throws PreconditionError if some class has <= n_seeds members.
std::vector<Seed> sample_seeds(std::span<const ClassLabel> labels, std::size_t n_seeds,
                               std::size_t num_classes, Rng& rng);

/// Watershed loss on a batch of embedded points.
///
///   1. sample n_seeds seeds per class from rng,
///   2. propagate the seed labels greedily over the embedding,
///   3. X_correct = points whose propagated label equals the true label,
///   4. for every point i and class k pick the nearest point of
///      X_correct_k other than i,
///   5. p(i, k) = softmax_k(-|z_i - z_nn(i,k)|),
///   6. loss = mean_i -log p(i, y_i).
/// The gradient with respect to the embedding is filled in as well.
/// num_classes = 0 infers K from the labels.
LossReport watershed_loss_forward(const Matrix& embedded, std::span<const ClassLabel> labels,
                                  std::size_t n_seeds, Rng& rng, std::size_t num_classes = 0);

// Same, with the seed set given explicitly.
LossReport watershed_loss_with_seeds(const Matrix& embedded, std::span<const ClassLabel> labels,
                                     std::span<const Seed> seeds, std::size_t num_classes = 0);

// Gradient of report.loss with respect to the embedded points, treating the
// seed choice, propagation and neighbour selection as constants.
Matrix watershed_loss_backward(const LossReport& report, const Matrix& embedded);

// CSV: id,true_label,propagated,correct,p_true
void write_loss_csv(std::ostream& out, const LossReport& report);

struct NcaResult {
    double loss = 0.0;
    Matrix grad_embed;
    // Probability mass each point assigns to its own class.
    std::vector<double> p_correct;
    std::vector<bool> capped;
};

// Neighbourhood component analysis:
//   p_ij = exp(-|z_i - z_j|^2) / sum_{l != i} exp(-|z_i - z_l|^2),
//   p_i = sum_{j != i, y_j = y_i} p_ij,  loss = -(1/n) sum_i log p_i.
// Singleton classes contribute kLossCap without gradient.
NcaResult nca_loss(const Matrix& embedded, std::span<const ClassLabel> labels);

struct LinearHead {
    Matrix weights;  // d_embed x K
    RowVector bias;  // K
};

struct SoftmaxResult {
    double loss = 0.0;
    Matrix grad_embed;
    Matrix grad_weights;
    RowVector grad_bias;
};

// Mean softmax cross-entropy of embedded * weights + bias.
SoftmaxResult linear_softmax_loss(const Matrix& embedded, const LinearHead& head,
                                  std::span<const ClassLabel> labels);

}  // namespace watershed

#endif  // WATERSHED_LOSSES_HPP
