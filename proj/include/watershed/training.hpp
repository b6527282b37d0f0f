#ifndef WATERSHED_TRAINING_HPP
#define WATERSHED_TRAINING_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "watershed/core.hpp"
#include "watershed/model.hpp"

namespace watershed {

struct TrainConfig {
    LossKind loss_kind = LossKind::watershed;
    std::size_t n_seeds = 1;
    std::size_t batch_size = 2040;
    std::size_t batches_per_epoch = 256;
    double learning_rate = 0.1;
    double momentum = 0.0;
    std::size_t max_epochs = 100;
    std::size_t patience = 20;
    double valid_fraction = 0.2;
    std::uint64_t rng_seed = 0;
    std::size_t embed_dim = 2;
    // Reference batches used for the per-epoch validation vote.
    std::size_t eval_batches = 16;
    // false: one SGD step per epoch on the gradient averaged over all
    // batches. true: one step after every batch.
    bool update_per_batch = false;

    // Throws UsageError for values outside their documented ranges.
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double valid_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    TrainConfig config;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_valid_accuracy = 0.0;
    // Weights of the best epoch.
    Model model;
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> valid_ids;
};

// Per-class minimum each batch must contain for the given loss.
std::size_t class_floor(LossKind kind, std::size_t n_seeds);

/// Draws a batch of `batch_size` distinct indices: `floor` per class first,
/// then a uniform fill from everything not yet taken. Result is sorted.
/// A class with fewer than `floor` members is a PreconditionError.
std::vector<std::size_t> sample_batch(std::span<const ClassLabel> labels, std::size_t batch_size,
                                      std::size_t floor, std::size_t num_classes, Rng& rng);

// Splits, standardises, trains and returns the best-epoch model. Throws
// TrainingError when a loss turns non-finite.
TrainReport train(const PointSet& data, const TrainConfig& config);

// CSV: epoch,train_loss,valid_accuracy. Timing is left out so that reports of
// identical runs compare equal byte for byte.
void write_report_csv(std::ostream& out, const TrainReport& report);

struct CoordinateTrace {
    Matrix coords;
    std::size_t initial_cross_edges = 0;
    // After each epoch's update.
    std::vector<std::size_t> cross_edges;
    // Loss evaluated before each epoch's update.
    std::vector<double> losses;
};

// Gradient descent on the watershed loss with the point coordinates
// themselves as parameters. The cross-edge count of the MST is recorded
// after every epoch.
CoordinateTrace train_coordinates(const PointSet& points, std::size_t epochs, double learning_rate, Rng& rng,
                                  std::size_t n_seeds = 1);

}  // namespace watershed

#endif  // WATERSHED_TRAINING_HPP
