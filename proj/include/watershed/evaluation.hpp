#ifndef WATERSHED_EVALUATION_HPP
#define WATERSHED_EVALUATION_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "watershed/core.hpp"
#include "watershed/model.hpp"

namespace watershed {

struct EvalConfig {
    std::size_t n_batches = 256;
    std::size_t batch_size = 2040;
    std::uint64_t rng_seed = 0;
};

// The reference batches used by predict(): batch b holds batch_size distinct
// training ids (sorted), drawn from Rng(rng_seed).split(b). Batches are
// independent of each other.
std::vector<std::vector<std::size_t>> sample_reference_batches(std::size_t n_train, const EvalConfig& config);

/// Majority-vote 1-NN inference.
///
/// Train and queries are embedded; every query is classified by its nearest
/// neighbour in each of the n_batches reference batches and receives the most
/// frequent label (ties to the smaller class). Queries never influence each
/// other.
///
/// exclude, when non-empty, gives per query a training id that must not vote
/// for it (or -1); this is how training points are scored without matching
/// themselves.
std::vector<ClassLabel> predict(const Matrix& queries, const PointSet& train,
                                const LinearEmbedding& embedding, const EvalConfig& config,
                                std::span<const long> exclude = {});

// Same protocol on points that are already embedded.
std::vector<ClassLabel> predict_embedded(const Matrix& queries, const Matrix& train,
                                         std::span<const ClassLabel> train_labels, std::size_t num_classes,
                                         const EvalConfig& config, std::span<const long> exclude = {});

std::vector<ClassLabel> predict_linear(const LinearHead& head, const Matrix& embedded);

double accuracy(std::span<const ClassLabel> predictions, std::span<const ClassLabel> truth);

// Model-level inference on raw features: softmax head for the linear
// baseline, majority vote in the embedding otherwise.
std::vector<ClassLabel> predict_model(const Model& model, const Matrix& queries, const PointSet& train,
                                      const EvalConfig& config);

// Accuracy of the model on its own training points. For neighbour-based
// models every point is excluded from the batches that vote on it.
double training_accuracy(const Model& model, const PointSet& train, const EvalConfig& config);

struct GridSpec {
    double x_min = -1.0;
    double x_max = 1.0;
    double y_min = -1.0;
    double y_max = 1.0;
    std::size_t nx = 100;
    std::size_t ny = 100;
};

struct GridCell {
    double x = 0.0;
    double y = 0.0;
    ClassLabel label = 0;
};

// Row-major grid (y outer, x inner). Each cell is an independent query
// against the training batches; cells are never propagated jointly.
std::vector<GridCell> export_boundary_grid(const PointSet& train, const Model& model, const GridSpec& grid,
                                           const EvalConfig& config);

void write_grid_csv(std::ostream& out, std::span<const GridCell> cells);
void write_predictions_csv(std::ostream& out, std::span<const ClassLabel> predicted,
                           std::span<const ClassLabel> truth);

}  // namespace watershed

#endif  // WATERSHED_EVALUATION_HPP
