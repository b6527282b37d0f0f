#ifndef WATERSHED_CLASSIFIER_HPP
#define WATERSHED_CLASSIFIER_HPP

#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "watershed/core.hpp"

namespace watershed {

// One greedy step: point_id received the label of source_id across an edge
// of length weight.
struct OrderEntry {
    std::size_t point_id = 0;
    std::size_t source_id = 0;
    double weight = 0.0;
};

struct PropagationResult {
    std::vector<ClassLabel> labels;
    std::vector<OrderEntry> order;
    double margin = std::numeric_limits<double>::infinity();
    std::vector<Seed> seeds;
};

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0.0;
};

struct SpanningTree {
    std::vector<Edge> edges;

    double total_weight() const;
};

// Minimum distance between differently labelled points, and the pair that
// realises it. value is +infinity (and single_class() true) when fewer than
// two distinct labels are present.
struct MarginResult {
    double value = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    std::size_t j = 0;

    bool single_class() const { return value == std::numeric_limits<double>::infinity(); }
};

/// Greedy 1-NN label propagation (the watershed classifier).
///
/// Points carrying a label in seed_labels are seeds; kUnlabeled points are
/// labelled one at a time, always picking the unlabelled point with the
/// smallest distance to the labelled set. This is Prim's algorithm grown from
/// all seeds at once, and the resulting labelling maximises the minimum
/// distance between differently labelled points among all labellings that
/// agree with the seeds.
///
/// Ties are broken by (distance, candidate id, source id), so the output is a
/// pure function of the input. O(n^2) time, O(n) extra memory.
///
/// num_classes = 0 infers K as max seed label + 1. Throws PreconditionError
/// when a class in 0..K-1 has no seed, UsageError on empty input.
/// With compute_margin = false the O(n^2) margin pass is skipped and margin
/// is left NaN.
PropagationResult propagate(const Matrix& coords, std::span<const ClassLabel> seed_labels,
                            std::size_t num_classes = 0, bool compute_margin = true);
PropagationResult propagate(const PointSet& points, std::size_t num_classes = 0);

MarginResult margin(const Matrix& coords, std::span<const ClassLabel> labels);

// Label of the nearest reference point; ties go to the smaller id.
ClassLabel classify_one(std::span<const double> query, const PointSet& reference);

// Exact Euclidean minimum spanning tree (Prim from vertex 0, same
// tie-breaking as propagate). Edges are (attached-to, newly added, weight).
SpanningTree mst(const Matrix& coords);

std::size_t cross_edge_count(const SpanningTree& tree, std::span<const ClassLabel> labels);

// CSV: point_id,source_id,weight,label
void write_order_csv(std::ostream& out, const PropagationResult& result);
// CSV: i,j,weight
void write_tree_csv(std::ostream& out, const SpanningTree& tree);

/// Outcome of a shattering search. points holds the targets (rows 0..k-1)
/// followed by any auxiliary seed points; seed_labels is the matching seed
/// labelling that reproduces the requested configuration.
struct ShatterResult {
    bool found = false;
    Matrix points;
    std::vector<ClassLabel> seed_labels;
    std::vector<Seed> seeds;
};

/// Searches for a seed placement with at most n_seeds seeds per class under
/// which propagate() labels the k targets as config (binary labels 0/1).
///
/// Placements are drawn from a finite pool, tried in order:
///   1. subsets of the targets, with a far-away auxiliary seed (more than
///      twice the target diameter from every target) for a class left
///      without seeds;
///   2. as 1, but each class may also use "bridge" points on the segment
///      between two of its own targets, split in proportion to each
///      endpoint's distance to the nearest target of the other class.
/// found == false means no witness exists in this pool, not that the
/// configuration is unreachable.
ShatterResult shatter_check(const Matrix& targets, std::size_t n_seeds,
                            std::span<const ClassLabel> config);

}  // namespace watershed

#endif  // WATERSHED_CLASSIFIER_HPP
