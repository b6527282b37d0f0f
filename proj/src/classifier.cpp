#include "watershed/classifier.hpp"

#include <limits>
#include <ostream>

#include "watershed/csv.hpp"

namespace watershed {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Frontier state for Prim-style growth: for every point outside the grown
// set, the shortest edge into it and where that edge comes from.
class Frontier {
public:
    explicit Frontier(const Matrix& coords)
        : coords_(coords),
          dim_(static_cast<std::size_t>(coords.cols())),
          best_(static_cast<std::size_t>(coords.rows()), std::numeric_limits<double>::infinity()),
          source_(static_cast<std::size_t>(coords.rows()), kNone) {}

    void add_candidate(std::size_t id) { remaining_.push_back(id); }
    bool empty() const { return remaining_.empty(); }

    // Offer edges from a newly grown point to every remaining candidate.
    void relax_from(std::size_t from) {
        std::span<const double> p(coords_.data() + from * dim_, dim_);
        for (std::size_t q : remaining_) {
            const double d = distance_unchecked(p, {coords_.data() + q * dim_, dim_});
            if (d < best_[q] || (d == best_[q] && from < source_[q])) {
                best_[q] = d;
                source_[q] = from;
            }
        }
    }

    // Removes and returns the candidate with the smallest (weight, id).
    OrderEntry extract_min() {
        std::size_t pos = 0;
        for (std::size_t k = 1; k < remaining_.size(); ++k) {
            const std::size_t a = remaining_[k];
            const std::size_t b = remaining_[pos];
            if (best_[a] < best_[b] || (best_[a] == best_[b] && a < b)) pos = k;
        }
        const std::size_t q = remaining_[pos];
        remaining_[pos] = remaining_.back();
        remaining_.pop_back();
        return OrderEntry{q, source_[q], best_[q]};
    }

private:
    const Matrix& coords_;
    std::size_t dim_;
    std::vector<double> best_;
    std::vector<std::size_t> source_;
    std::vector<std::size_t> remaining_;
};

}  // namespace

double SpanningTree::total_weight() const {
    double total = 0.0;
    for (const Edge& e : edges) total += e.weight;
    return total;
}

PropagationResult propagate(const Matrix& coords, std::span<const ClassLabel> seed_labels,
                            std::size_t num_classes, bool compute_margin) {
    const auto n = static_cast<std::size_t>(coords.rows());
    if (n == 0) throw UsageError("propagate: empty point set");
    if (seed_labels.size() != n) throw UsageError("propagate: label count does not match point count");

    const std::size_t inferred = watershed::num_classes(seed_labels);
    const std::size_t k = num_classes == 0 ? inferred : num_classes;
    if (inferred > k) throw UsageError("propagate: seed label outside 0..K-1");
    if (k == 0) throw PreconditionError("propagate: no seeds");

    PropagationResult result;
    result.labels.assign(seed_labels.begin(), seed_labels.end());
    std::vector<std::size_t> per_class(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const ClassLabel l = seed_labels[i];
        if (l < kUnlabeled) throw UsageError("propagate: invalid label " + std::to_string(l));
        if (l == kUnlabeled) continue;
        ++per_class[static_cast<std::size_t>(l)];
        result.seeds.push_back(Seed{i, l});
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (per_class[c] == 0) {
            throw PreconditionError("propagate: class " + std::to_string(c) + " has no seed");
        }
    }

    Frontier frontier(coords);
    for (std::size_t i = 0; i < n; ++i)
        if (seed_labels[i] == kUnlabeled) frontier.add_candidate(i);
    for (const Seed& s : result.seeds) frontier.relax_from(s.point_id);

    result.order.reserve(n - result.seeds.size());
    while (!frontier.empty()) {
        const OrderEntry step = frontier.extract_min();
        result.labels[step.point_id] = result.labels[step.source_id];
        result.order.push_back(step);
        frontier.relax_from(step.point_id);
    }

    result.margin = compute_margin ? margin(coords, result.labels).value
                                   : std::numeric_limits<double>::quiet_NaN();
    return result;
}

PropagationResult propagate(const PointSet& points, std::size_t num_classes) {
    if (points.labels.size() != points.size())
        throw UsageError("propagate: label count does not match point count");
    return propagate(points.coords, points.labels, num_classes);
}

MarginResult margin(const Matrix& coords, std::span<const ClassLabel> labels) {
    const auto n = static_cast<std::size_t>(coords.rows());
    const auto d = static_cast<std::size_t>(coords.cols());
    if (labels.size() != n) throw UsageError("margin: label count does not match point count");
    for (ClassLabel l : labels)
        if (l < 0) throw UsageError("margin: every point must be labelled");

    MarginResult best;
    const double* base = coords.data();
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> a(base + i * d, d);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (labels[i] == labels[j]) continue;
            const double w = distance_unchecked(a, {base + j * d, d});
            if (w < best.value) best = MarginResult{w, i, j};
        }
    }
    return best;
}

ClassLabel classify_one(std::span<const double> query, const PointSet& reference) {
    const std::size_t n = reference.size();
    if (n == 0) throw UsageError("classify_one: empty reference set");
    if (query.size() != reference.dim()) throw UsageError("classify_one: dimension mismatch");
    if (reference.labels.size() != n) throw UsageError("classify_one: reference labels missing");

    std::size_t best_id = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double s = squared_distance(query, reference.point(i));
        if (s < best) {
            best = s;
            best_id = i;
        }
    }
    const ClassLabel label = reference.labels[best_id];
    if (label < 0) throw UsageError("classify_one: reference point without a label");
    return label;
}

SpanningTree mst(const Matrix& coords) {
    const auto n = static_cast<std::size_t>(coords.rows());
    if (n < 2) throw UsageError("mst: need at least two points");
    Frontier frontier(coords);
    for (std::size_t i = 1; i < n; ++i) frontier.add_candidate(i);
    frontier.relax_from(0);

    SpanningTree tree;
    tree.edges.reserve(n - 1);
    while (!frontier.empty()) {
        const OrderEntry step = frontier.extract_min();
        tree.edges.push_back(Edge{step.source_id, step.point_id, step.weight});
        frontier.relax_from(step.point_id);
    }
    return tree;
}

std::size_t cross_edge_count(const SpanningTree& tree, std::span<const ClassLabel> labels) {
    std::size_t count = 0;
    for (const Edge& e : tree.edges) {
        if (e.i >= labels.size() || e.j >= labels.size())
            throw UsageError("cross_edge_count: labels do not cover the tree");
        if (labels[e.i] != labels[e.j]) ++count;
    }
    return count;
}

void write_order_csv(std::ostream& out, const PropagationResult& result) {
    out << "point_id,source_id,weight,label\n";
    for (const OrderEntry& e : result.order) {
        out << e.point_id << ',' << e.source_id << ',' << format_number(e.weight) << ','
            << result.labels[e.point_id] << '\n';
    }
}

void write_tree_csv(std::ostream& out, const SpanningTree& tree) {
    out << "i,j,weight\n";
    for (const Edge& e : tree.edges) out << e.i << ',' << e.j << ',' << format_number(e.weight) << '\n';
}

}  // namespace watershed
