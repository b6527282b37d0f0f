// Independent reference implementations used to check the library. They
// favour obviousness over speed and share no code with src/ beyond the
// basic types.
#ifndef WATERSHED_TESTS_ORACLES_HPP
#define WATERSHED_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "watershed/core.hpp"
#include "watershed/losses.hpp"

namespace oracle {

using watershed::ClassLabel;
using watershed::Matrix;

inline double dist(const Matrix& x, long i, long j) {
    return std::sqrt((x.row(i) - x.row(j)).squaredNorm() + 1e-12);
}

// Eq. 1 by double loop: minimum distance over differently labelled pairs.
inline double margin(const Matrix& x, const std::vector<ClassLabel>& labels) {
    double best = std::numeric_limits<double>::infinity();
    for (long i = 0; i < x.rows(); ++i)
        for (long j = 0; j < x.rows(); ++j)
            if (labels[i] != labels[j]) best = std::min(best, dist(x, i, j));
    return best;
}

struct BestLabelling {
    double margin = -1.0;
    std::vector<ClassLabel> labels;
    std::size_t count_at_max = 0;
};

// Exhaustive search over every completion of the seed labels (-1 = free)
// with k classes, maximising the margin.
inline BestLabelling max_margin_labelling(const Matrix& x, const std::vector<ClassLabel>& seeds, int k) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < seeds.size(); ++i)
        if (seeds[i] < 0) free.push_back(i);
    BestLabelling best;
    std::vector<ClassLabel> labels = seeds;
    std::size_t total = 1;
    for (std::size_t f = 0; f < free.size(); ++f) total *= static_cast<std::size_t>(k);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t f : free) {
            labels[f] = static_cast<ClassLabel>(c % static_cast<std::size_t>(k));
            c /= static_cast<std::size_t>(k);
        }
        const double m = margin(x, labels);
        if (m > best.margin) {
            best.margin = m;
            best.labels = labels;
            best.count_at_max = 1;
        } else if (m == best.margin) {
            ++best.count_at_max;
        }
    }
    return best;
}

// Kruskal with union-find over all pairs.
inline double mst_weight(const Matrix& x) {
    const long n = x.rows();
    struct E {
        double w;
        long i, j;
    };
    std::vector<E> edges;
    for (long i = 0; i < n; ++i)
        for (long j = i + 1; j < n; ++j) edges.push_back({dist(x, i, j), i, j});
    std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) { return a.w < b.w; });
    std::vector<long> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0L);
    std::function<long(long)> find = [&](long v) { return parent[v] == v ? v : parent[v] = find(parent[v]); };
    double total = 0.0;
    for (const E& e : edges) {
        const long a = find(e.i), b = find(e.j);
        if (a != b) {
            parent[a] = b;
            total += e.w;
        }
    }
    return total;
}

// Central differences of f at x, h = 1e-5.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-5) {
    Matrix g(x.rows(), x.cols());
    for (long r = 0; r < x.rows(); ++r) {
        for (long c = 0; c < x.cols(); ++c) {
            const double keep = x(r, c);
            x(r, c) = keep + h;
            const double up = f(x);
            x(r, c) = keep - h;
            const double down = f(x);
            x(r, c) = keep;
            g(r, c) = (up - down) / (2.0 * h);
        }
    }
    return g;
}

// |a - b| / max(|a|, |b|, floor), taken as a whole-matrix norm.
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

inline Matrix random_matrix(watershed::Rng& rng, long rows, long cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    return m;
}

// True when all pairwise distances differ by more than tol.
inline bool distinct_distances(const Matrix& x, double tol = 1e-9) {
    std::vector<double> d;
    for (long i = 0; i < x.rows(); ++i)
        for (long j = i + 1; j < x.rows(); ++j) d.push_back(dist(x, i, j));
    std::sort(d.begin(), d.end());
    for (std::size_t i = 1; i < d.size(); ++i)
        if (d[i] - d[i - 1] <= tol) return false;
    return true;
}

// Watershed loss with the neighbour table held fixed.
inline double frozen_watershed(const Matrix& z, const watershed::LossReport& r) {
    const long n = z.rows();
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
        if (r.capped[i]) {
            sum += watershed::kLossCap;
            continue;
        }
        double total = 0.0;
        double own = 0.0;
        for (long c = 0; c < r.neighbor_ids.cols(); ++c) {
            const long j = r.neighbor_ids(i, c);
            if (j < 0) continue;
            const double e = std::exp(-dist(z, i, j));
            total += e;
            if (c == r.true_labels[i]) own = e;
        }
        sum += -std::log(own / total);
    }
    return sum / static_cast<double>(n);
}

inline double nca_loss(const Matrix& z, const std::vector<ClassLabel>& y) {
    const long n = z.rows();
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
        double all = 0.0, same = 0.0;
        for (long j = 0; j < n; ++j) {
            if (j == i) continue;
            const double e = std::exp(-(z.row(i) - z.row(j)).squaredNorm());
            all += e;
            if (y[j] == y[i]) same += e;
        }
        sum += -std::log(same / all);
    }
    return sum / static_cast<double>(n);
}

inline double softmax_loss(const Matrix& z, const Matrix& w, const watershed::RowVector& b, const std::vector<ClassLabel>& y) {
    double sum = 0.0;
    for (long i = 0; i < z.rows(); ++i) {
        const watershed::RowVector logits = z.row(i) * w + b;
        double total = 0.0;
        for (long c = 0; c < logits.size(); ++c) total += std::exp(logits(c));
        sum += -(logits(y[i]) - std::log(total));
    }
    return sum / static_cast<double>(z.rows());
}

}  // namespace oracle

#endif  // WATERSHED_TESTS_ORACLES_HPP
