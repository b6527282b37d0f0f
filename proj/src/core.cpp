#include "watershed/core.hpp"

#include <algorithm>
#include <atomic>
#include <numbers>
#include <thread>

namespace watershed {

PointSet::PointSet(Matrix c, std::vector<ClassLabel> l) : coords(std::move(c)), labels(std::move(l)) {}

PointSet PointSet::unlabeled(Matrix c) {
    std::vector<ClassLabel> labels(static_cast<std::size_t>(c.rows()), kUnlabeled);
    return PointSet(std::move(c), std::move(labels));
}

std::size_t num_classes(std::span<const ClassLabel> labels) {
    ClassLabel top = kUnlabeled;
    for (ClassLabel l : labels) top = std::max(top, l);
    return static_cast<std::size_t>(top + 1);
}

std::size_t PointSet::num_classes() const { return watershed::num_classes(labels); }

PointSet PointSet::subset(std::span<const std::size_t> ids) const {
    std::vector<ClassLabel> sub_labels;
    sub_labels.reserve(ids.size());
    for (std::size_t id : ids) sub_labels.push_back(labels.at(id));
    return PointSet(gather_rows(coords, ids), std::move(sub_labels));
}

void PointSet::validate() const {
    if (labels.size() != size()) {
        throw UsageError("point set has " + std::to_string(size()) + " points but " +
                         std::to_string(labels.size()) + " labels");
    }
    if (!coords.allFinite()) throw UsageError("point set contains non-finite coordinates");
    for (ClassLabel l : labels) {
        if (l < kUnlabeled) throw UsageError("invalid class label " + std::to_string(l));
    }
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), m.cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= static_cast<std::size_t>(m.rows())) throw UsageError("row index out of range");
        out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(ids[r]));
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw UsageError("uniform_index over an empty range");
    if (n == 1) return 0;
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    // Smallest all-ones mask covering n-1; reject draws outside [0, n).
    std::uint64_t mask = bound - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
        const std::uint64_t v = engine_() & mask;
        if (v < bound) return static_cast<std::size_t>(v);
    }
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

std::vector<std::size_t> Rng::sample(std::span<const std::size_t> pool, std::size_t k) {
    if (k > pool.size()) {
        throw UsageError("cannot sample " + std::to_string(k) + " items from " +
                         std::to_string(pool.size()));
    }
    std::vector<std::size_t> work(pool.begin(), pool.end());
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_index(work.size() - i);
        std::swap(work[i], work[j]);
    }
    work.resize(k);
    return work;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;
    return sample(ids, n);
}

double distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw UsageError("distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
    return distance_unchecked(a, b);
}

Matrix pairwise_distances(const Matrix& coords) {
    const auto n = static_cast<std::size_t>(coords.rows());
    const auto d = static_cast<std::size_t>(coords.cols());
    if (n == 0) throw UsageError("pairwise_distances: empty point set");
    Matrix out(coords.rows(), coords.rows());
    const double* base = coords.data();
    parallel_for(0, n, [&](std::size_t i) {
        std::span<const double> a(base + i * d, d);
        for (std::size_t j = i; j < n; ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                distance_unchecked(a, {base + j * d, d});
        }
    });
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) out(i, j) = out(j, i);
    return out;
}

Matrix pairwise_distances(const PointSet& points) { return pairwise_distances(points.coords); }

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
    const unsigned cap = g_max_threads.load();
    if (cap != 0) return cap;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn, std::size_t min_chunk) {
    if (end <= begin) return;
    const std::size_t count = end - begin;
    std::size_t workers = std::min<std::size_t>(max_threads(), count / std::max<std::size_t>(1, min_chunk));
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, w, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace watershed
