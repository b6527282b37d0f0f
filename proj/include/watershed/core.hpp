#ifndef WATERSHED_CORE_HPP
#define WATERSHED_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace watershed {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

// Class labels are signed; -1 marks a point with no label yet.
using ClassLabel = std::int32_t;
inline constexpr ClassLabel kUnlabeled = -1;

// Added under the square root of every Euclidean distance so that the
// distance derivative stays bounded at coincident points.
inline constexpr double kDistanceEpsilon = 1e-12;

// Bad arguments, shape mismatches, impossible configurations.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A domain precondition does not hold (e.g. a class without seeds).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure during optimisation.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Seed {
    std::size_t point_id = 0;
    ClassLabel label = 0;

    friend bool operator==(const Seed&, const Seed&) = default;
};

// n points in d dimensions. Point ids are the row indices 0..n-1.
struct PointSet {
    Matrix coords;
    std::vector<ClassLabel> labels;

    PointSet() = default;
    PointSet(Matrix c, std::vector<ClassLabel> l);

    static PointSet unlabeled(Matrix c);

    std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(coords.cols()); }

    std::span<const double> point(std::size_t i) const {
        return {coords.data() + i * dim(), dim()};
    }

    // max label + 1 (0 when nothing is labelled).
    std::size_t num_classes() const;

    PointSet subset(std::span<const std::size_t> ids) const;

    // Throws UsageError on non-finite coordinates, label count mismatch or
    // labels below -1.
    void validate() const;
};

std::size_t num_classes(std::span<const ClassLabel> labels);

// Row gather.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> ids);

/// Deterministic random source shared by every module.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than taken from
/// <random> because the standard library distributions are
/// implementation-defined:
///   - uniform_index: rejection sampling on the top bits (unbiased),
///   - uniform: 53 random bits scaled to [0, 1),
///   - normal: Box-Muller on two uniforms, no cached second value.
/// Substreams are derived from the construction seed and a stream id through
/// SplitMix64, so a substream does not depend on how much of the parent has
/// been consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    std::size_t uniform_index(std::size_t n);
    double uniform();
    double normal();

    Rng split(std::uint64_t stream) const;

    // k distinct elements of pool, uniformly, in draw order.
    std::vector<std::size_t> sample(std::span<const std::size_t> pool, std::size_t k);
    // Random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

// Smoothed Euclidean distance sqrt(|a-b|^2 + eps). Unchecked; the callers
// below guarantee equal sizes.
inline double distance_unchecked(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b) + kDistanceEpsilon);
}

double distance(std::span<const double> a, std::span<const double> b);

// n x n matrix of distance() over all row pairs. Each unordered pair is
// computed once, so the result is exactly symmetric.
Matrix pairwise_distances(const Matrix& coords);
Matrix pairwise_distances(const PointSet& points);

// Worker cap used by parallel_for. 0 restores the default (hardware cores).
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs fn(i) for i in [begin, end) on up to max_threads() threads in
// contiguous chunks. fn must only write state owned by index i.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn,
                  std::size_t min_chunk = 1);

}  // namespace watershed

#endif  // WATERSHED_CORE_HPP
