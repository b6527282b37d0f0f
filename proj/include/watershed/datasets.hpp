#ifndef WATERSHED_DATASETS_HPP
#define WATERSHED_DATASETS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "watershed/core.hpp"

namespace watershed {

struct SpiralSpec {
    std::size_t n_per_class = 1000;
    double n_rev = 4.0;
    double noise_std = 0.01;
    std::uint64_t rng_seed = 0;
};

// Noise-free spiral point: r = t, phi = 2*pi*n_rev*t + cls*pi.
std::array<double, 2> spiral_point(double t, double n_rev, int cls);

// Two interleaved Archimedean spirals, class 0 rows first. t is uniform on
// [0, 1]; isotropic Gaussian noise is added to every point.
PointSet make_spiral(const SpiralSpec& spec);

struct MoonsSpec {
    std::size_t n_samples = 1000;
    double noise_std = 0.1;
    std::uint64_t rng_seed = 0;
};

// Moon 0: (cos a, sin a). Moon 1: (1 - cos a, 0.5 - sin a). a in [0, pi].
std::array<double, 2> moon_point(double alpha, int cls);

// n_samples / 2 points on moon 0 followed by the rest on moon 1.
PointSet make_moons(const MoonsSpec& spec);

// Comma-separated text with a header row. Every column except
// label_column is a feature; the label column holds integers (-1 for
// unlabelled). Errors name the offending line.
PointSet read_csv(std::istream& in, const std::string& label_column = "label");
PointSet load_csv(const std::filesystem::path& path, const std::string& label_column = "label");

// Header f0,...,f{d-1},label; values with 9 significant digits.
void write_csv(std::ostream& out, const PointSet& points);
void save_csv(const std::filesystem::path& path, const PointSet& points);

// MNIST-style IDX pair: unsigned-byte images (magic 0x00000803) and labels
// (magic 0x00000801). Pixels are scaled to [0, 1].
PointSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
PointSet read_idx(std::istream& images, std::istream& labels);

}  // namespace watershed

#endif  // WATERSHED_DATASETS_HPP
