#include "watershed/datasets.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

#include "watershed/csv.hpp"

namespace watershed {

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("idx: truncated header in ") + what);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

std::array<double, 2> spiral_point(double t, double n_rev, int cls) {
    const double phi = 2.0 * std::numbers::pi * n_rev * t + cls * std::numbers::pi;
    return {t * std::cos(phi), t * std::sin(phi)};
}

PointSet make_spiral(const SpiralSpec& spec) {
    if (spec.n_per_class == 0) throw UsageError("spiral: n_per_class must be positive");
    if (!(spec.n_rev > 0.0) || !std::isfinite(spec.n_rev)) throw UsageError("spiral: n_rev must be positive");
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) throw UsageError("spiral: noise must be >= 0");

    const std::size_t n = 2 * spec.n_per_class;
    Matrix coords(static_cast<Eigen::Index>(n), 2);
    std::vector<ClassLabel> labels(n);
    Rng rng(spec.rng_seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = i < spec.n_per_class ? 0 : 1;
        const auto p = spiral_point(rng.uniform(), spec.n_rev, cls);
        const auto r = static_cast<Eigen::Index>(i);
        coords(r, 0) = p[0] + spec.noise_std * rng.normal();
        coords(r, 1) = p[1] + spec.noise_std * rng.normal();
        labels[i] = cls;
    }
    return PointSet(std::move(coords), std::move(labels));
}

std::array<double, 2> moon_point(double alpha, int cls) {
    if (cls == 0) return {std::cos(alpha), std::sin(alpha)};
    return {1.0 - std::cos(alpha), 0.5 - std::sin(alpha)};
}

PointSet make_moons(const MoonsSpec& spec) {
    if (spec.n_samples < 2) throw UsageError("moons: need at least two samples");
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) throw UsageError("moons: noise must be >= 0");

    const std::size_t n = spec.n_samples;
    const std::size_t n0 = n / 2;
    Matrix coords(static_cast<Eigen::Index>(n), 2);
    std::vector<ClassLabel> labels(n);
    Rng rng(spec.rng_seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = i < n0 ? 0 : 1;
        const auto p = moon_point(std::numbers::pi * rng.uniform(), cls);
        const auto r = static_cast<Eigen::Index>(i);
        coords(r, 0) = p[0] + spec.noise_std * rng.normal();
        coords(r, 1) = p[1] + spec.noise_std * rng.normal();
        labels[i] = cls;
    }
    return PointSet(std::move(coords), std::move(labels));
}

PointSet read_csv(std::istream& in, const std::string& label_column) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) header = split_csv_line(line);
    }
    if (header.empty()) throw FormatError("csv: missing header row");

    std::size_t label_col = header.size();
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == label_column) label_col = c;
    const bool has_labels = label_col < header.size();
    const std::size_t d = header.size() - (has_labels ? 1 : 0);
    if (d == 0) throw FormatError("csv: no feature columns");

    std::vector<double> values;
    std::vector<ClassLabel> labels;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw FormatError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                              " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (c == label_col) {
                long long v = 0;
                if (!parse_int(fields[c], v) || v < kUnlabeled || v > 1'000'000) {
                    throw FormatError("csv line " + std::to_string(line_no) + ": bad label '" + fields[c] + "'");
                }
                labels.push_back(static_cast<ClassLabel>(v));
            } else {
                double v = 0.0;
                if (!parse_double(fields[c], v)) {
                    throw FormatError("csv line " + std::to_string(line_no) + ": non-numeric value '" + fields[c] +
                                      "' in column " + header[c]);
                }
                values.push_back(v);
            }
        }
        ++rows;
    }
    Matrix coords(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    std::copy(values.begin(), values.end(), coords.data());
    if (!has_labels) return PointSet::unlabeled(std::move(coords));
    return PointSet(std::move(coords), std::move(labels));
}

PointSet load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_csv(in, label_column);
}

void write_csv(std::ostream& out, const PointSet& points) {
    const std::size_t d = points.dim();
    for (std::size_t c = 0; c < d; ++c) out << 'f' << c << ',';
    out << "label\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (double v : points.point(i)) out << format_number(v) << ',';
        out << (points.labels.empty() ? kUnlabeled : points.labels[i]) << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const PointSet& points) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_csv(out, points);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

PointSet read_idx(std::istream& images, std::istream& labels) {
    if (read_be32(images, "images") != 0x00000803) throw FormatError("idx: bad image magic (expected 0x00000803)");
    if (read_be32(labels, "labels") != 0x00000801) throw FormatError("idx: bad label magic (expected 0x00000801)");
    const std::size_t n = read_be32(images, "images");
    const std::size_t rows = read_be32(images, "images");
    const std::size_t cols = read_be32(images, "images");
    const std::size_t n_labels = read_be32(labels, "labels");
    if (n != n_labels) {
        throw FormatError("idx: " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
    }
    const std::size_t d = rows * cols;
    if (d == 0) throw FormatError("idx: empty image dimensions");

    std::vector<unsigned char> pixels(n * d);
    if (!images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
        throw FormatError("idx: truncated image payload");
    std::vector<unsigned char> raw_labels(n);
    if (!labels.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n)))
        throw FormatError("idx: truncated label payload");

    Matrix coords(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    double* out = coords.data();
    for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = pixels[i] / 255.0;
    return PointSet(std::move(coords), std::vector<ClassLabel>(raw_labels.begin(), raw_labels.end()));
}

PointSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    std::ifstream img(images, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open " + images.string());
    std::ifstream lab(labels, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open " + labels.string());
    return read_idx(img, lab);
}

}  // namespace watershed
