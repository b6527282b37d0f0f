#include <doctest.h>

#include <sstream>

#include "watershed/classifier.hpp"
#include "watershed/datasets.hpp"

using namespace watershed;

namespace {

std::string be32(std::uint32_t v) {
    return {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8), static_cast<char>(v)};
}

}  // namespace

TEST_CASE("spiral generator") {
    const auto origin0 = spiral_point(0.0, 3.0, 0);
    const auto origin1 = spiral_point(0.0, 3.0, 1);
    CHECK(origin0[0] == 0.0);
    CHECK(origin0[1] == 0.0);
    CHECK(std::abs(origin1[0]) == 0.0);
    CHECK(std::abs(origin1[1]) == 0.0);

    const auto half = spiral_point(0.5, 1.0, 0);
    CHECK(std::abs(half[0] + 0.5) < 1e-9);
    CHECK(std::abs(half[1]) < 1e-9);

    const PointSet s = make_spiral({1000, 4.0, 0.01, 7});
    REQUIRE(s.size() == 2000);
    CHECK(s.dim() == 2);
    CHECK(std::count(s.labels.begin(), s.labels.end(), 0) == 1000);
    CHECK(std::count(s.labels.begin(), s.labels.end(), 1) == 1000);
    CHECK(s.coords.allFinite());

    const PointSet again = make_spiral({1000, 4.0, 0.01, 7});
    CHECK(again.coords == s.coords);
    CHECK(make_spiral({1000, 4.0, 0.01, 8}).coords != s.coords);

    // Noise-free points lie on their arm: radius t, angle 2 pi n_rev t + c pi.
    const PointSet clean = make_spiral({50, 2.0, 0.0, 1});
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double r = clean.coords.row(i).norm();
        const auto p = spiral_point(r, 2.0, clean.labels[i]);
        CHECK(std::abs(p[0] - clean.coords(i, 0)) < 1e-9);
        CHECK(std::abs(p[1] - clean.coords(i, 1)) < 1e-9);
    }
    CHECK_THROWS_AS(make_spiral({0, 1.0, 0.0, 0}), UsageError);
}

TEST_CASE("noise-free spirals keep a positive margin") {
    for (double n_rev : {1.0, 4.0, 10.0}) {
        const PointSet s = make_spiral({1000, n_rev, 0.0, 3});
        CHECK(margin(s.coords, s.labels).value > 0.0);
    }
}

TEST_CASE("moons generator") {
    const auto a = moon_point(0.0, 0);
    CHECK(a[0] == doctest::Approx(1.0));
    CHECK(a[1] == doctest::Approx(0.0));
    const auto b = moon_point(0.0, 1);
    CHECK(b[0] == doctest::Approx(0.0));
    CHECK(b[1] == doctest::Approx(0.5));

    const PointSet m = make_moons({1000, 0.1, 0});
    CHECK(m.size() == 1000);
    CHECK(std::count(m.labels.begin(), m.labels.end(), 0) == 500);
    CHECK(make_moons({7, 0.1, 0}).labels == std::vector<ClassLabel>{0, 0, 0, 1, 1, 1, 1});

    const PointSet clean = make_moons({200, 0.0, 2});
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double cx = clean.labels[i] == 0 ? 0.0 : 1.0;
        const double cy = clean.labels[i] == 0 ? 0.0 : 0.5;
        CHECK(std::hypot(clean.coords(i, 0) - cx, clean.coords(i, 1) - cy) == doctest::Approx(1.0));
        if (clean.labels[i] == 0) CHECK(clean.coords(i, 1) >= 0.0);
        else CHECK(clean.coords(i, 1) <= 0.5);
    }
}

TEST_CASE("csv reading") {
    std::istringstream in("f0,f1,label\n1,2,0\n3.5,-4,1\n\n5e-1,6,-1\n");
    const PointSet p = read_csv(in);
    REQUIRE(p.size() == 3);
    CHECK(p.coords(1, 0) == 3.5);
    CHECK(p.coords(2, 0) == 0.5);
    CHECK(p.labels == std::vector<ClassLabel>{0, 1, kUnlabeled});

    std::istringstream custom("cls,a\n2,1.5\n");
    const PointSet q = read_csv(custom, "cls");
    CHECK(q.dim() == 1);
    CHECK(q.labels[0] == 2);

    std::istringstream nolabel("a,b\n1,2\n");
    CHECK(read_csv(nolabel).labels == std::vector<ClassLabel>{kUnlabeled});
}

TEST_CASE("csv errors name the line") {
    auto message = [](const std::string& text) {
        std::istringstream in(text);
        try {
            read_csv(in);
        } catch (const FormatError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("f0,label\n1,0\nabc,1\n").find("line 3") != std::string::npos);
    CHECK(message("f0,label\n1,0\n2\n").find("line 3") != std::string::npos);
    CHECK(message("f0,label\n1,0.5\n").find("line 2") != std::string::npos);
    CHECK(message("f0,label\nnan,0\n").find("line 2") != std::string::npos);
    CHECK(!message("").empty());
}

TEST_CASE("csv round trip") {
    const PointSet s = make_spiral({40, 2.0, 0.05, 4});
    std::ostringstream first;
    write_csv(first, s);
    CHECK(first.str().rfind("f0,f1,label\n", 0) == 0);
    std::istringstream in(first.str());
    const PointSet back = read_csv(in);
    CHECK(back.labels == s.labels);
    CHECK((back.coords - s.coords).cwiseAbs().maxCoeff() <= 1e-8 * s.coords.cwiseAbs().maxCoeff());
    std::ostringstream second;
    write_csv(second, back);
    CHECK(second.str() == first.str());
}

TEST_CASE("idx reading") {
    const std::string images = be32(0x803) + be32(1) + be32(2) + be32(2) + std::string("\x00\x80\xff\x00", 4);
    const std::string labels = be32(0x801) + be32(1) + std::string("\x07", 1);
    {
        std::istringstream img(images), lab(labels);
        const PointSet p = read_idx(img, lab);
        REQUIRE(p.size() == 1);
        REQUIRE(p.dim() == 4);
        CHECK(p.coords(0, 0) == 0.0);
        CHECK(p.coords(0, 1) == 128.0 / 255.0);
        CHECK(p.coords(0, 2) == 1.0);
        CHECK(p.coords(0, 3) == 0.0);
        CHECK(p.labels[0] == 7);
    }
    {
        std::istringstream img(images), lab(be32(0x801) + be32(2) + std::string("\x01\x02", 2));
        CHECK_THROWS_AS(read_idx(img, lab), FormatError);
    }
    {
        std::istringstream img(be32(0x802) + images.substr(4)), lab(labels);
        CHECK_THROWS_AS(read_idx(img, lab), FormatError);
    }
    {
        std::istringstream img(images.substr(0, images.size() - 1)), lab(labels);
        CHECK_THROWS_AS(read_idx(img, lab), FormatError);
    }
    {
        std::istringstream img(images), lab(be32(0x801) + be32(1));
        CHECK_THROWS_AS(read_idx(img, lab), FormatError);
    }
}
