#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "watershed/classifier.hpp"
#include "watershed/losses.hpp"

using namespace watershed;

namespace {

// Greedy labelling by brute-force replay: at each step scan all
// (labelled, unlabelled) pairs for the shortest edge.
std::vector<ClassLabel> greedy_labels(const Matrix& z, std::vector<ClassLabel> labels) {
    const long n = z.rows();
    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        long bi = -1, bj = -1;
        for (long j = 0; j < n; ++j) {
            if (labels[j] >= 0) continue;
            for (long i = 0; i < n; ++i) {
                if (labels[i] < 0) continue;
                const double d = oracle::dist(z, i, j);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bj < 0) return labels;
        labels[bj] = labels[bi];
    }
}

struct OracleLoss {
    double loss = 0.0;
    Matrix probs;
    std::vector<std::vector<long>> nn;
};

OracleLoss watershed_oracle(const Matrix& z, const std::vector<ClassLabel>& y, const std::vector<Seed>& seeds,
                            int k) {
    const long n = z.rows();
    std::vector<ClassLabel> seeded(static_cast<std::size_t>(n), kUnlabeled);
    for (const auto& s : seeds) seeded[s.point_id] = s.label;
    const auto prop = greedy_labels(z, seeded);
    OracleLoss out;
    out.probs = Matrix::Zero(n, k);
    out.nn.assign(static_cast<std::size_t>(n), std::vector<long>(static_cast<std::size_t>(k), -1));
    for (long i = 0; i < n; ++i) {
        std::vector<double> d(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
        for (long j = 0; j < n; ++j) {
            if (j == i || prop[j] != y[j]) continue;
            const double dij = oracle::dist(z, i, j);
            if (dij < d[y[j]]) {
                d[y[j]] = dij;
                out.nn[i][y[j]] = j;
            }
        }
        double total = 0.0;
        for (int c = 0; c < k; ++c)
            if (std::isfinite(d[c])) total += std::exp(-d[c]);
        for (int c = 0; c < k; ++c)
            if (std::isfinite(d[c])) out.probs(i, c) = std::exp(-d[c]) / total;
        // A row with no same-class neighbour keeps its softmax over the
        // other classes but pays the cap.
        out.loss += std::isfinite(d[y[i]]) ? -std::log(out.probs(i, y[i])) : kLossCap;
    }
    out.loss /= static_cast<double>(n);
    return out;
}

std::vector<ClassLabel> random_labels(Rng& rng, std::size_t n, int k) {
    std::vector<ClassLabel> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<ClassLabel>(i < static_cast<std::size_t>(3 * k) ? i % k : rng.uniform_index(k));
    return y;
}

}  // namespace

TEST_CASE("watershed loss: hand-worked example") {
    // 1-D points 0, 1, 3, 4 with true labels 0, 0, 1, 0 and seeds at 0 and 3.
    // Point 4 is propagated from 3 and ends up wrong, so X_correct = {0, 1, 3}
    // and point 3 has no correct class-1 neighbour other than itself.
    Matrix z(4, 1);
    z << 0, 1, 3, 4;
    const std::vector<ClassLabel> y{0, 0, 1, 0};
    const std::vector<Seed> seeds{{0, 0}, {2, 1}};
    const auto r = watershed_loss_with_seeds(z, y, seeds);

    CHECK(r.propagated == std::vector<ClassLabel>{0, 0, 1, 1});
    CHECK(r.correct_mask == std::vector<bool>{true, true, true, false});
    CHECK(r.capped == std::vector<bool>{false, false, true, false});
    CHECK(r.neighbor_ids(0, 0) == 1);
    CHECK(r.neighbor_ids(0, 1) == 2);
    CHECK(r.neighbor_ids(2, 1) == -1);
    CHECK(r.neighbor_ids(3, 0) == 1);

    const double expected =
        (std::log1p(std::exp(-2.0)) + std::log1p(std::exp(-1.0)) + kLossCap + std::log1p(std::exp(2.0))) / 4.0;
    CHECK(r.loss == doctest::Approx(expected).epsilon(1e-9));
    CHECK(r.probs(1, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-9));
    // Capped rows receive no gradient of their own.
    CHECK(r.grad_embed.allFinite());
}

TEST_CASE("watershed loss: matches the brute-force oracle") {
    Rng rng(31);
    for (int t = 0; t < 25; ++t) {
        const int k = 2 + t % 3;
        const std::size_t n = 12 + static_cast<std::size_t>(t);
        const Matrix z = oracle::random_matrix(rng, static_cast<long>(n), 2);
        const auto y = random_labels(rng, n, k);
        const std::size_t n_seeds = 1;
        Rng seed_rng(static_cast<std::uint64_t>(t));
        const auto r = watershed_loss_forward(z, y, n_seeds, seed_rng, static_cast<std::size_t>(k));
        const auto o = watershed_oracle(z, y, r.seeds_used, k);

        CHECK(r.loss == doctest::Approx(o.loss).epsilon(1e-12));
        CHECK((r.probs - o.probs).cwiseAbs().maxCoeff() < 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            for (int c = 0; c < k; ++c) CHECK(r.neighbor_ids(static_cast<long>(i), c) == o.nn[i][c]);
            if (r.probs.row(static_cast<long>(i)).any()) CHECK(r.probs.row(static_cast<long>(i)).sum() == doctest::Approx(1.0).epsilon(1e-9));
        }
        for (const auto& s : r.seeds_used) CHECK(r.correct_mask[s.point_id]);
        std::vector<std::size_t> per_class(static_cast<std::size_t>(k), 0);
        for (const auto& s : r.seeds_used) ++per_class[static_cast<std::size_t>(s.label)];
        for (auto c : per_class) CHECK(c == n_seeds);
    }
}

TEST_CASE("watershed loss: analytic gradient matches finite differences") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const int k = 2 + t % 2;
        const Matrix z = oracle::random_matrix(rng, 15, 3);
        const auto y = random_labels(rng, 15, k);
        Rng seed_rng(100 + static_cast<std::uint64_t>(t));
        const auto r = watershed_loss_forward(z, y, 2, seed_rng, static_cast<std::size_t>(k));
        CHECK(oracle::frozen_watershed(z, r) == doctest::Approx(r.loss).epsilon(1e-12));
        const Matrix numeric = oracle::numeric_gradient([&](const Matrix& m) { return oracle::frozen_watershed(m, r); }, z);
        CHECK(oracle::relative_error(r.grad_embed, numeric) <= 1e-4);
        CHECK(watershed_loss_backward(r, z) == r.grad_embed);
    }
}

TEST_CASE("watershed loss: preconditions") {
    Matrix z(4, 1);
    z << 0, 1, 2, 3;
    Rng rng(1);
    CHECK_THROWS_AS(watershed_loss_forward(z, std::vector<ClassLabel>{0, 0, 0, 1}, 1, rng), PreconditionError);
    CHECK_THROWS_AS(watershed_loss_forward(z, std::vector<ClassLabel>{0, 0, 1, kUnlabeled}, 1, rng), UsageError);
    CHECK_THROWS_AS(watershed_loss_forward(z, std::vector<ClassLabel>{0, 0, 1, 1}, 0, rng), UsageError);
    CHECK_NOTHROW(watershed_loss_forward(z, std::vector<ClassLabel>{0, 0, 1, 1}, 1, rng));
}

TEST_CASE("watershed loss: same seed stream, same report") {
    Rng data(3);
    const Matrix z = oracle::random_matrix(data, 40, 2);
    const auto y = random_labels(data, 40, 3);
    Rng a(8), b(8);
    const auto ra = watershed_loss_forward(z, y, 2, a);
    const auto rb = watershed_loss_forward(z, y, 2, b);
    CHECK(ra.loss == rb.loss);
    CHECK(ra.grad_embed == rb.grad_embed);
    CHECK(ra.seeds_used == rb.seeds_used);
}

TEST_CASE("watershed loss csv") {
    Matrix z(4, 1);
    z << 0, 1, 3, 4;
    const auto r = watershed_loss_with_seeds(z, std::vector<ClassLabel>{0, 0, 1, 0},
                                             std::vector<Seed>{{0, 0}, {2, 1}});
    std::ostringstream out;
    write_loss_csv(out, r);
    const std::string s = out.str();
    CHECK(s.rfind("id,true_label,propagated,correct,p_true\n", 0) == 0);
    CHECK(s.find("\n3,0,1,0,") != std::string::npos);
}

TEST_CASE("nca loss: forward and gradient") {
    Rng rng(17);
    for (int t = 0; t < 20; ++t) {
        const Matrix z = oracle::random_matrix(rng, 14, 2);
        const auto y = random_labels(rng, 14, 2 + t % 3);
        const auto r = nca_loss(z, y);
        CHECK(r.loss == doctest::Approx(oracle::nca_loss(z, y)).epsilon(1e-10));
        const Matrix numeric = oracle::numeric_gradient([&](const Matrix& m) { return oracle::nca_loss(m, y); }, z);
        CHECK(oracle::relative_error(r.grad_embed, numeric) <= 1e-4);
        for (double p : r.p_correct) CHECK((p > 0.0 && p <= 1.0));
    }
}

TEST_CASE("nca loss: far-apart points stay finite") {
    Matrix z(4, 1);
    z << 0, 100, 200, 300;
    const auto r = nca_loss(z, std::vector<ClassLabel>{0, 1, 0, 1});
    CHECK(std::isfinite(r.loss));
    CHECK(r.grad_embed.allFinite());
    const auto single = nca_loss(z, std::vector<ClassLabel>{0, 1, 1, 1});
    CHECK(single.capped[0]);
}

TEST_CASE("linear softmax: forward and gradients") {
    Rng rng(23);
    for (int t = 0; t < 20; ++t) {
        const int k = 2 + t % 4;
        const Matrix z = oracle::random_matrix(rng, 10, 3);
        const auto y = random_labels(rng, 10, k);
        LinearHead head{oracle::random_matrix(rng, 3, k), oracle::random_matrix(rng, 1, k).row(0)};
        const auto r = linear_softmax_loss(z, head, y);
        CHECK(r.loss == doctest::Approx(oracle::softmax_loss(z, head.weights, head.bias, y)).epsilon(1e-10));

        const Matrix gz = oracle::numeric_gradient(
            [&](const Matrix& m) { return oracle::softmax_loss(m, head.weights, head.bias, y); }, z);
        const Matrix gw = oracle::numeric_gradient(
            [&](const Matrix& m) { return oracle::softmax_loss(z, m, head.bias, y); }, head.weights);
        const Matrix gb = oracle::numeric_gradient(
            [&](const Matrix& m) { return oracle::softmax_loss(z, head.weights, m.row(0), y); }, Matrix(head.bias));
        CHECK(oracle::relative_error(r.grad_embed, gz) <= 1e-4);
        CHECK(oracle::relative_error(r.grad_weights, gw) <= 1e-4);
        CHECK(oracle::relative_error(Matrix(r.grad_bias), gb) <= 1e-4);
    }
}
