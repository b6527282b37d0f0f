#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "watershed/model.hpp"

using namespace watershed;

TEST_CASE("loss kind names") {
    for (LossKind k : {LossKind::watershed, LossKind::nca, LossKind::linear})
        CHECK(parse_loss_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_loss_kind("hinge"), UsageError);
}

TEST_CASE("standardizer") {
    Matrix x(4, 2);
    x << 1, 5, 2, 5, 3, 5, 4, 5;
    const auto s = Standardizer::fit(x);
    const Matrix z = s.apply(x);
    CHECK(z.col(0).mean() == doctest::Approx(0.0));
    CHECK(z.col(0).squaredNorm() / 4 == doctest::Approx(1.0));
    CHECK(s.scale(1) == 1.0);
    CHECK(z.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(s.apply(Matrix::Zero(2, 3)), UsageError);
}

TEST_CASE("model round trip is exact") {
    Rng rng(1);
    Model m;
    m.kind = LossKind::linear;
    m.num_classes = 3;
    m.standardizer = Standardizer{oracle::random_matrix(rng, 1, 4).row(0), oracle::random_matrix(rng, 1, 4).row(0)};
    m.embedding.weights = oracle::random_matrix(rng, 4, 2, 1e-3);
    m.head = LinearHead{oracle::random_matrix(rng, 2, 3), oracle::random_matrix(rng, 1, 3).row(0)};
    m.metadata = {{"rng_seed", "5"}, {"note", "a b"}};

    std::stringstream io;
    write_model(io, m);
    const Model back = read_model(io);
    CHECK(back.kind == m.kind);
    CHECK(back.num_classes == 3);
    CHECK(back.standardizer.mean == m.standardizer.mean);
    CHECK(back.standardizer.scale == m.standardizer.scale);
    CHECK(back.embedding.weights == m.embedding.weights);
    REQUIRE(back.head.has_value());
    CHECK(back.head->weights == m.head->weights);
    CHECK(back.head->bias == m.head->bias);
    CHECK(back.metadata == m.metadata);

    std::stringstream again;
    write_model(again, back);
    std::stringstream first;
    write_model(first, m);
    CHECK(again.str() == first.str());
}

TEST_CASE("identity model") {
    const Model m = Model::identity(3, 2);
    Matrix x(2, 3);
    x << 1, 2, 3, 4, 5, 6;
    CHECK(m.transform(x) == x);
}

TEST_CASE("malformed model files") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return read_model(in);
    };
    const std::string good = "# watershed-model 1\nkind,watershed\nnum_classes,2\n[mean]\n0\n[scale]\n1\n[embedding]\n2\n";
    CHECK(parse(good).embedding.weights(0, 0) == 2.0);
    CHECK_THROWS_AS(parse("kind,watershed\n"), FormatError);
    CHECK_THROWS_AS(parse("# watershed-model 1\nnum_classes,2\n[mean]\n0\n[scale]\n1\n[embedding]\n2\n"), FormatError);
    CHECK_THROWS_AS(parse("# watershed-model 1\nkind,watershed\n[mean]\n0\n[scale]\n1\n"), FormatError);
    CHECK_THROWS_AS(parse("# watershed-model 1\nkind,watershed\n[mean]\n0\n[scale]\n1\n[embedding]\nx\n"),
                    FormatError);
    CHECK_THROWS_AS(parse("# watershed-model 1\nkind,watershed\n[mean]\n0,0\n[scale]\n1\n[embedding]\n2\n"),
                    FormatError);
    CHECK_THROWS_AS(parse("# watershed-model 1\nkind,linear\n[mean]\n0\n[scale]\n1\n[embedding]\n2\n"),
                    FormatError);
}
