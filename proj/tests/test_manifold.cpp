#include "doctest.h"

#include "txseg/image.hpp"
#include "txseg/manifold.hpp"
#include "txseg/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace txseg;

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
    CounterRng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("tangent projection") {
    const FilterBank base = random_init(2, 3, 5);
    CHECK(project_tangent(base, base.learned).norm() < 1e-15);
    CHECK(project_tangent(base, Eigen::MatrixXd::Ones(4, 3)).norm() < 1e-15);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const FilterBank b = random_init(2, 1, seed);
        const Tangent h = project_tangent(b, gaussian(4, 1, seed + 100));
        CHECK(std::abs(h.col(0).dot(b.learned.col(0))) < 1e-12);
        CHECK(std::abs(h.col(0).sum()) < 1e-12);
        CHECK((project_tangent(b, h) - h).norm() < 1e-12);
    }
}

TEST_CASE("geodesic step") {
    const FilterBank base = random_init(3, 4, 9);
    const Tangent h = project_tangent(base, gaussian(9, 4, 10));
    CHECK(geodesic_step(base, h, 0.0).learned == base.learned);

    // half turn on column 0 only
    Tangent one = Tangent::Zero(9, 4);
    one.col(0) = h.col(0);
    const FilterBank flipped = geodesic_step(base, one, std::numbers::pi / h.col(0).norm());
    CHECK((flipped.learned.col(0) + base.learned.col(0)).norm() < 1e-12);
    CHECK(flipped.learned.rightCols(3) == base.learned.rightCols(3));

    CounterRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd x = gaussian(3, 1, 1000 + trial);
        x.array() -= x.mean();
        FilterBank b{0, x / x.norm(), false};
        const Tangent d = project_tangent(b, gaussian(3, 1, 2000 + trial));
        const FilterBank moved = geodesic_step(b, d, 10.0 * rng.uniform01());
        CHECK(std::abs(moved.learned.norm() - 1.0) < 1e-12);
        CHECK(std::abs(moved.learned.sum()) < 1e-12);
    }

    // derivative at t = 0 equals the direction
    const double eps = 1e-6;
    const Eigen::MatrixXd fd = (geodesic_step(base, h, eps).learned - geodesic_step(base, h, -eps).learned) / (2 * eps);
    CHECK((fd - h).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("parallel transport") {
    const FilterBank base = random_init(3, 2, 21);
    const Tangent dir = project_tangent(base, gaussian(9, 2, 22));
    const Tangent v = project_tangent(base, gaussian(9, 2, 23));
    CHECK((parallel_transport(v, base, dir, 0.0) - v).norm() < 1e-15);

    // a tangent orthogonal to the direction is left alone
    Tangent orth = v;
    for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd u = dir.col(k).normalized();
        orth.col(k) -= orth.col(k).dot(u) * u;
    }
    for (double t : {0.3, 1.7, 4.0}) CHECK((parallel_transport(orth, base, dir, t) - orth).norm() < 1e-12);

    for (int trial = 0; trial < 30; ++trial) {
        const FilterBank b = random_init(2, 3, 300 + trial);
        const Tangent d = project_tangent(b, gaussian(4, 3, 400 + trial));
        const Tangent w = project_tangent(b, gaussian(4, 3, 500 + trial));
        const double t = 0.1 * trial;
        const Tangent moved = parallel_transport(w, b, d, t);
        const FilterBank end = geodesic_step(b, d, t);
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(moved.col(k).norm() - w.col(k).norm()) < 1e-12);
            CHECK(std::abs(moved.col(k).dot(end.learned.col(k))) < 1e-10);
            CHECK(std::abs(moved.col(k).sum()) < 1e-10);
        }
    }
}

TEST_CASE("random initialisation") {
    const FilterBank a = random_init(3, 8, 42);
    const FilterBank b = random_init(3, 8, 42);
    CHECK(a.learned == b.learned);
    CHECK(a.max_norm_deviation() <= 1e-12);
    CHECK(a.max_mean_deviation() <= 1e-12);
    for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j) CHECK(std::abs(a.learned.col(i).dot(a.learned.col(j))) < 1.0);
    CHECK_THROWS(random_init(1, 1, 0));
    CHECK_THROWS(random_init(3, 0, 0));
}

TEST_CASE("mean filter placement") {
    const FilterBank bank = random_init(3, 2, 1, true);
    const Eigen::MatrixXd all = bank.all_filters();
    CHECK(all.cols() == 3);
    CHECK((all.col(0).array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
    CHECK(all.rightCols(2) == bank.learned);
    CHECK(mean_only_bank(5).channel_count() == 1);
}

TEST_CASE("bank files round-trip byte for byte") {
    const FilterBank bank = random_init(5, 4, 77, true);
    write_bank("bank_a.txsf", bank);
    const FilterBank back = read_bank("bank_a.txsf");
    CHECK(back.side == 5);
    CHECK(back.has_mean_filter);
    CHECK(back.learned == bank.learned);
    write_bank("bank_b.txsf", back);
    std::ifstream fa("bank_a.txsf", std::ios::binary), fb("bank_b.txsf", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    CHECK(sa.size() == 4 + 2 + 2 + 4 + 4 + 5 * 25 * 8);
    CHECK(sa.substr(0, 4) == "TXSF");
}

TEST_CASE("malformed bank files are rejected") {
    {
        std::ofstream out("bad_magic.txsf", std::ios::binary);
        out << "XXXX0000000000000000";
    }
    CHECK_THROWS_AS(read_bank("bad_magic.txsf"), IoError);
    write_bank("trunc.txsf", random_init(3, 2, 1));
    std::filesystem::resize_file("trunc.txsf", 30);
    CHECK_THROWS_AS(read_bank("trunc.txsf"), IoError);
    {
        std::ofstream out("bad_version.txsf", std::ios::binary);
        const char header[] = {'T', 'X', 'S', 'F', 9, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0};
        out.write(header, sizeof header);
        out << std::string(32, '\0');
    }
    CHECK_THROWS_AS(read_bank("bad_version.txsf"), IoError);
    CHECK_THROWS_AS(read_bank("missing.txsf"), IoError);
}
