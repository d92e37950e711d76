#include "doctest.h"
#include "oracles.hpp"

#include "txseg/features.hpp"
#include "txseg/parallel.hpp"
#include "txseg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace txseg;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
    CounterRng rng(seed);
    Image img(h, w, c);
    for (double& v : img.data) v = rng.uniform01();
    return img;
}

FeatureImage feature_from(int h, int w, int k, const std::vector<double>& values, FeatureStage stage) {
    FeatureImage f{VectorImage(h, w, k), stage};
    f.values.data = values;
    return f;
}

}  // namespace

TEST_CASE("filter responses") {
    const FilterBank bank = random_init(3, 3, 1, true);
    const std::vector<double> ones(9, 1.0);
    const FeatureImage flat = apply_filter_bank(Image(6, 7, 1, 0.6), bank, ones);
    CHECK(flat.values.channels == 4);
    for (int r = 0; r < 6; ++r)
        for (int x = 0; x < 7; ++x)
            for (int k = 1; k < 4; ++k) CHECK(std::abs(flat.values.at(r, x, k)) < 1e-15);

    FilterBank delta{3, Eigen::MatrixXd::Zero(9, 1), false};
    delta.learned(4, 0) = 1.0;
    const Image img = random_image(5, 6, 1, 3);
    const FeatureImage same = apply_filter_bank(img, delta, ones);
    for (int r = 0; r < 5; ++r)
        for (int x = 0; x < 6; ++x) CHECK(same.values.at(r, x, 0) == img.at(r, x));

    // ramp image against the window oracle at every pixel, border included
    Image ramp(5, 5, 1);
    for (int r = 0; r < 5; ++r)
        for (int x = 0; x < 5; ++x) ramp.at(r, x) = 0.1 * r + 0.03 * x * x;
    const auto mask = gaussian_mask(3, 0.9);
    const FeatureImage resp = apply_filter_bank(ramp, bank, mask);
    const Eigen::MatrixXd all = bank.all_filters();
    for (int r = 0; r < 5; ++r)
        for (int x = 0; x < 5; ++x)
            for (int k = 0; k < 4; ++k)
                CHECK(resp.values.at(r, x, k) ==
                      doctest::Approx(oracle::filter_response_brute(ramp, all.col(k), mask, 3, r, x)).epsilon(1e-13));

    // even filter side and RGB input
    const FilterBank even = random_init(4, 2, 5);
    const Image rgb = random_image(7, 9, 3, 8);
    const auto m4 = gaussian_mask(4, 1.0);
    const FeatureImage er = apply_filter_bank(rgb, even, m4);
    for (int r = 0; r < 7; ++r)
        for (int x = 0; x < 9; ++x)
            for (int k = 0; k < 2; ++k)
                CHECK(er.values.at(r, x, k) ==
                      doctest::Approx(oracle::filter_response_brute(rgb, even.learned.col(k), m4, 4, r, x)).epsilon(1e-12).scale(1e-12));

    CHECK_THROWS(apply_filter_bank(Image(2, 8, 1), bank, ones));
    CHECK_THROWS(apply_filter_bank(img, bank, std::vector<double>(4, 1.0)));
}

TEST_CASE("filtering is linear and mirror-consistent") {
    const FilterBank bank = random_init(5, 2, 11);
    const auto mask = gaussian_mask(5, 1.25);
    const Image a = random_image(9, 10, 1, 1), b = random_image(9, 10, 1, 2);
    Image mix(9, 10, 1);
    for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = 0.3 * a.data[i] + b.data[i];
    const auto fa = apply_filter_bank(a, bank, mask), fb = apply_filter_bank(b, bank, mask),
               fm = apply_filter_bank(mix, bank, mask);
    for (std::size_t i = 0; i < fm.values.data.size(); ++i)
        CHECK(std::abs(fm.values.data[i] - (0.3 * fa.values.data[i] + fb.values.data[i])) < 1e-12);

    // a left-right symmetric filter commutes with left-right reflection
    FilterBank sym{3, Eigen::MatrixXd::Zero(9, 1), false};
    sym.learned.col(0) << 1, -2, 1, 0.5, -1, 0.5, 0, 0, 0;
    sym.learned.col(0).array() -= sym.learned.col(0).mean();
    sym.learned.col(0).normalize();
    Image flipped(9, 10, 1);
    for (int r = 0; r < 9; ++r)
        for (int x = 0; x < 10; ++x) flipped.at(r, x) = a.at(r, 9 - x);
    const auto m3 = gaussian_mask(3, 0.75);
    const auto fo = apply_filter_bank(a, sym, m3), ff = apply_filter_bank(flipped, sym, m3);
    for (int r = 0; r < 9; ++r)
        for (int x = 0; x < 10; ++x) CHECK(std::abs(fo.values.at(r, x, 0) - ff.values.at(r, 9 - x, 0)) < 1e-14);
}

TEST_CASE("responses do not depend on the worker count") {
    const FilterBank bank = random_init(5, 3, 2, true);
    const Image img = random_image(33, 29, 3, 5);
    const auto mask = gaussian_mask(5, 1.25);
    set_thread_count(1);
    const auto one = apply_filter_bank(img, bank, mask);
    const auto c1 = covariance(nonlinearity(one, 2000.0));
    set_thread_count(4);
    const auto four = apply_filter_bank(img, bank, mask);
    const auto c4 = covariance(nonlinearity(four, 2000.0));
    set_thread_count(0);
    CHECK(one.values.data == four.values.data);
    CHECK(c1.sigma == c4.sigma);
}

TEST_CASE("nonlinearity") {
    const auto zero = nonlinearity(feature_from(1, 2, 1, {0.0, 0.0}, FeatureStage::Raw), 5.0);
    CHECK(zero.values.data == std::vector<double>{0.0, 0.0});
    CHECK(zero.stage == FeatureStage::Nonlinear);
    const auto pm = nonlinearity(feature_from(1, 2, 1, {0.37, -0.37}, FeatureStage::Raw), 5.0);
    CHECK(pm.values.data[0] == pm.values.data[1]);
    const auto one = nonlinearity(feature_from(1, 1, 1, {0.1}, FeatureStage::Raw), 2000.0);
    CHECK(one.values.data[0] == doctest::Approx(std::log(21.0)).epsilon(1e-14));
    CHECK(std::abs(std::log(21.0) - 3.044522) < 5e-7);
}

TEST_CASE("covariance") {
    const auto flat = covariance(feature_from(2, 2, 2, std::vector<double>(8, 0.5), FeatureStage::Nonlinear), 1e-8);
    CHECK(flat.epsilon == 1e-8);
    CHECK((flat.sigma - 1e-8 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK((flat.inv_sqrt - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);

    const auto scalar = covariance(feature_from(1, 4, 1, {1, 2, 3, 7}, FeatureStage::Nonlinear));
    CHECK(scalar.inv_sqrt(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    // 4 samples of (a, b): means (2.5, 1), hand-computed population covariance
    const std::vector<double> v = {1, 0, 2, 2, 3, 0, 4, 2};
    const auto op = covariance(feature_from(2, 2, 2, v, FeatureStage::Nonlinear), 1e-8);
    const double eps = 1e-8 * (1.25 + 1.0) / 2.0;
    CHECK(op.sigma(0, 0) == doctest::Approx(1.25 + eps).epsilon(1e-12));
    CHECK(op.sigma(1, 1) == doctest::Approx(1.0 + eps).epsilon(1e-12));
    CHECK(op.sigma(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(op.sigma(1, 0) == op.sigma(0, 1));
    CHECK(op.inv_sqrt.maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));

    std::vector<double> bad = v;
    bad[3] = std::nan("");
    CHECK_THROWS(covariance(feature_from(2, 2, 2, bad, FeatureStage::Nonlinear)));
}

TEST_CASE("whitening") {
    CounterRng rng(4);
    const int n = 4000;
    std::vector<double> g(n * 3);
    for (int i = 0; i < n; ++i) {
        const double z0 = rng.normal(), z1 = rng.normal(), z2 = rng.normal();
        g[i * 3 + 0] = 2.0 * z0 + 5.0;
        g[i * 3 + 1] = 0.5 * z0 + z1;
        g[i * 3 + 2] = -z1 + 0.1 * z2;
    }
    const auto feat = feature_from(40, 100, 3, g, FeatureStage::Nonlinear);
    const auto op = covariance(feat);

    const auto id = whiten(feat, Eigen::MatrixXd::Identity(3, 3));
    CHECK(id.values.data == feat.values.data);
    CHECK(id.stage == FeatureStage::Whitened);

    // unit sample covariance without the max-normalisation
    const auto white = whiten(feat, op.raw_inv_sqrt());
    const auto cov = covariance(FeatureImage{white.values, FeatureStage::Nonlinear}, 1e-12);
    // the ridge shifts each eigenvalue by epsilon, a relative error of epsilon / lambda_min
    const double lambda_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(op.sigma).eigenvalues().minCoeff();
    CHECK((cov.sigma - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 2.0 * op.epsilon / lambda_min + 1e-10);

    // Mahalanobis distance identity
    const Eigen::Vector3d a(0.3, -1.0, 2.0), b(1.1, 0.4, -0.5);
    const double lhs = (op.inv_sqrt * (a - b)).squaredNorm();
    const double rhs = (a - b).dot(op.sigma.inverse() * (a - b)) / (op.normalisation * op.normalisation);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

    CHECK_THROWS(whiten(feature_from(1, 1, 1, {0.0}, FeatureStage::Raw), op));
    CHECK_THROWS(whiten(feat, Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("feature dumps round-trip") {
    const auto feat = feature_from(2, 3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 0.125}, FeatureStage::Whitened);
    write_features("dump.txft", feat);
    const auto back = read_features("dump.txft");
    CHECK(back.values.height == 2);
    CHECK(back.values.width == 3);
    CHECK(back.values.channels == 2);
    CHECK(back.values.data == feat.values.data);
    CHECK_THROWS_AS(read_features("nothing.txft"), IoError);
}
