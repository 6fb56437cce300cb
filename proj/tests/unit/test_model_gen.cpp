#include "spiked/model_gen.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace spiked;
using doctest::Approx;

namespace {

SpikedModelSpec base_spec() {
    SpikedModelSpec s;
    s.m = 2;
    s.p = 400;
    s.n = 800;
    s.ells = {4.0, 2.5};
    s.seed = 99;
    return s;
}

} // namespace

TEST_CASE("spec validation") {
    auto s = base_spec();
    CHECK_NOTHROW(s.validate());
    CHECK(s.gamma_n() == 0.5);

    auto bad = s;
    bad.ells = {2.5, 4.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.ells = {4.0, 4.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.m = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.n = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.p = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.ells = {4.0, -1.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = s;
    bad.signal_dist = SignalDistribution::scale_mixture({0.5, 0.5});
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(generate(bad, 0), ConfigError);

    CHECK(noise_distribution_from_string("uniform_pm_sqrt3") == NoiseDistribution::uniform_pm_sqrt3);
    CHECK(to_string(NoiseDistribution::rademacher) == "rademacher");
    CHECK_THROWS_AS(noise_distribution_from_string("laplace"), ConfigError);
}

TEST_CASE("population axes") {
    auto s = base_spec();
    const auto id = population_axes(s);
    CHECK(id.P.isApprox(Mat::Identity(2, 2)));

    s.m = 4;
    s.ells = {5.0, 4.0, 3.0, 2.0};
    s.rotation = Rotation::random_orthogonal(12345);
    const auto a = population_axes(s);
    const auto b = population_axes(s);
    CHECK(a.P == b.P);
    CHECK((a.P.transpose() * a.P - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_FALSE(a.P.isApprox(Mat::Identity(4, 4)));

    const Mat sigma = a.sigma();
    Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
    const Vec ev = es.eigenvalues().reverse();
    for (Index i = 0; i < 4; ++i) CHECK(ev(i) == Approx(s.ells[static_cast<std::size_t>(i)]).epsilon(1e-12));

    s.rotation = Rotation::random_orthogonal(54321);
    CHECK_FALSE(population_axes(s).P.isApprox(a.P));
}

TEST_CASE("generation is deterministic per replicate") {
    const auto s = base_spec();
    const Dataset a = generate(s, 3);
    const Dataset b = generate(s, 3);
    const Dataset c = generate(s, 4);
    CHECK(a.X1 == b.X1);
    CHECK(a.X2 == b.X2);
    CHECK(a.X1 != c.X1);
    CHECK(a.X2 != c.X2);
    CHECK(a.replicate == 3);
    CHECK(a.m() == 2);
    CHECK(a.p() == 400);
    CHECK(a.n() == 800);
    CHECK(a.gamma_n() == 0.5);

    auto other_seed = s;
    other_seed.seed = 100;
    CHECK(generate(other_seed, 3).X1 != a.X1);

    // signal and noise streams are separate: changing p leaves X1 untouched
    auto fewer = s;
    fewer.p = 10;
    CHECK(generate(fewer, 3).X1 == a.X1);
}

TEST_CASE("signal covariance matches Sigma") {
    const auto s = base_spec();
    const Dataset d = generate(s, 0);
    const Mat S11 = d.X1 * d.X1.transpose() / static_cast<double>(s.n);
    const double n = static_cast<double>(s.n);
    CHECK(std::abs(S11(0, 0) - 4.0) <= 10.0 * std::sqrt(2.0 * 16.0 / n));
    CHECK(std::abs(S11(1, 1) - 2.5) <= 10.0 * std::sqrt(2.0 * 6.25 / n));
    CHECK(std::abs(S11(0, 1)) <= 10.0 * std::sqrt(10.0 / n));
}

TEST_CASE("noise laws") {
    auto s = base_spec();
    s.p = 50;
    s.n = 20000;

    s.noise_dist = NoiseDistribution::rademacher;
    const Mat R = generate(s, 0).X2;
    CHECK((R.array().abs() == 1.0).all());

    const double N = static_cast<double>(s.p * s.n);
    auto fourth = [&](const Mat& X) { return X.array().pow(4).sum() / N; };
    auto second = [&](const Mat& X) { return X.array().square().sum() / N; };

    CHECK(fourth(R) == 1.0);

    s.noise_dist = NoiseDistribution::gaussian;
    const Mat G = generate(s, 0).X2;
    CHECK(second(G) == Approx(1.0).epsilon(0.01));
    CHECK(std::abs(fourth(G) - 3.0) <= 5.0 * std::sqrt(96.0 / N));

    s.noise_dist = NoiseDistribution::uniform_pm_sqrt3;
    const Mat U = generate(s, 0).X2;
    CHECK(U.cwiseAbs().maxCoeff() <= std::sqrt(3.0));
    CHECK(second(U) == Approx(1.0).epsilon(0.01));
    // Var(u^4) = E u^8 - (E u^4)^2 = 81/9 - 81/25
    CHECK(std::abs(fourth(U) - 1.8) <= 5.0 * std::sqrt((9.0 - 3.24) / N));
}

TEST_CASE("property: disjoint column blocks agree") {
    auto s = base_spec();
    s.n = 20000;
    s.p = 3;
    s.signal_dist = SignalDistribution::scale_mixture({0.5, 1.5});
    const Dataset d = generate(s, 1);
    const Index h = s.n / 2;
    const Mat A = d.X1.leftCols(h), B = d.X1.rightCols(h);
    const Mat SA = A * A.transpose() / static_cast<double>(h);
    const Mat SB = B * B.transpose() / static_cast<double>(h);
    // Var(x_0^2) = E w^4 * 3 * 16 - 16 = 44 for this mixture
    const double se = std::sqrt(2.0 * 44.0 / static_cast<double>(h));
    CHECK(std::abs(SA(0, 0) - SB(0, 0)) <= 5.0 * se);
    CHECK(std::abs(A.row(0).mean() - B.row(0).mean()) <= 5.0 * std::sqrt(2.0 * 4.0 / static_cast<double>(h)));
}

TEST_CASE("scale mixture and factor draws have the right covariance") {
    auto s = base_spec();
    s.rotation = Rotation::random_orthogonal(8);
    for (const auto& dist : {SignalDistribution::scale_mixture({0.5, 1.5}),
                             SignalDistribution::iid_factors(FactorLaw::rademacher),
                             SignalDistribution::iid_factors(FactorLaw::uniform)}) {
        s.signal_dist = dist;
        const auto axes = population_axes(s);
        const Mat X = draw_signal_samples(s, axes, 200000, 5);
        const Mat C = X.transpose() * X / static_cast<double>(X.rows());
        CHECK((C - axes.sigma()).cwiseAbs().maxCoeff() <= 0.1);
    }
}

TEST_CASE("haar orthogonal matrices") {
    auto e = stream_engine(1, 2, 3);
    const Mat Q = haar_orthogonal(6, e);
    CHECK((Q.transpose() * Q - Mat::Identity(6, 6)).norm() <= 1e-12);
    auto e1 = stream_engine(1, 2, 3);
    CHECK(haar_orthogonal(6, e1) == Q);
}
