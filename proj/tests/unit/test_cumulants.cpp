#include "spiked/cumulants.hpp"
#include "spiked/model_gen.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

using namespace spiked;
using doctest::Approx;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

SpikedModelSpec spec_for(SignalDistribution dist, const std::vector<double>& ells, Rotation rot = {}) {
    SpikedModelSpec s;
    s.m = static_cast<Index>(ells.size());
    s.p = 0;
    s.n = 1;
    s.ells = ells;
    s.signal_dist = std::move(dist);
    s.rotation = rot;
    s.seed = 424242;
    return s;
}

// Standard error of the plug-in fourth moment E[x_i x_j x_k x_l], used as the
// scale for comparing empirical and exact cumulants.
// Batch-means standard error of the empirical cumulant entry.
std::vector<double> batch_se(const Mat& X, Index batches) {
    const Index size = X.rows() / batches;
    std::vector<std::vector<double>> vals(batches);
    for (Index b = 0; b < batches; ++b) {
        const CumulantTensor t = empirical_tensor(X.middleRows(b * size, size));
        for (Index i = 0; i < 2; ++i)
            for (Index j = i; j < 2; ++j)
                for (Index k = j; k < 2; ++k)
                    for (Index l = k; l < 2; ++l) vals[static_cast<std::size_t>(b)].push_back(t(i, j, k, l));
    }
    std::vector<double> se(vals[0].size());
    for (std::size_t e = 0; e < se.size(); ++e) {
        double mean = 0.0, ss = 0.0;
        for (const auto& v : vals) mean += v[e];
        mean /= static_cast<double>(batches);
        for (const auto& v : vals) ss += (v[e] - mean) * (v[e] - mean);
        se[e] = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
    }
    return se;
}

} // namespace

TEST_CASE("factor fourth cumulants") {
    CHECK(factor_fourth_cumulant(FactorLaw::gaussian) == 0.0);
    CHECK(factor_fourth_cumulant(FactorLaw::rademacher) == Approx(-2.0));
    CHECK(factor_fourth_cumulant(FactorLaw::uniform) == Approx(-1.2));
    CHECK(factor_law_from_string("rademacher") == FactorLaw::rademacher);
    CHECK(to_string(FactorLaw::uniform) == "uniform");
    CHECK_THROWS_AS(factor_law_from_string("cauchy"), ConfigError);
}

TEST_CASE("signal distribution validation") {
    CHECK(SignalDistribution::scale_mixture({0.5, 1.5}).w4_moment() == Approx(1.25));
    CHECK_NOTHROW(SignalDistribution::scale_mixture({0.5, 1.5}).validate());
    CHECK_THROWS_AS(SignalDistribution::scale_mixture({0.5, 1.0}).validate(), ConfigError);
    CHECK_THROWS_AS(SignalDistribution::scale_mixture({}).validate(), ConfigError);
    CHECK_THROWS_AS(SignalDistribution::scale_mixture({-1.0, 3.0}).validate(), ConfigError);
}

TEST_CASE("exact tensors") {
    const Mat I = Mat::Identity(2, 2);
    const Vec ells = vec2(4.0, 2.5);

    SUBCASE("gaussian is zero for any rotation") {
        oracle::Gen gen(1);
        CHECK(exact_tensor(SignalDistribution::gaussian(), gen.orthogonal(2), ells).max_abs() == 0.0);
    }
    SUBCASE("rademacher factors with identity axes") {
        const CumulantTensor k = exact_tensor(SignalDistribution::iid_factors(FactorLaw::rademacher), I, ells);
        CHECK(k(0, 0, 0, 0) == Approx(-32.0));
        CHECK(k(1, 1, 1, 1) == Approx(-12.5));
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j)
                for (Index a = 0; a < 2; ++a)
                    for (Index b = 0; b < 2; ++b)
                        if (!(i == j && j == a && a == b))
                            CHECK(k(i, j, a, b) == 0.0);
    }
    SUBCASE("scale mixture") {
        const CumulantTensor k = exact_tensor(SignalDistribution::scale_mixture({0.5, 1.5}), I, ells);
        CHECK(k(0, 0, 1, 1) == Approx(2.5));
        CHECK(k(0, 1, 0, 1) == Approx(2.5));
        CHECK(k(0, 0, 0, 0) == Approx(0.25 * 3.0 * 16.0));
    }
}

TEST_CASE("property: tensors are symmetric under index permutations") {
    oracle::Gen gen(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Index m = gen.integer(1, 4);
        const Mat P = gen.orthogonal(m);
        Vec ells(m);
        for (Index i = 0; i < m; ++i) ells(i) = 5.0 - i;
        for (const auto& dist : {SignalDistribution::iid_factors(FactorLaw::uniform),
                                 SignalDistribution::scale_mixture({0.25, 1.75})}) {
            const CumulantTensor k = exact_tensor(dist, P, ells);
            CHECK(k.symmetry_defect() <= 1e-12 * (1.0 + k.max_abs()));
            std::array<Index, 4> idx{};
            for (auto& v : idx) v = gen.integer(0, static_cast<int>(m - 1));
            const double ref = k(idx[0], idx[1], idx[2], idx[3]);
            std::sort(idx.begin(), idx.end());
            do {
                CHECK(k(idx[0], idx[1], idx[2], idx[3]) == Approx(ref).epsilon(1e-12));
            } while (std::next_permutation(idx.begin(), idx.end()));
        }
        const CumulantTensor e = empirical_tensor(gen.gaussian(50, m));
        CHECK(e.symmetry_defect() == 0.0);
    }
}

TEST_CASE("empirical tensors") {
    SUBCASE("degenerate data") {
        const CumulantTensor k = empirical_tensor(Mat::Zero(10, 3));
        CHECK(k.max_abs() == 0.0);
        CHECK_THROWS_AS(empirical_tensor(Mat::Zero(3, 2)), DomainError);
    }
    SUBCASE("gaussian, one million draws") {
        const auto spec = spec_for(SignalDistribution::gaussian(), {1.5, 1.0});
        const Mat X = draw_signal_samples(spec, population_axes(spec), 1000000, 1);
        CHECK(empirical_tensor(X).max_abs() <= 0.05);
    }
    SUBCASE("rademacher factors, one million draws") {
        const auto spec = spec_for(SignalDistribution::iid_factors(FactorLaw::rademacher), {4.0, 2.5});
        const Mat X = draw_signal_samples(spec, population_axes(spec), 1000000, 2);
        CHECK(std::abs(empirical_tensor(X)(0, 0, 0, 0) + 32.0) <= 0.5);
    }
}

TEST_CASE("property: empirical matches exact within ten standard errors") {
    const std::vector<std::pair<SignalDistribution, Rotation>> cases{
        {SignalDistribution::gaussian(), Rotation::random_orthogonal(3)},
        {SignalDistribution::iid_factors(FactorLaw::rademacher), Rotation::identity()},
        {SignalDistribution::iid_factors(FactorLaw::uniform), Rotation::random_orthogonal(4)},
        {SignalDistribution::scale_mixture({0.5, 1.5}), Rotation::random_orthogonal(5)},
    };
    std::uint64_t stream = 10;
    for (const auto& [dist, rot] : cases) {
        const auto spec = spec_for(dist, {4.0, 2.5}, rot);
        const auto axes = population_axes(spec);
        const Mat X = draw_signal_samples(spec, axes, 1000000, stream++);
        const CumulantTensor exact = exact_tensor(dist, axes.P, axes.ells);
        const CumulantTensor emp = empirical_tensor(X);
        const auto se = batch_se(X, 25);
        std::size_t e = 0;
        for (Index i = 0; i < 2; ++i)
            for (Index j = i; j < 2; ++j)
                for (Index k = j; k < 2; ++k)
                    for (Index l = k; l < 2; ++l) {
                        CHECK(std::abs(emp(i, j, k, l) - exact(i, j, k, l)) <= 10.0 * se[e] + 1e-12);
                        ++e;
                    }
    }
}

TEST_CASE("contractions") {
    const Mat I = Mat::Identity(2, 2);
    const Vec ells = vec2(4.0, 2.5);
    oracle::Gen gen(3);
    const Mat Q = gen.orthogonal(2);

    const CumulantTensor zero = exact_tensor(SignalDistribution::gaussian(), Q, ells);
    for (Index a = 0; a < 2; ++a)
        for (Index b = 0; b < 2; ++b) CHECK(contract(zero, Q, a, b, 0, 1) == 0.0);

    const CumulantTensor rad = exact_tensor(SignalDistribution::iid_factors(FactorLaw::rademacher), I, ells);
    CHECK(contract(rad, I, 0, 0, 0, 0) == Approx(-32.0));
    CHECK(contract(rad, I, 1, 1, 0, 0) == 0.0);

    // with rotated axes the contraction sees the factor basis
    const CumulantTensor radq = exact_tensor(SignalDistribution::iid_factors(FactorLaw::rademacher), Q, ells);
    CHECK(contract(radq, Q, 0, 0, 0, 0) == Approx(-32.0));
    CHECK(std::abs(contract(radq, Q, 1, 1, 0, 0)) <= 1e-12);

    const CumulantTensor mix = exact_tensor(SignalDistribution::scale_mixture({0.5, 1.5}), Q, ells);
    CHECK(contract(mix, Q, 1, 1, 0, 0) == Approx(2.5));
    CHECK(contraction_matrix(mix, Q, 0)(1, 1) == Approx(2.5));

    CHECK_THROWS_AS(contract(mix, Q, 2, 0, 0, 0), DomainError);
    CHECK_THROWS_AS(kappa_nu_matrix(mix, Q, -1), DomainError);
}

TEST_CASE("property: contraction matrix is P^T K^nu P") {
    oracle::Gen gen(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Index m = gen.integer(2, 4);
        const Mat P = gen.orthogonal(m);
        Vec ells(m);
        for (Index i = 0; i < m; ++i) ells(i) = 6.0 - 1.3 * i;
        const CumulantTensor k = exact_tensor(SignalDistribution::scale_mixture({0.1, 1.9}), P, ells);
        const Index nu = gen.integer(0, static_cast<int>(m - 1));
        const Mat C = contraction_matrix(k, P, nu);
        for (Index a = 0; a < m; ++a)
            for (Index b = 0; b < m; ++b) CHECK(C(a, b) == Approx(contract(k, P, a, b, nu, nu)).epsilon(1e-12));
    }
}

TEST_CASE("bilinear J and K, scalar examples") {
    SUBCASE("x = y standard gaussian") {
        const BilinearMoments b = bilinear_JK(Mat::Ones(2, 2), Mat::Constant(1, 1, 3.0));
        CHECK(b.J(0, 0) == Approx(2.0));
        CHECK(b.K(0, 0) == Approx(0.0));
        CHECK(quadform_covariance(b, 1.7, 0.4)(0, 0) == Approx(3.4));
    }
    SUBCASE("x = y rademacher") {
        const BilinearMoments b = bilinear_JK(Mat::Ones(2, 2), Mat::Constant(1, 1, 1.0));
        CHECK(b.J(0, 0) == Approx(2.0));
        CHECK(b.K(0, 0) == Approx(-2.0));
    }
    SUBCASE("independent standard pair") {
        const BilinearMoments b = bilinear_JK(Mat::Identity(2, 2), Mat::Constant(1, 1, 1.0));
        CHECK(b.J(0, 0) == Approx(1.0));
        CHECK(b.K(0, 0) == Approx(0.0));
    }
    CHECK_THROWS_AS(bilinear_JK(Mat::Ones(3, 3), Mat::Ones(1, 1)), DomainError);
}

TEST_CASE("bilinear J and K from samples") {
    oracle::Gen gen(17);
    const Index N = 400000;
    Mat x(N, 1), y(N, 1);
    for (Index i = 0; i < N; ++i) {
        x(i, 0) = (gen.engine()() >> 63) ? 1.0 : -1.0;
        y(i, 0) = x(i, 0);
    }
    const BilinearMoments b = bilinear_JK_from_samples(x, y);
    CHECK(b.J(0, 0) == Approx(2.0).epsilon(0.01));
    CHECK(b.K(0, 0) == Approx(-2.0).epsilon(0.01));
    CHECK((b.K - b.K.transpose()).norm() == 0.0);
    CHECK_THROWS_AS(bilinear_JK_from_samples(x, Mat::Zero(N, 2)), DomainError);
}

TEST_CASE("bilinear J and K for the matrix quadratic form") {
    const auto pairs = upper_pairs(3);
    REQUIRE(pairs.size() == 6);
    CHECK(pairs[0] == std::array<Index, 2>{0, 0});
    CHECK(pairs[1] == std::array<Index, 2>{0, 1});
    CHECK(pairs[3] == std::array<Index, 2>{1, 1});

    const Mat one = Mat::Identity(1, 1);
    const BilinearMoments g = bilinear_JK_from_signal(one, exact_tensor(SignalDistribution::gaussian(), one, Vec::Ones(1)));
    CHECK(quadform_covariance(g, 1.0, 1.0)(0, 0) == Approx(2.0));
    const BilinearMoments u =
        bilinear_JK_from_signal(one, exact_tensor(SignalDistribution::iid_factors(FactorLaw::uniform), one, Vec::Ones(1)));
    CHECK(quadform_covariance(u, 1.0, 1.0)(0, 0) == Approx(0.8));

    // entry (j,k) = (0,1) with Sigma = diag(4, 2.5): Var = sigma_00 sigma_11
    const Mat sigma = vec2(4.0, 2.5).asDiagonal();
    const BilinearMoments b =
        bilinear_JK_from_signal(sigma, exact_tensor(SignalDistribution::gaussian(), Mat::Identity(2, 2), vec2(4.0, 2.5)));
    CHECK(b.J(1, 1) == Approx(10.0));
    CHECK(b.J(0, 0) == Approx(32.0));
    CHECK(b.J(2, 2) == Approx(12.5));
    CHECK(b.J(0, 2) == Approx(0.0));
    CHECK((b.J - b.J.transpose()).norm() == 0.0);
}
