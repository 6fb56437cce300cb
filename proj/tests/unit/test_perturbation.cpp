#include "spiked/perturbation.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace spiked;
using doctest::Approx;

namespace {

Mat diag(std::initializer_list<double> d) {
    Vec v(static_cast<Index>(d.size()));
    Index i = 0;
    for (double x : d) v(i++) = x;
    return v.asDiagonal();
}

Mat projector(const Mat& A, Index r) {
    const auto e = oracle::dense_eigen(A);
    return e.vectors.col(r) * e.vectors.col(r).transpose();
}

} // namespace

TEST_CASE("reduced resolvent of diagonal matrices") {
    CHECK(reduced_resolvent<double>(diag({3, 1}), 0).isApprox(diag({0, -0.5})));
    CHECK(reduced_resolvent<double>(diag({3, 1}), 1).isApprox(diag({0.5, 0})));
    CHECK((reduced_resolvent<double>(diag({3, 2, 1}), 1) - diag({1, 0, -1})).norm() <= 1e-14);
    const Mat A = diag({3, 2, 1});
    const Mat H = reduced_resolvent<double>(A, 1);
    CHECK((H * (A - 2.0 * Mat::Identity(3, 3)) - (Mat::Identity(3, 3) - projector(A, 1))).norm() <= 1e-10);
}

TEST_CASE("reduced resolvent errors and multiplicity") {
    CHECK_THROWS_AS(reduced_resolvent<double>(diag({2, 2, 1}), 0), DegenerateSpectrumError);
    CHECK_THROWS_AS(reduced_resolvent<double>(diag({2, 1}), 2), DomainError);
    CHECK_THROWS_AS(first_order_eigvec<double>(diag({2, 2}), Mat::Zero(2, 2), 1), DegenerateSpectrumError);
    CHECK_THROWS_AS(first_order_eigvec<double>(diag({2, 1}), Mat::Zero(3, 3), 0), DomainError);

    // repeated eigenvalue away from r shares one projector
    const Mat H = reduced_resolvent<double>(diag({5, 2, 2}), 0);
    CHECK((H - diag({0, -1.0 / 3.0, -1.0 / 3.0})).norm() <= 1e-14);
}

TEST_CASE("property: defining identity and basis covariance") {
    oracle::Gen gen(1);
    for (int trial = 0; trial < 200; ++trial) {
        const Index d = gen.integer(2, 8);
        Vec lam(d);
        for (Index i = 0; i < d; ++i) lam(i) = static_cast<double>(d - i) + gen.uniform(-0.3, 0.3);
        const Mat Q = gen.orthogonal(d);
        const Mat A = Q * lam.asDiagonal() * Q.transpose();
        const Index r = gen.integer(0, static_cast<int>(d) - 1);
        const Mat H = reduced_resolvent<double>(A, r);
        const auto eig = sorted_eigen<double>(A);
        const Mat lhs = H * (A - eig.values(r) * Mat::Identity(d, d));
        CHECK((lhs - (Mat::Identity(d, d) - projector(A, r))).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((H * eig.vectors.col(r)).norm() <= 1e-10);

        const Mat HD = reduced_resolvent<double>(Mat(lam.asDiagonal()), r);
        CHECK((H - Q * HD * Q.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("zero perturbation") {
    const Mat A = diag({3, 2, 1});
    const auto res = first_order_eigvec<double>(A, Mat::Zero(3, 3), 0);
    CHECK(res.remainder_norm <= 1e-15);
    CHECK(res.bound == 0.0);
    CHECK(res.applicable);
    CHECK(res.within_bound());
    CHECK((res.first_order_vec - res.exact_vec).norm() <= 1e-15);
    CHECK(std::abs(res.exact_vec(0)) == Approx(1.0));
}

TEST_CASE("two by two closed form") {
    const Mat A = diag({3, 1});
    Mat B(2, 2);
    B << 0, 0.1, 0.1, 0;
    const auto res = first_order_eigvec<double>(A, B, 0);
    CHECK(res.first_order_vec(0) == Approx(1.0));
    CHECK(res.first_order_vec(1) == Approx(0.05));
    const double phi = 0.5 * std::atan(0.1);
    CHECK(res.exact_vec(0) == Approx(std::cos(phi)).epsilon(1e-12));
    CHECK(res.exact_vec(1) == Approx(std::sin(phi)).epsilon(1e-12));
    const double remainder = std::hypot(std::cos(phi) - 1.0, std::sin(phi) - 0.05);
    CHECK(res.remainder_norm == Approx(remainder).epsilon(1e-10));
    CHECK(res.remainder_norm == Approx(1.25e-3).epsilon(0.02));
    CHECK(res.bound == Approx(0.025));
    CHECK(res.delta_r == Approx(2.0));
    CHECK(res.b_norm == Approx(0.1));
    CHECK(res.applicable);
    CHECK(res.within_bound());
    CHECK(res.first_order_vec.dot(res.first_order_vec - res.exact_vec) != 0.0);
    CHECK(res.exact_vec.dot(Vec::Unit(2, 0)) >= 0.0);
}

TEST_CASE("outside the hypothesis region the flag is cleared") {
    const Mat A = diag({3, 1});
    Mat B(2, 2);
    B << 0, 0.7, 0.7, 0;
    const auto res = first_order_eigvec<double>(A, B, 0);
    CHECK_FALSE(res.applicable);
    CHECK(res.remainder_norm > 0.0);
    CHECK(std::abs(res.exact_vec.norm() - 1.0) <= 1e-12);
}

TEST_CASE("property: random trials respect the bound") {
    oracle::Gen gen(2);
    int applicable = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const Index d = gen.integer(2, 8);
        const Mat A = gen.symmetric(d);
        const Index r = gen.integer(0, static_cast<int>(d) - 1);
        const auto eig = sorted_eigen<double>(A);
        const double delta = eigengap<double>(eig.values, r);
        Mat B = gen.symmetric(d);
        B *= gen.uniform(0.01, 0.33) * delta / sym_norm<double>(B);
        const auto res = first_order_eigvec<double>(A, B, r);
        CHECK(std::abs(res.exact_vec.norm() - 1.0) <= 1e-12);
        CHECK(res.exact_vec.dot(eig.vectors.col(r)) >= 0.0);
        // the first-order correction has no component along p_r
        CHECK(std::abs((res.first_order_vec - eig.vectors.col(r)).dot(eig.vectors.col(r))) <= 1e-10);
        if (res.applicable) {
            ++applicable;
            CHECK(res.within_bound());
        }
    }
    CHECK(applicable == 2000);
}

TEST_CASE("fuzz summary") {
    const auto s = fuzz_perturbation(2000, 2, 8, 0.25, 42);
    CHECK(s.trials == 2000);
    CHECK(s.applicable == 2000);
    CHECK(s.violations == 0);
    CHECK(s.max_constant <= 10.0);
    CHECK(s.max_constant > 0.0);
    CHECK(s.median_shrink >= 3.5);
    CHECK(s.median_remainder > s.median_remainder_half);

    const auto again = fuzz_perturbation(2000, 2, 8, 0.25, 42);
    CHECK(again.max_constant == s.max_constant);

    const auto wide = fuzz_perturbation(200, 2, 8, 0.4, 1);
    CHECK(wide.applicable == 0);
    CHECK(wide.violations == 0);

    CHECK_THROWS_AS(fuzz_perturbation(10, 1, 8, 0.25, 1), DomainError);
}

TEST_CASE("single precision instantiation") {
    mat_type<float> A = mat_type<float>::Zero(2, 2);
    A(0, 0) = 3.0f;
    A(1, 1) = 1.0f;
    mat_type<float> B(2, 2);
    B << 0.0f, 0.1f, 0.1f, 0.0f;
    const auto res = first_order_eigvec<float>(A, B, 0);
    CHECK(res.remainder_norm == Approx(1.25e-3).epsilon(0.05));
    CHECK(res.within_bound());
}
