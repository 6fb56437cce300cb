#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library: the MP density is restated from its textbook form and integrated
// by tanh-sinh quadrature, and eigenpairs come from Eigen's dense solver.

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace oracle {

inline double mp_lower(double gamma) { return std::pow(1.0 - std::sqrt(gamma), 2); }
inline double mp_upper(double gamma) { return std::pow(1.0 + std::sqrt(gamma), 2); }

inline double mp_pdf(double x, double gamma) {
    const double a = mp_lower(gamma), b = mp_upper(gamma);
    if (x <= a || x >= b)
        return 0.0;
    return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * gamma * x);
}

/// int f dF_gamma, continuous part plus the atom of mass 1 - 1/gamma at 0 when gamma > 1.
template <class F>
double mp_integral(double gamma, F f) {
    boost::math::quadrature::tanh_sinh<double> q;
    const double cont = q.integrate([&](double x) { return f(x) * mp_pdf(x, gamma); }, mp_lower(gamma),
                                    mp_upper(gamma));
    const double atom = gamma > 1.0 ? 1.0 - 1.0 / gamma : 0.0;
    return cont + atom * f(0.0);
}

/// int f d(companion law) with companion = (1 - gamma) delta_0 + gamma F_gamma.
template <class F>
double companion_integral(double gamma, F f) {
    return (1.0 - gamma) * f(0.0) + gamma * mp_integral(gamma, f);
}

/// Descending eigenpairs from a dense solver.
struct DenseEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

inline DenseEigen dense_eigen(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

/// Small seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return std::normal_distribution<double>()(engine_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

    /// (ell, gamma) with ell at least `margin` above 1 + sqrt(gamma).
    std::pair<double, double> supercritical(double margin = 0.05) {
        const double gamma = std::exp(uniform(std::log(0.05), std::log(4.0)));
        const double ell = 1.0 + std::sqrt(gamma) + margin + uniform(0.0, 8.0);
        return {ell, gamma};
    }

    Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd G(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) G(i, j) = normal();
        return G;
    }

    Eigen::MatrixXd symmetric(Eigen::Index d) {
        const Eigen::MatrixXd G = gaussian(d, d);
        return 0.5 * (G + G.transpose());
    }

    Eigen::MatrixXd orthogonal(Eigen::Index d) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(d, d));
        return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace oracle
