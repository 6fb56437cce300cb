#pragma once

// Closed-form asymptotics for a supercritical spike ell > 1 + sqrt(gamma):
// outlier location rho, its derivative, CLT variance, squared-cosine limit,
// the resolvent constants theta / omega / c(rho), and the eigenvector
// fluctuation covariance.

#include "spiked/core.hpp"
#include "spiked/cumulants.hpp"
#include "spiked/mp_law.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace spiked {

namespace detail {

template <class Scalar>
void require_supercritical(Scalar ell, Scalar gamma, const char* who) {
    if (!(gamma > Scalar(0)))
        throw DomainError(std::string(who) + ": gamma must be positive");
    const Scalar threshold = Scalar(1) + std::sqrt(gamma);
    if (std::abs(ell - threshold) <= Scalar(1e-12) * threshold)
        throw CriticalSpikeError(std::string(who) + ": spike sits at the phase transition 1 + sqrt(gamma)");
    if (!(ell > threshold))
        throw DomainError(std::string(who) + ": spike must exceed 1 + sqrt(gamma)");
}

} // namespace detail

template <class Scalar>
bool is_supercritical(Scalar ell, Scalar gamma) {
    const Scalar threshold = Scalar(1) + std::sqrt(gamma);
    return ell > threshold && std::abs(ell - threshold) > Scalar(1e-12) * threshold;
}

/// rho(ell, gamma) = ell + gamma ell / (ell - 1).
template <class Scalar>
Scalar spike_forward(Scalar ell, Scalar gamma) {
    detail::require_supercritical(ell, gamma, "spike_forward");
    return ell + gamma * ell / (ell - Scalar(1));
}

/// Inverse of spike_forward: the root of ell^2 - (rho + 1 - gamma) ell + rho = 0 above 1 + sqrt(gamma).
template <class Scalar>
Scalar spike_backward(Scalar rho, Scalar gamma) {
    const MpParams<Scalar> params(gamma);
    if (!(rho - params.upper_edge() > Scalar(1e-9) * params.upper_edge()))
        throw DomainError("spike_backward: rho must lie strictly above the upper MP edge");
    const Scalar b = rho + Scalar(1) - gamma;
    const Scalar disc = b * b - Scalar(4) * rho;
    return (b + std::sqrt(std::max(disc, Scalar(0)))) / Scalar(2);
}

/// d rho / d ell = 1 - gamma / (ell - 1)^2.
template <class Scalar>
Scalar spike_derivative(Scalar ell, Scalar gamma) {
    detail::require_supercritical(ell, gamma, "spike_derivative");
    const Scalar d = ell - Scalar(1);
    return Scalar(1) - gamma / (d * d);
}

template <class Scalar>
struct ResolventConstants {
    Scalar theta;   // lim n^{-1} tr B_n^2(rho)
    Scalar omega;   // lim n^{-1} sum_i b_ii^2
    Scalar c_rho;   // int x (rho - x)^{-2} d(companion)
    Scalar slutsky; // 1 + c(rho) ell
};

template <class Scalar>
ResolventConstants<Scalar> theta_omega_c(Scalar ell, Scalar gamma) {
    detail::require_supercritical(ell, gamma, "theta_omega_c");
    const Scalar d = ell - Scalar(1);
    const Scalar num = (d + gamma) * (d + gamma);
    const Scalar den = d * d - gamma;
    ResolventConstants<Scalar> out;
    out.theta = num / den;
    out.omega = num / (d * d);
    out.c_rho = gamma / den;
    out.slutsky = (Scalar(1) + gamma / d) / (Scalar(1) - gamma / (d * d));
    return out;
}

/// Same constants assembled from the companion Stieltjes transform at rho.
template <class Scalar>
ResolventConstants<Scalar> theta_omega_c_from_resolvent(Scalar ell, Scalar gamma) {
    const MpParams<Scalar> params(gamma);
    const Scalar rho = spike_forward(ell, gamma);
    const Scalar m = companion_stieltjes(rho, params);
    const Scalar dm = companion_stieltjes_deriv(rho, params);
    ResolventConstants<Scalar> out;
    out.theta = rho * rho * dm;
    out.omega = rho * rho * m * m;
    out.c_rho = resolvent_moment(rho, 2, ResolventWeight::x, params);
    out.slutsky = ell * rho * dm;
    return out;
}

/// sigma^2 = 2 ell^2 rho_dot + rho_dot^2 [P^nu, kappa].
template <class Scalar>
Scalar eigenvalue_sigma2(Scalar ell, Scalar gamma, Scalar quartic_contraction) {
    const Scalar rd = spike_derivative(ell, gamma);
    const Scalar s2 = Scalar(2) * ell * ell * rd + rd * rd * quartic_contraction;
    if (!(s2 > Scalar(0)))
        throw InvalidCumulantError("eigenvalue_sigma2: non-positive variance; cumulant contraction is inconsistent");
    return s2;
}

/// Almost-sure limit of the squared cosine between sample and population eigenvectors.
template <class Scalar>
Scalar cosine_limit(Scalar ell, Scalar gamma) {
    if (!(ell > Scalar(0)) || !(gamma > Scalar(0)))
        throw DomainError("cosine_limit: ell and gamma must be positive");
    if (!is_supercritical(ell, gamma))
        return Scalar(0);
    const Scalar d = ell - Scalar(1);
    return (Scalar(1) - gamma / (d * d)) / (Scalar(1) + gamma / d);
}

/// Ordered population spikes with the aspect ratio they are judged against.
struct SpikeSpectrum {
    std::vector<double> ells;
    double gamma = 0.0;

    SpikeSpectrum(std::vector<double> ells_, double gamma_);

    Index m() const { return static_cast<Index>(ells.size()); }
    /// Number of spikes strictly above 1 + sqrt(gamma).
    Index m0() const;
};

/// D_nu Sigma~_nu D_nu for the sample eigenvector projections sqrt(n)(P^T a_nu - e_nu).
///
/// `contractions(mu, mu')` must hold [P^{mu mu' nu nu}, kappa]. Row and column nu are zero.
Mat eigenvector_covariance(const SpikeSpectrum& spectrum, Index nu, const Mat& contractions);

struct TheoryPrediction {
    Index nu = 0;
    double ell = 0.0;
    double gamma = 0.0;
    double rho = 0.0;
    double rho_dot = 0.0;
    double sigma2 = 0.0;
    double cos2_limit = 0.0;
    double theta = 0.0;
    double omega = 0.0;
    double c_rho = 0.0;
    double slutsky = 0.0;
    double quartic_contraction = 0.0;
    Mat evec_cov;
};

/// All predictions for spike nu (zero based) evaluated at gamma_used (normally p / n).
TheoryPrediction predict(const SpikeSpectrum& spectrum, Index nu, double gamma_used, const CumulantTensor& kappa,
                         const Mat& P);

} // namespace spiked
