#pragma once

// Marchenko-Pastur law F_gamma, its companion law, and the real-axis
// Stieltjes transform used by the spike asymptotics.
//
// Conventions:
//   F_gamma        : limit ESD of the p x p noise covariance; atom 1 - 1/gamma at 0 if gamma > 1.
//   companion law  : (1 - gamma) delta_0 + gamma F_gamma, limit ESD of the n x n Gram matrix;
//                    atom 1 - gamma at 0 if gamma < 1.
//   m(z)           : int (x - z)^{-1} d(companion)(x), evaluated for real z > b_gamma only.

#include "spiked/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace spiked {

template <class Scalar>
struct MpParams {
    Scalar gamma;

    explicit MpParams(Scalar g) : gamma(g) {
        if (!(g > Scalar(0)))
            throw DomainError("MpParams: gamma must be positive");
    }

    Scalar lower_edge() const {
        const Scalar s = std::sqrt(gamma);
        return (Scalar(1) - s) * (Scalar(1) - s);
    }
    Scalar upper_edge() const {
        const Scalar s = std::sqrt(gamma);
        return (Scalar(1) + s) * (Scalar(1) + s);
    }
};

/// A point mass (location, mass). Mass zero means no atom.
template <class Scalar>
struct Atom {
    Scalar location;
    Scalar mass;
};

template <class Scalar>
std::pair<Scalar, Scalar> mp_support(const MpParams<Scalar>& params) {
    return {params.lower_edge(), params.upper_edge()};
}

template <class Scalar>
std::pair<Scalar, Scalar> mp_support(Scalar gamma) {
    return mp_support(MpParams<Scalar>(gamma));
}

/// Density of the continuous part of F_gamma; zero off [a, b].
template <class Scalar>
Scalar mp_density(Scalar x, const MpParams<Scalar>& params) {
    const auto [a, b] = mp_support(params);
    if (x <= a || x >= b || x <= Scalar(0))
        return Scalar(0);
    return std::sqrt((b - x) * (x - a)) / (Scalar(2) * std::numbers::pi_v<Scalar> * params.gamma * x);
}

/// Atom of F_gamma at zero (mass 1 - 1/gamma for gamma > 1).
template <class Scalar>
Atom<Scalar> mp_atom(const MpParams<Scalar>& params) {
    const Scalar mass = params.gamma > Scalar(1) ? Scalar(1) - Scalar(1) / params.gamma : Scalar(0);
    return {Scalar(0), mass};
}

/// Atom of the companion law at zero (mass 1 - gamma for gamma < 1).
template <class Scalar>
Atom<Scalar> companion_atom(const MpParams<Scalar>& params) {
    const Scalar mass = params.gamma < Scalar(1) ? Scalar(1) - params.gamma : Scalar(0);
    return {Scalar(0), mass};
}

/// Density of the continuous part of the companion law, gamma * f_gamma(x).
template <class Scalar>
Scalar companion_density(Scalar x, const MpParams<Scalar>& params) {
    return params.gamma * mp_density(x, params);
}

namespace detail {

template <class Scalar>
void require_right_of_bulk(Scalar z, const MpParams<Scalar>& params, const char* who) {
    if (!(z - params.upper_edge() >= Scalar(1e-9)))
        throw DomainError(std::string(who) + ": z must exceed the upper MP edge by at least 1e-9");
}

} // namespace detail

/// Stieltjes transform of the companion law at real z > b_gamma.
///
/// Root of z m^2 + (z + 1 - gamma) m + 1 = 0 on the branch with m -> 0- as z -> inf.
/// The root is taken as 2 / (-(z + 1 - gamma) - sqrt(disc)), the same root as
/// (-(z + 1 - gamma) + sqrt(disc)) / (2z) but without cancellation at large z.
template <class Scalar>
Scalar companion_stieltjes(Scalar z, const MpParams<Scalar>& params) {
    detail::require_right_of_bulk(z, params, "companion_stieltjes");
    const Scalar b = z + Scalar(1) - params.gamma;
    const Scalar disc = b * b - Scalar(4) * z;
    const Scalar root = Scalar(2) / (-b - std::sqrt(std::max(disc, Scalar(0))));
    const Scalar floor = -Scalar(1) / (Scalar(1) + std::sqrt(params.gamma));
    if (!(root < Scalar(0) && root > floor))
        throw DomainError("companion_stieltjes: root left the physical branch");
    return root;
}

/// m'(z) = int (z - x)^{-2} d(companion)(x), by implicit differentiation of the MP equation.
template <class Scalar>
Scalar companion_stieltjes_deriv(Scalar z, const MpParams<Scalar>& params) {
    const Scalar m = companion_stieltjes(z, params);
    return -(m * m + m) / (Scalar(2) * z * m + z + Scalar(1) - params.gamma);
}

/// Residual z m^2 + (z + 1 - gamma) m + 1 of the MP equation.
template <class Scalar>
Scalar mp_equation_residual(Scalar z, Scalar m, const MpParams<Scalar>& params) {
    return z * m * m + (z + Scalar(1) - params.gamma) * m + Scalar(1);
}

enum class ResolventWeight { none, x };

/// int w(x) (z - x)^{-k} d(companion)(x) for k in {1, 2} and w in {1, x}.
template <class Scalar>
Scalar resolvent_moment(Scalar z, int k, ResolventWeight weight, const MpParams<Scalar>& params) {
    if (k != 1 && k != 2)
        throw DomainError("resolvent_moment: only k = 1 or k = 2 are supported");
    const Scalar m = companion_stieltjes(z, params);
    if (weight == ResolventWeight::none) {
        return k == 1 ? -m : companion_stieltjes_deriv(z, params);
    }
    // x (z - x)^{-k} = z (z - x)^{-k} - (z - x)^{-(k-1)}
    if (k == 1)
        return -z * m - Scalar(1);
    return z * companion_stieltjes_deriv(z, params) + m;
}

} // namespace spiked
