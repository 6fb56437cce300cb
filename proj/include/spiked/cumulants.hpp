#pragma once

// Fourth-order cumulant tensors of the signal vector xi and their contractions
// against population eigenvectors, plus the J / K moment matrices of the
// bilinear-form CLT.

#include "spiked/core.hpp"

#include <array>
#include <string>
#include <vector>

namespace spiked {

/// Law of the standardized factors z in xi = P Lambda^{1/2} z.
enum class FactorLaw { gaussian, rademacher, uniform };

/// Fourth cumulant E z^4 - 3 of a standardized factor law.
double factor_fourth_cumulant(FactorLaw law);

std::string to_string(FactorLaw law);
FactorLaw factor_law_from_string(const std::string& name);

/// Construction of the signal block xi.
///
///   gaussian      : xi = P Lambda^{1/2} z, z standard Gaussian.
///   iid_factors   : same with z iid from `law`.
///   scale_mixture : xi = w P Lambda^{1/2} z, z Gaussian, w^2 uniform over `w2_support` (mean 1).
struct SignalDistribution {
    enum class Kind { gaussian, iid_factors, scale_mixture };

    Kind kind = Kind::gaussian;
    FactorLaw law = FactorLaw::gaussian;
    std::vector<double> w2_support;

    static SignalDistribution gaussian() { return {}; }
    static SignalDistribution iid_factors(FactorLaw law) { return {Kind::iid_factors, law, {}}; }
    static SignalDistribution scale_mixture(std::vector<double> w2) {
        return {Kind::scale_mixture, FactorLaw::gaussian, std::move(w2)};
    }

    /// E w^4 for scale mixtures (1 otherwise).
    double w4_moment() const;
    /// Throws ConfigError on an inconsistent description.
    void validate() const;
};

/// Dense m^4 tensor, fully symmetric under index permutation.
class CumulantTensor {
public:
    CumulantTensor() = default;
    explicit CumulantTensor(Index m) : m_(m), data_(static_cast<std::size_t>(m * m * m * m), 0.0) {}

    Index dim() const { return m_; }

    double& operator()(Index i, Index j, Index k, Index l) { return data_[offset(i, j, k, l)]; }
    double operator()(Index i, Index j, Index k, Index l) const { return data_[offset(i, j, k, l)]; }

    /// Writes v to all permutations of (i, j, k, l).
    void set_symmetric(Index i, Index j, Index k, Index l, double v);

    double max_abs() const;
    /// Largest deviation between an entry and any of its index permutations.
    double symmetry_defect() const;

    const std::vector<double>& data() const { return data_; }

private:
    std::size_t offset(Index i, Index j, Index k, Index l) const {
        return static_cast<std::size_t>(((i * m_ + j) * m_ + k) * m_ + l);
    }

    Index m_ = 0;
    std::vector<double> data_;
};

/// Exact cumulant tensor of xi for the given construction, rotation P and spikes.
CumulantTensor exact_tensor(const SignalDistribution& dist, const Mat& P, const Vec& ells);

/// Plug-in moment estimator from N x m samples (rows are observations), centered by the sample mean.
CumulantTensor empirical_tensor(const Mat& samples);

/// [P^{mu mu' nu nu'}, kappa] = sum p_{mu,i} p_{mu',j} p_{nu,i'} p_{nu',j'} kappa_{i j i' j'}.
/// Indices are zero based; p_mu is column mu of P.
double contract(const CumulantTensor& kappa, const Mat& P, Index mu, Index mu_p, Index nu, Index nu_p);

/// K^nu_{jj'} = sum_{k,k'} p_{nu,k} p_{nu,k'} kappa_{j j' k k'}.
Mat kappa_nu_matrix(const CumulantTensor& kappa, const Mat& P, Index nu);

/// m x m matrix of [P^{mu mu' nu nu}, kappa] over (mu, mu').
Mat contraction_matrix(const CumulantTensor& kappa, const Mat& P, Index nu);

/// Second- and fourth-order moments of a pair (x, y) in R^L x R^L.
struct BilinearMoments {
    Index L = 0;
    Mat gamma_xx, gamma_xy, gamma_yx, gamma_yy;
    Mat J; // gamma_xx o gamma_yy + gamma_xy o gamma_yx
    Mat K; // partial cumulant matrix
};

/// Joint law of (x, y) given by its 2L x 2L covariance (x first) and the mixed
/// fourth moments M4(l, l') = E[x_l y_l x_l' y_l'].
BilinearMoments bilinear_JK(const Mat& joint_cov, const Mat& mixed_fourth);

/// Plug-in J and K from N x L samples of x and y (rows are observations, assumed mean zero).
BilinearMoments bilinear_JK_from_samples(const Mat& x, const Mat& y);

/// Vectorization of xi used for the matrix quadratic form: l = (j, k) with j <= k,
/// x_l = xi_j, y_l = xi_k. Exact J and K from Sigma and kappa.
BilinearMoments bilinear_JK_from_signal(const Mat& sigma, const CumulantTensor& kappa);

/// Index pairs (j, k), j <= k, in the order used by the vectorized quadratic form.
std::vector<std::array<Index, 2>> upper_pairs(Index m);

/// Limit covariance D = theta J + omega K of the vectorized bilinear forms.
Mat quadform_covariance(const BilinearMoments& moments, double theta, double omega);

} // namespace spiked
