#include "spiked/spike_theory.hpp"

#include <cmath>

namespace spiked {

SpikeSpectrum::SpikeSpectrum(std::vector<double> ells_, double gamma_) : ells(std::move(ells_)), gamma(gamma_) {
    if (!(gamma > 0.0))
        throw DomainError("SpikeSpectrum: gamma must be positive");
    for (std::size_t i = 0; i < ells.size(); ++i) {
        if (!(ells[i] > 0.0))
            throw DomainError("SpikeSpectrum: spikes must be positive");
        if (i > 0 && !(ells[i] < ells[i - 1]))
            throw DegenerateSpectrumError("SpikeSpectrum: spikes must be strictly decreasing");
    }
}

Index SpikeSpectrum::m0() const {
    Index count = 0;
    for (double ell : ells)
        if (is_supercritical(ell, gamma))
            ++count;
    return count;
}

Mat eigenvector_covariance(const SpikeSpectrum& spectrum, Index nu, const Mat& contractions) {
    const Index m = spectrum.m();
    if (nu < 0 || nu >= m)
        throw DomainError("eigenvector_covariance: spike index out of range");
    if (contractions.rows() != m || contractions.cols() != m)
        throw DomainError("eigenvector_covariance: contraction matrix must be m x m");
    if (!contractions.isApprox(contractions.transpose(), 1e-12) && contractions.norm() > 0.0)
        throw DomainError("eigenvector_covariance: contraction matrix must be symmetric");
    const double ell_nu = spectrum.ells[static_cast<std::size_t>(nu)];
    const double rd = spike_derivative(ell_nu, spectrum.gamma);

    Vec d = Vec::Zero(m);
    for (Index mu = 0; mu < m; ++mu) {
        if (mu == nu)
            continue;
        const double gap = ell_nu - spectrum.ells[static_cast<std::size_t>(mu)];
        if (gap == 0.0)
            throw DegenerateSpectrumError("eigenvector_covariance: repeated spike");
        d(mu) = 1.0 / gap;
    }

    Mat sigma_tilde = contractions;
    for (Index mu = 0; mu < m; ++mu)
        sigma_tilde(mu, mu) += ell_nu * spectrum.ells[static_cast<std::size_t>(mu)] / rd;

    Mat out = d.asDiagonal() * sigma_tilde * d.asDiagonal();
    out.row(nu).setZero();
    out.col(nu).setZero();
    return out;
}

TheoryPrediction predict(const SpikeSpectrum& spectrum, Index nu, double gamma_used, const CumulantTensor& kappa,
                         const Mat& P) {
    const Index m = spectrum.m();
    if (nu < 0 || nu >= m)
        throw DomainError("predict: spike index out of range");
    if (kappa.dim() != m || P.rows() != m || P.cols() != m)
        throw DomainError("predict: cumulant tensor and axes must match the number of spikes");
    const double ell = spectrum.ells[static_cast<std::size_t>(nu)];

    TheoryPrediction out;
    out.nu = nu;
    out.ell = ell;
    out.gamma = gamma_used;
    out.rho = spike_forward(ell, gamma_used);
    out.rho_dot = spike_derivative(ell, gamma_used);
    out.quartic_contraction = contract(kappa, P, nu, nu, nu, nu);
    out.sigma2 = eigenvalue_sigma2(ell, gamma_used, out.quartic_contraction);
    out.cos2_limit = cosine_limit(ell, gamma_used);
    const auto rc = theta_omega_c(ell, gamma_used);
    out.theta = rc.theta;
    out.omega = rc.omega;
    out.c_rho = rc.c_rho;
    out.slutsky = rc.slutsky;
    const SpikeSpectrum at_used(spectrum.ells, gamma_used);
    out.evec_cov = eigenvector_covariance(at_used, nu, contraction_matrix(kappa, P, nu));
    return out;
}

} // namespace spiked
