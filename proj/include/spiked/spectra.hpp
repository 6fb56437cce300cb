#pragma once

// Sample eigenstructure of one dataset and the Schur-complement quantities
// built from the noise resolvent (t I - S22)^{-1}.

#include "spiked/core.hpp"
#include "spiked/model_gen.hpp"

#include <Eigen/Cholesky>

#include <optional>
#include <variant>

namespace spiked {

struct SampleSpectrum {
    Vec ell_hats;   // top-m eigenvalues of S, descending
    Mat full_vecs;  // (m + p) x m unit sample eigenvectors, sign-aligned
    Mat u_vecs;     // m x m, column nu = signal-block part u_nu
    Vec v_norm2s;   // ||v_nu||^2
    Mat a_vecs;     // m x m, column nu = u_nu / ||u_nu||
    Vec cosines2;   // <u_nu, p_nu>^2
    double mu1 = 0; // largest eigenvalue of S22
    double gamma_n = 0;
    Vec noise_eigenvalues; // nonzero-block spectrum of S22 (length min(p, n)), descending
};

/// Which matrix the top eigenpairs are taken from.
enum class EigenRoute {
    automatic, // Gram n x n when n < m + p, else S
    covariance,
    gram,
};

/// Spectrum of S22 = n^{-1} X2 X2^T restricted to its min(p, n) possibly-nonzero eigenvalues, descending.
Vec noise_spectrum(const Dataset& data);

/// Evaluation route for the Schur complement.
enum class ResolventRoute {
    automatic, // the smaller of p x p and n x n
    noise,     // (t I_p - S22)^{-1}
    gram,      // B_n(t) = t (t I_n - n^{-1} X2^T X2)^{-1}
};

/// Data products shared by resolvent evaluations at different t.
struct NoiseBlocks {
    ResolventRoute route = ResolventRoute::noise; // resolved: noise or gram
    Index m = 0, p = 0, n = 0;
    Mat S11;  // m x m
    Mat S21;  // p x m, noise route only
    Mat gram; // S22 (noise route) or n^{-1} X2^T X2 (gram route)
    Mat X1t;  // n x m, gram route only

    static NoiseBlocks from(const Dataset& data, ResolventRoute route = ResolventRoute::automatic);
};

/// Top-m eigenpairs of S = n^{-1} X X^T split into signal and noise blocks.
/// Signs are fixed so that p_nu^T a_nu >= 0.
/// When `blocks` is non-null it receives the resolvent blocks, reusing products already formed.
SampleSpectrum decompose(const Dataset& data, const PopulationAxes& axes, EigenRoute route = EigenRoute::automatic,
                         NoiseBlocks* blocks = nullptr);

/// One factorization of the noise resolvent at t, shared by K(t), Q(t) and tr B_n(t).
///
/// Requires t - mu1 > 1e-8 t; throws ResolventDomainError otherwise. When mu1 is not
/// supplied it is computed from the noise block.
class SchurResolvent {
public:
    SchurResolvent(const NoiseBlocks& blocks, double t, std::optional<double> mu1 = std::nullopt);
    SchurResolvent(const Dataset& data, double t, ResolventRoute route = ResolventRoute::automatic,
                   std::optional<double> mu1 = std::nullopt);

    /// K(t) = S11 + S12 (t - S22)^{-1} S21.
    const Mat& K() const { return K_; }
    /// Q(t) = S12 (t - S22)^{-2} S21.
    const Mat& Q() const { return Q_; }
    /// tr B_n(t) with B_n(t) = t (t I_n - n^{-1} X2^T X2)^{-1}.
    double trace_B() const;
    double t() const { return t_; }
    ResolventRoute route() const { return route_; }

private:
    double t_;
    ResolventRoute route_;
    Mat K_, Q_;
    Eigen::LLT<Mat> llt_;
    double trace_offset_ = 0.0;
    mutable std::optional<double> trace_B_;
};

Mat schur_K(const Dataset& data, double t, ResolventRoute route = ResolventRoute::automatic);
Mat q_matrix(const Dataset& data, double t, ResolventRoute route = ResolventRoute::automatic);

/// B_n choices for the concentration residual n^{-1} X1 B_n X1^T - n^{-1} tr(B_n) Sigma.
struct IdentityB {};
struct ResolventB {
    double t;
};
struct CustomB {
    Mat B; // n x n symmetric
};
using BSpec = std::variant<IdentityB, ResolventB, CustomB>;

Mat quadform_residual(const Dataset& data, const Mat& sigma, const BSpec& b);

/// |det(K(l) - l I)| at l = ell_hat together with the scale ||K||^m it is judged against.
struct SchurIdentityCheck {
    double det_abs = 0.0;
    double scale = 0.0;   // ||K(l)||^m
    double q_rel = 0.0;   // |a^T (I + Q) a - ||u||^{-2}| / ||u||^{-2}
    bool det_ok = false;  // det_abs <= 1e-8 scale
    bool q_ok = false;    // q_rel <= 1e-8
};

SchurIdentityCheck check_schur_identities(const NoiseBlocks& blocks, const SampleSpectrum& spectrum, Index nu);
SchurIdentityCheck check_schur_identities(const Dataset& data, const SampleSpectrum& spectrum, Index nu);

} // namespace spiked
