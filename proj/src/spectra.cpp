#include "spiked/spectra.hpp"

#include "spiked/symmetric_topk.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace spiked {

namespace {

Mat gram_of_rows(const Mat& X, double scale) {
    Mat G = Mat::Zero(X.rows(), X.rows());
    G.selfadjointView<Eigen::Lower>().rankUpdate(X, scale);
    return G.selfadjointView<Eigen::Lower>();
}

Mat gram_of_cols(const Mat& X, double scale) {
    Mat G = Mat::Zero(X.cols(), X.cols());
    G.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), scale);
    return G.selfadjointView<Eigen::Lower>();
}

Mat stacked(const Dataset& data) {
    Mat X(data.m() + data.p(), data.n());
    X.topRows(data.m()) = data.X1;
    X.bottomRows(data.p()) = data.X2;
    return X;
}

double sym_operator_norm(const Mat& A) {
    if (A.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace

Vec noise_spectrum(const Dataset& data) {
    const Index p = data.p();
    const Index n = data.n();
    if (p == 0)
        return Vec();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (p <= n)
        return symmetric_eigenvalues(gram_of_rows(data.X2, inv_n));
    return symmetric_eigenvalues(gram_of_cols(data.X2, inv_n));
}

NoiseBlocks NoiseBlocks::from(const Dataset& data, ResolventRoute route) {
    const double inv_n = 1.0 / static_cast<double>(data.n());
    NoiseBlocks b;
    b.m = data.m();
    b.p = data.p();
    b.n = data.n();
    if (route == ResolventRoute::automatic)
        route = b.p <= b.n ? ResolventRoute::noise : ResolventRoute::gram;
    b.route = route;
    b.S11 = gram_of_rows(data.X1, inv_n);
    if (b.p == 0) {
        b.route = ResolventRoute::noise;
        return b;
    }
    if (route == ResolventRoute::noise) {
        b.gram = gram_of_rows(data.X2, inv_n);
        b.S21 = data.X2 * data.X1.transpose() * inv_n;
    } else {
        b.gram = gram_of_cols(data.X2, inv_n);
        b.X1t = data.X1.transpose();
    }
    return b;
}

SampleSpectrum decompose(const Dataset& data, const PopulationAxes& axes, EigenRoute route, NoiseBlocks* blocks) {
    const Index m = data.m();
    const Index p = data.p();
    const Index n = data.n();
    if (axes.P.rows() != m)
        throw SolverError("decompose: population axes do not match the signal dimension", data.replicate);
    if (route == EigenRoute::automatic)
        route = n < m + p ? EigenRoute::gram : EigenRoute::covariance;
    const double inv_n = 1.0 / static_cast<double>(n);

    SampleSpectrum out;
    out.gamma_n = data.gamma_n();
    const Mat X = stacked(data);

    try {
        if (route == EigenRoute::covariance) {
            const Mat S = gram_of_rows(X, inv_n);
            const TopEigenpairs top = top_eigenpairs(S, m);
            out.ell_hats = top.values;
            out.full_vecs = top.vectors;
            if (p > 0 && p <= n) {
                out.noise_eigenvalues = symmetric_eigenvalues(S.bottomRightCorner(p, p));
                if (blocks) {
                    blocks->route = ResolventRoute::noise;
                    blocks->m = m;
                    blocks->p = p;
                    blocks->n = n;
                    blocks->S11 = S.topLeftCorner(m, m);
                    blocks->S21 = S.bottomLeftCorner(p, m);
                    blocks->gram = S.bottomRightCorner(p, p);
                    blocks->X1t.resize(0, 0);
                }
            } else {
                out.noise_eigenvalues = noise_spectrum(data);
                if (blocks)
                    *blocks = NoiseBlocks::from(data);
            }
        } else {
            if (n < m)
                throw SolverError("decompose: Gram route needs n >= m", data.replicate);
            const Mat G = gram_of_cols(X, inv_n);
            const TopEigenpairs top = top_eigenpairs(G, m);
            out.ell_hats = top.values;
            out.full_vecs.resize(m + p, m);
            for (Index k = 0; k < m; ++k) {
                const double lambda = top.values(k);
                if (!(lambda > 0.0))
                    throw SolverError("decompose: non-positive Gram eigenvalue among the top m", data.replicate);
                out.full_vecs.col(k) = X * top.vectors.col(k) / std::sqrt(static_cast<double>(n) * lambda);
                out.full_vecs.col(k).normalize();
            }
            if (blocks) {
                *blocks = NoiseBlocks::from(data);
                if (p > 0)
                    out.noise_eigenvalues = symmetric_eigenvalues(blocks->gram).head(std::min(p, n));
            } else {
                out.noise_eigenvalues = noise_spectrum(data);
            }
        }
    } catch (const SolverError&) {
        throw;
    } catch (const std::exception& e) {
        throw SolverError(std::string("decompose: ") + e.what(), data.replicate);
    }

    out.mu1 = out.noise_eigenvalues.size() > 0 ? out.noise_eigenvalues(0) : 0.0;
    out.u_vecs.resize(m, m);
    out.a_vecs.resize(m, m);
    out.v_norm2s.resize(m);
    out.cosines2.resize(m);
    for (Index k = 0; k < m; ++k) {
        auto col = out.full_vecs.col(k);
        if (axes.P.col(k).dot(col.head(m)) < 0.0)
            col = -col;
        out.u_vecs.col(k) = col.head(m);
        out.v_norm2s(k) = col.tail(p).squaredNorm();
        const double u_norm = col.head(m).norm();
        out.a_vecs.col(k) = u_norm > 0.0 ? Vec(col.head(m) / u_norm) : Vec::Zero(m);
        const double proj = axes.P.col(k).dot(col.head(m));
        out.cosines2(k) = proj * proj;
    }
    return out;
}

SchurResolvent::SchurResolvent(const NoiseBlocks& b, double t, std::optional<double> mu1)
    : t_(t), route_(b.route) {
    const double inv_n = 1.0 / static_cast<double>(b.n);
    if (!(t > 0.0))
        throw ResolventDomainError("SchurResolvent: t must be positive");

    if (b.p == 0) {
        K_ = b.S11;
        Q_ = Mat::Zero(b.m, b.m);
        trace_B_ = static_cast<double>(b.n);
        route_ = ResolventRoute::noise;
        return;
    }

    const double top = mu1 ? *mu1 : symmetric_eigenvalues(b.gram)(0);
    if (!(t - top > 1e-8 * t))
        throw ResolventDomainError("SchurResolvent: t lies inside or too close to the noise spectrum");

    Mat M = -b.gram;
    M.diagonal().array() += t;
    llt_.compute(M);
    if (llt_.info() != Eigen::Success)
        throw ResolventDomainError("SchurResolvent: t I - S22 is not positive definite");

    if (route_ == ResolventRoute::noise) {
        const Mat Z = llt_.solve(b.S21);
        K_ = b.S11 + b.S21.transpose() * Z;
        Q_ = Z.transpose() * Z;
        // the n - p zero eigenvalues of the Gram matrix contribute 1 each to tr B_n
        trace_offset_ = static_cast<double>(b.n - b.p);
    } else {
        const Mat Y = llt_.solve(b.X1t);
        K_ = t * inv_n * b.X1t.transpose() * Y;
        Q_ = inv_n * Y.transpose() * b.gram * Y;
    }
    K_ = 0.5 * (K_ + K_.transpose()).eval();
    Q_ = 0.5 * (Q_ + Q_.transpose()).eval();
}

SchurResolvent::SchurResolvent(const Dataset& data, double t, ResolventRoute route, std::optional<double> mu1)
    : SchurResolvent(NoiseBlocks::from(data, route), t, mu1) {}

double SchurResolvent::trace_B() const {
    if (!trace_B_) {
        // t tr (t - M)^{-1} = t ||L^{-1}||_F^2 for the Cholesky factor L
        const Index d = llt_.rows();
        const Mat Linv = llt_.matrixL().solve(Mat::Identity(d, d));
        trace_B_ = trace_offset_ + t_ * Linv.squaredNorm();
    }
    return *trace_B_;
}

Mat schur_K(const Dataset& data, double t, ResolventRoute route) { return SchurResolvent(data, t, route).K(); }

Mat q_matrix(const Dataset& data, double t, ResolventRoute route) { return SchurResolvent(data, t, route).Q(); }

Mat quadform_residual(const Dataset& data, const Mat& sigma, const BSpec& b) {
    const double n = static_cast<double>(data.n());
    if (sigma.rows() != data.m() || sigma.cols() != data.m())
        throw DomainError("quadform_residual: Sigma must be m x m");
    if (std::holds_alternative<IdentityB>(b))
        return gram_of_rows(data.X1, 1.0 / n) - sigma;
    if (const auto* r = std::get_if<ResolventB>(&b)) {
        const SchurResolvent sr(data, r->t);
        return sr.K() - sr.trace_B() / n * sigma;
    }
    const Mat& B = std::get<CustomB>(b).B;
    if (B.rows() != data.n() || B.cols() != data.n())
        throw DomainError("quadform_residual: custom B must be n x n");
    return data.X1 * B * data.X1.transpose() / n - B.trace() / n * sigma;
}

SchurIdentityCheck check_schur_identities(const Dataset& data, const SampleSpectrum& spectrum, Index nu) {
    return check_schur_identities(NoiseBlocks::from(data), spectrum, nu);
}

SchurIdentityCheck check_schur_identities(const NoiseBlocks& blocks, const SampleSpectrum& spectrum, Index nu) {
    const Index m = blocks.m;
    const double t = spectrum.ell_hats(nu);
    const SchurResolvent sr(blocks, t, spectrum.mu1);
    Mat D = sr.K();
    D.diagonal().array() -= t;

    SchurIdentityCheck out;
    out.det_abs = std::abs(D.determinant());
    out.scale = std::pow(sym_operator_norm(sr.K()), static_cast<double>(m));
    out.det_ok = out.det_abs <= 1e-8 * out.scale;

    const Vec a = spectrum.a_vecs.col(nu);
    const double lhs = a.squaredNorm() + a.dot(sr.Q() * a);
    const double rhs = 1.0 / spectrum.u_vecs.col(nu).squaredNorm();
    out.q_rel = std::abs(lhs - rhs) / rhs;
    out.q_ok = out.q_rel <= 1e-8;
    return out;
}

} // namespace spiked
