#include "spiked/cumulants.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spiked {

double factor_fourth_cumulant(FactorLaw law) {
    switch (law) {
    case FactorLaw::gaussian: return 0.0;
    case FactorLaw::rademacher: return -2.0;
    case FactorLaw::uniform: return 9.0 / 5.0 - 3.0;
    }
    return 0.0;
}

std::string to_string(FactorLaw law) {
    switch (law) {
    case FactorLaw::gaussian: return "gaussian";
    case FactorLaw::rademacher: return "rademacher";
    case FactorLaw::uniform: return "uniform";
    }
    return "?";
}

FactorLaw factor_law_from_string(const std::string& name) {
    if (name == "gaussian") return FactorLaw::gaussian;
    if (name == "rademacher") return FactorLaw::rademacher;
    if (name == "uniform" || name == "uniform_pm_sqrt3") return FactorLaw::uniform;
    throw ConfigError("unknown factor law '" + name + "'");
}

double SignalDistribution::w4_moment() const {
    if (kind != Kind::scale_mixture || w2_support.empty())
        return 1.0;
    double s = 0.0;
    for (double w2 : w2_support) s += w2 * w2;
    return s / static_cast<double>(w2_support.size());
}

void SignalDistribution::validate() const {
    if (kind != Kind::scale_mixture)
        return;
    if (w2_support.empty())
        throw ConfigError("scale_mixture: w2 support is empty");
    double mean = 0.0;
    for (double w2 : w2_support) {
        if (!(w2 >= 0.0))
            throw ConfigError("scale_mixture: w2 values must be non-negative");
        mean += w2;
    }
    mean /= static_cast<double>(w2_support.size());
    if (std::abs(mean - 1.0) > 1e-12)
        throw ConfigError("scale_mixture: E w^2 must equal 1");
}

void CumulantTensor::set_symmetric(Index i, Index j, Index k, Index l, double v) {
    std::array<Index, 4> idx{i, j, k, l};
    std::sort(idx.begin(), idx.end());
    do {
        (*this)(idx[0], idx[1], idx[2], idx[3]) = v;
    } while (std::next_permutation(idx.begin(), idx.end()));
}

double CumulantTensor::max_abs() const {
    double r = 0.0;
    for (double v : data_) r = std::max(r, std::abs(v));
    return r;
}

double CumulantTensor::symmetry_defect() const {
    double worst = 0.0;
    for (Index i = 0; i < m_; ++i)
        for (Index j = 0; j < m_; ++j)
            for (Index k = 0; k < m_; ++k)
                for (Index l = 0; l < m_; ++l) {
                    std::array<Index, 4> idx{i, j, k, l};
                    const double ref = (*this)(i, j, k, l);
                    std::sort(idx.begin(), idx.end());
                    do {
                        worst = std::max(worst, std::abs((*this)(idx[0], idx[1], idx[2], idx[3]) - ref));
                    } while (std::next_permutation(idx.begin(), idx.end()));
                }
    return worst;
}

CumulantTensor exact_tensor(const SignalDistribution& dist, const Mat& P, const Vec& ells) {
    const Index m = P.rows();
    if (P.cols() != m || ells.size() != m)
        throw ConfigError("exact_tensor: P must be m x m and ells of length m");
    dist.validate();
    CumulantTensor kappa(m);
    switch (dist.kind) {
    case SignalDistribution::Kind::gaussian:
        break;
    case SignalDistribution::Kind::iid_factors: {
        const double k4 = factor_fourth_cumulant(dist.law);
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < m; ++j)
                for (Index k = 0; k < m; ++k)
                    for (Index l = 0; l < m; ++l) {
                        double s = 0.0;
                        for (Index a = 0; a < m; ++a)
                            s += ells(a) * ells(a) * P(i, a) * P(j, a) * P(k, a) * P(l, a);
                        kappa(i, j, k, l) = k4 * s;
                    }
        break;
    }
    case SignalDistribution::Kind::scale_mixture: {
        const double excess = dist.w4_moment() - 1.0;
        const Mat sigma = P * ells.asDiagonal() * P.transpose();
        for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < m; ++j)
                for (Index k = 0; k < m; ++k)
                    for (Index l = 0; l < m; ++l)
                        kappa(i, j, k, l) = excess * (sigma(i, j) * sigma(k, l) + sigma(i, k) * sigma(j, l) +
                                                      sigma(i, l) * sigma(j, k));
        break;
    }
    }
    return kappa;
}

CumulantTensor empirical_tensor(const Mat& samples) {
    const Index N = samples.rows();
    const Index m = samples.cols();
    if (N < 4)
        throw DomainError("empirical_tensor: need at least 4 samples");
    const Mat centered = samples.rowwise() - samples.colwise().mean();
    const double inv_n = 1.0 / static_cast<double>(N);
    const Mat sigma = centered.transpose() * centered * inv_n;

    CumulantTensor kappa(m);
    Vec prod(N);
    for (Index i = 0; i < m; ++i)
        for (Index j = i; j < m; ++j)
            for (Index k = j; k < m; ++k)
                for (Index l = k; l < m; ++l) {
                    prod = centered.col(i).cwiseProduct(centered.col(j)).cwiseProduct(centered.col(k)).cwiseProduct(
                        centered.col(l));
                    const double moment = prod.sum() * inv_n;
                    const double v = moment - sigma(i, j) * sigma(k, l) - sigma(i, k) * sigma(j, l) -
                                     sigma(i, l) * sigma(j, k);
                    kappa.set_symmetric(i, j, k, l, v);
                }
    return kappa;
}

namespace {

void check_index(Index idx, Index m, const char* who) {
    if (idx < 0 || idx >= m)
        throw DomainError(std::string(who) + ": index out of range");
}

} // namespace

double contract(const CumulantTensor& kappa, const Mat& P, Index mu, Index mu_p, Index nu, Index nu_p) {
    const Index m = kappa.dim();
    if (P.rows() != m || P.cols() != m)
        throw DomainError("contract: P must match the tensor dimension");
    for (Index idx : {mu, mu_p, nu, nu_p}) check_index(idx, m, "contract");
    double s = 0.0;
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j)
            for (Index k = 0; k < m; ++k)
                for (Index l = 0; l < m; ++l)
                    s += P(i, mu) * P(j, mu_p) * P(k, nu) * P(l, nu_p) * kappa(i, j, k, l);
    return s;
}

Mat kappa_nu_matrix(const CumulantTensor& kappa, const Mat& P, Index nu) {
    const Index m = kappa.dim();
    check_index(nu, m, "kappa_nu_matrix");
    Mat K = Mat::Zero(m, m);
    for (Index j = 0; j < m; ++j)
        for (Index jp = 0; jp < m; ++jp) {
            double s = 0.0;
            for (Index k = 0; k < m; ++k)
                for (Index kp = 0; kp < m; ++kp)
                    s += P(k, nu) * P(kp, nu) * kappa(j, jp, k, kp);
            K(j, jp) = s;
        }
    return K;
}

Mat contraction_matrix(const CumulantTensor& kappa, const Mat& P, Index nu) {
    const Mat K = kappa_nu_matrix(kappa, P, nu);
    Mat C = P.transpose() * K * P;
    return 0.5 * (C + C.transpose());
}

namespace {

void fill_J(BilinearMoments& out) {
    out.J = out.gamma_xx.cwiseProduct(out.gamma_yy) + out.gamma_xy.cwiseProduct(out.gamma_yx);
}

} // namespace

BilinearMoments bilinear_JK(const Mat& joint_cov, const Mat& mixed_fourth) {
    const Index L = mixed_fourth.rows();
    if (mixed_fourth.cols() != L || joint_cov.rows() != 2 * L || joint_cov.cols() != 2 * L)
        throw DomainError("bilinear_JK: joint covariance must be 2L x 2L and fourth moments L x L");
    BilinearMoments out;
    out.L = L;
    out.gamma_xx = joint_cov.topLeftCorner(L, L);
    out.gamma_xy = joint_cov.topRightCorner(L, L);
    out.gamma_yx = joint_cov.bottomLeftCorner(L, L);
    out.gamma_yy = joint_cov.bottomRightCorner(L, L);
    fill_J(out);
    out.K.resize(L, L);
    for (Index a = 0; a < L; ++a)
        for (Index b = 0; b < L; ++b)
            out.K(a, b) = mixed_fourth(a, b) - out.gamma_xy(a, a) * out.gamma_xy(b, b) -
                          out.gamma_xy(a, b) * out.gamma_xy(b, a) - out.gamma_xx(a, b) * out.gamma_yy(a, b);
    out.K = 0.5 * (out.K + out.K.transpose());
    return out;
}

BilinearMoments bilinear_JK_from_samples(const Mat& x, const Mat& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw DomainError("bilinear_JK_from_samples: x and y must have the same shape");
    const Index N = x.rows();
    const Index L = x.cols();
    if (N < 2)
        throw DomainError("bilinear_JK_from_samples: need at least 2 samples");
    Mat joined(N, 2 * L);
    joined << x, y;
    const double inv_n = 1.0 / static_cast<double>(N);
    const Mat joint_cov = joined.transpose() * joined * inv_n;
    const Mat xy = x.cwiseProduct(y);
    const Mat mixed_fourth = xy.transpose() * xy * inv_n;
    return bilinear_JK(joint_cov, mixed_fourth);
}

std::vector<std::array<Index, 2>> upper_pairs(Index m) {
    std::vector<std::array<Index, 2>> pairs;
    for (Index j = 0; j < m; ++j)
        for (Index k = j; k < m; ++k) pairs.push_back({j, k});
    return pairs;
}

BilinearMoments bilinear_JK_from_signal(const Mat& sigma, const CumulantTensor& kappa) {
    const Index m = sigma.rows();
    if (kappa.dim() != m)
        throw DomainError("bilinear_JK_from_signal: dimension mismatch");
    const auto pairs = upper_pairs(m);
    const Index L = static_cast<Index>(pairs.size());
    BilinearMoments out;
    out.L = L;
    out.gamma_xx.resize(L, L);
    out.gamma_xy.resize(L, L);
    out.gamma_yx.resize(L, L);
    out.gamma_yy.resize(L, L);
    out.K.resize(L, L);
    for (Index a = 0; a < L; ++a) {
        const auto [j, k] = pairs[static_cast<std::size_t>(a)];
        for (Index b = 0; b < L; ++b) {
            const auto [jp, kp] = pairs[static_cast<std::size_t>(b)];
            out.gamma_xx(a, b) = sigma(j, jp);
            out.gamma_xy(a, b) = sigma(j, kp);
            out.gamma_yx(a, b) = sigma(k, jp);
            out.gamma_yy(a, b) = sigma(k, kp);
            out.K(a, b) = kappa(j, k, jp, kp);
        }
    }
    fill_J(out);
    return out;
}

Mat quadform_covariance(const BilinearMoments& moments, double theta, double omega) {
    return theta * moments.J + omega * moments.K;
}

} // namespace spiked
