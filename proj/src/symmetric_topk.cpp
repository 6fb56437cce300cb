#include "spiked/symmetric_topk.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace spiked {

namespace {

// LU with partial pivoting of the tridiagonal T - shift I (LAPACK dgttrf layout).
class TridiagonalLu {
public:
    TridiagonalLu(const Vec& diag, const Vec& sub, double shift, double tiny) {
        const Index n = diag.size();
        d_ = diag.array() - shift;
        dl_ = sub;
        du_ = sub;
        du2_ = Vec::Zero(std::max<Index>(n - 2, 0));
        pivot_.assign(static_cast<std::size_t>(std::max<Index>(n - 1, 0)), false);
        for (Index i = 0; i + 1 < n; ++i) {
            if (std::abs(d_(i)) >= std::abs(dl_(i))) {
                if (d_(i) == 0.0)
                    d_(i) = tiny;
                const double fact = dl_(i) / d_(i);
                dl_(i) = fact;
                d_(i + 1) -= fact * du_(i);
            } else {
                const double fact = d_(i) / dl_(i);
                d_(i) = dl_(i);
                dl_(i) = fact;
                const double temp = du_(i);
                du_(i) = d_(i + 1);
                d_(i + 1) = temp - fact * d_(i + 1);
                if (i + 2 < n) {
                    du2_(i) = du_(i + 1);
                    du_(i + 1) = -fact * du_(i + 1);
                }
                pivot_[static_cast<std::size_t>(i)] = true;
            }
        }
        for (Index i = 0; i < n; ++i)
            if (std::abs(d_(i)) < tiny)
                d_(i) = d_(i) < 0.0 ? -tiny : tiny;
    }

    void solve_in_place(Vec& b) const {
        const Index n = d_.size();
        for (Index i = 0; i + 1 < n; ++i) {
            if (pivot_[static_cast<std::size_t>(i)])
                std::swap(b(i), b(i + 1));
            b(i + 1) -= dl_(i) * b(i);
        }
        b(n - 1) /= d_(n - 1);
        if (n > 1)
            b(n - 2) = (b(n - 2) - du_(n - 2) * b(n - 1)) / d_(n - 2);
        for (Index i = n - 3; i >= 0; --i)
            b(i) = (b(i) - du_(i) * b(i + 1) - du2_(i) * b(i + 2)) / d_(i);
    }

private:
    Vec d_, dl_, du_, du2_;
    std::vector<bool> pivot_;
};

} // namespace

TopEigenpairs top_eigenpairs(const Mat& S, Index k) {
    const Index d = S.rows();
    if (S.cols() != d || k < 1 || k > d)
        throw DomainError("top_eigenpairs: need a square matrix and 1 <= k <= dim");

    TopEigenpairs out;
    if (d <= 2) {
        Eigen::SelfAdjointEigenSolver<Mat> es(S);
        out.values = es.eigenvalues().reverse().head(k);
        out.vectors = es.eigenvectors().rowwise().reverse().leftCols(k);
        return out;
    }

    Eigen::Tridiagonalization<Mat> tri(S);
    const Vec diag = tri.diagonal();
    const Vec sub = tri.subDiagonal();

    Eigen::SelfAdjointEigenSolver<Mat> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("top_eigenpairs: tridiagonal QR did not converge");
    out.values = es.eigenvalues().reverse().head(k);

    double tnorm = 0.0;
    for (Index i = 0; i < d; ++i) {
        double row = std::abs(diag(i));
        if (i > 0) row += std::abs(sub(i - 1));
        if (i + 1 < d) row += std::abs(sub(i));
        tnorm = std::max(tnorm, row);
    }
    const double eps = std::numeric_limits<double>::epsilon();
    const double tiny = std::max(eps * tnorm, std::numeric_limits<double>::min());
    const double cluster_tol = 1e-3 * tnorm;

    Mat Y(d, k);
    std::mt19937_64 engine(0x5eedULL);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Index cluster_start = 0;
    double prev_shift = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k; ++j) {
        double shift = out.values(j);
        if (j > 0 && std::abs(out.values(j - 1) - out.values(j)) > cluster_tol)
            cluster_start = j;
        // separate numerically identical shifts so inverse iteration does not collapse
        if (j > cluster_start && shift >= prev_shift - 10.0 * eps * tnorm)
            shift = prev_shift - 10.0 * eps * tnorm;
        prev_shift = shift;

        const TridiagonalLu lu(diag, sub, shift, tiny);
        Vec y(d);
        for (Index i = 0; i < d; ++i) y(i) = unif(engine);
        y.normalize();
        for (int it = 0; it < 3; ++it) {
            lu.solve_in_place(y);
            for (Index c = cluster_start; c < j; ++c) y -= Y.col(c).dot(y) * Y.col(c);
            y.normalize();
        }
        Y.col(j) = y;
    }

    out.vectors = tri.matrixQ() * Y;
    out.vectors.colwise().normalize();
    return out;
}

Vec symmetric_eigenvalues(const Mat& S) {
    if (S.rows() == 0)
        return Vec();
    Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("symmetric_eigenvalues: eigensolver did not converge");
    return es.eigenvalues().reverse();
}

} // namespace spiked
