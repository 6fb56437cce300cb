#include "spiked/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spiked {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_normal(std::span<const double> sample, double variance) {
    if (sample.empty())
        return 0.0;
    if (!(variance > 0.0))
        throw DomainError("ks_normal: variance must be positive");
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double sd = std::sqrt(variance);
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = normal_cdf(sorted[i] / sd);
        d = std::max(d, std::max(static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n));
    }
    return d;
}

double mean(std::span<const double> x) {
    if (x.empty())
        return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2)
        return 0.0;
    const double mu = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - mu) * (v - mu);
    return s / static_cast<double>(x.size() - 1);
}

double median(std::vector<double> x) {
    if (x.empty())
        return 0.0;
    std::sort(x.begin(), x.end());
    const std::size_t k = x.size() / 2;
    return x.size() % 2 == 1 ? x[k] : 0.5 * (x[k - 1] + x[k]);
}

Mat sample_covariance(const Mat& rows) {
    const Index R = rows.rows();
    if (R < 2)
        return Mat::Zero(rows.cols(), rows.cols());
    const Mat centered = rows.rowwise() - rows.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(R - 1);
}

} // namespace spiked
