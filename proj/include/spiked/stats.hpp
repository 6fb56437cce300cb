#pragma once

#include "spiked/core.hpp"

#include <span>
#include <vector>

namespace spiked {

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// Kolmogorov-Smirnov distance between the empirical law of `sample` and N(0, variance).
double ks_normal(std::span<const double> sample, double variance = 1.0);

double mean(std::span<const double> x);
/// Unbiased sample variance.
double sample_variance(std::span<const double> x);
double median(std::vector<double> x);

/// Unbiased covariance of the rows of an R x d matrix of observations.
Mat sample_covariance(const Mat& rows);

} // namespace spiked
