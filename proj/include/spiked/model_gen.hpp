#pragma once

// Seedable generation of spiked-model datasets X = [X1; X2]: an m-dimensional
// signal block with covariance P Lambda P^T and a p-dimensional iid noise block.

#include "spiked/core.hpp"
#include "spiked/cumulants.hpp"

#include <cstdint>
#include <string>
#include <random>
#include <vector>

namespace spiked {

enum class NoiseDistribution { gaussian, rademacher, uniform_pm_sqrt3 };

std::string to_string(NoiseDistribution d);
NoiseDistribution noise_distribution_from_string(const std::string& name);

struct Rotation {
    enum class Kind { identity, random_orthogonal };
    Kind kind = Kind::identity;
    std::uint64_t seed = 0;

    static Rotation identity() { return {}; }
    static Rotation random_orthogonal(std::uint64_t seed) { return {Kind::random_orthogonal, seed}; }
};

struct SpikedModelSpec {
    Index m = 0;
    Index p = 0;
    Index n = 0;
    std::vector<double> ells;
    Rotation rotation;
    SignalDistribution signal_dist;
    NoiseDistribution noise_dist = NoiseDistribution::gaussian;
    std::uint64_t seed = 0;

    /// p / n.
    double gamma_n() const { return static_cast<double>(p) / static_cast<double>(n); }
    /// Throws ConfigError when dimensions or distributions are inconsistent.
    void validate() const;
};

struct PopulationAxes {
    Mat P;    // m x m orthogonal, columns are population eigenvectors
    Vec ells; // descending

    Mat sigma() const { return P * ells.asDiagonal() * P.transpose(); }
};

struct Dataset {
    Mat X1; // m x n signal rows
    Mat X2; // p x n noise rows
    std::int64_t replicate = 0;

    Index n() const { return X1.cols(); }
    Index m() const { return X1.rows(); }
    Index p() const { return X2.rows(); }
    double gamma_n() const { return static_cast<double>(p()) / static_cast<double>(n()); }
};

/// Engine for the stream identified by (seed, replicate, tag); independent of scheduling.
std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t replicate, std::uint64_t tag);

/// The exact P and Lambda used by generate().
PopulationAxes population_axes(const SpikedModelSpec& spec);

/// Haar-distributed m x m orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
Mat haar_orthogonal(Index m, std::mt19937_64& engine);

Dataset generate(const SpikedModelSpec& spec, std::int64_t replicate);

/// Same as generate() with axes computed once by the caller.
Dataset generate(const SpikedModelSpec& spec, const PopulationAxes& axes, std::int64_t replicate);

/// Draws N iid copies of xi as rows of an N x m matrix (used by moment checks).
Mat draw_signal_samples(const SpikedModelSpec& spec, const PopulationAxes& axes, Index N, std::uint64_t stream);

} // namespace spiked
