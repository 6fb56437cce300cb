#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spiked {

template <class Scalar_, int Rows_ = Eigen::Dynamic, int Cols_ = Eigen::Dynamic>
using mat_type = Eigen::Matrix<Scalar_, Rows_, Cols_>;

template <class Scalar_, int Rows_ = Eigen::Dynamic>
using vec_type = Eigen::Matrix<Scalar_, Rows_, 1>;

using Mat = mat_type<double>;
using Vec = vec_type<double>;
using Index = Eigen::Index;

inline constexpr const char* kVersion = "0.3.1";

// Argument outside the region where a closed form or routine is defined.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Spike sitting exactly at the phase transition 1 + sqrt(gamma).
struct CriticalSpikeError : DomainError {
    using DomainError::DomainError;
};

// Repeated eigenvalue where a simple one is required.
struct DegenerateSpectrumError : DomainError {
    using DomainError::DomainError;
};

// Resolvent evaluated at or inside the noise spectrum.
struct ResolventDomainError : DomainError {
    using DomainError::DomainError;
};

// Cumulant contraction inconsistent with a valid distribution.
struct InvalidCumulantError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SolverError : std::runtime_error {
    SolverError(const std::string& what, std::int64_t replicate)
        : std::runtime_error(what + " (replicate " + std::to_string(replicate) + ")"),
          replicate_index(replicate) {}
    std::int64_t replicate_index;
};

} // namespace spiked
