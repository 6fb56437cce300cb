#include "spiked/model_gen.hpp"

#include <Eigen/QR>

#include <cmath>

namespace spiked {

namespace {

constexpr std::uint64_t kTagRotation = 0x726f74ULL;
constexpr std::uint64_t kTagSignal = 0x7369676eULL;
constexpr std::uint64_t kTagNoise = 0x6e6f6973ULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <class Engine>
double draw_factor(FactorLaw law, Engine& engine, std::normal_distribution<double>& normal) {
    switch (law) {
    case FactorLaw::gaussian: return normal(engine);
    case FactorLaw::rademacher: return (engine() >> 63) ? 1.0 : -1.0;
    case FactorLaw::uniform: {
        std::uniform_real_distribution<double> u(-std::sqrt(3.0), std::sqrt(3.0));
        return u(engine);
    }
    }
    return 0.0;
}

FactorLaw noise_as_factor(NoiseDistribution d) {
    switch (d) {
    case NoiseDistribution::gaussian: return FactorLaw::gaussian;
    case NoiseDistribution::rademacher: return FactorLaw::rademacher;
    case NoiseDistribution::uniform_pm_sqrt3: return FactorLaw::uniform;
    }
    return FactorLaw::gaussian;
}

// Columns of xi for a block of N draws, written into out (m x N).
void fill_signal(const SpikedModelSpec& spec, const PopulationAxes& axes, std::mt19937_64& engine, Mat& out) {
    const Index m = axes.P.rows();
    const Index N = out.cols();
    std::normal_distribution<double> normal;
    const FactorLaw law = spec.signal_dist.kind == SignalDistribution::Kind::iid_factors ? spec.signal_dist.law
                                                                                        : FactorLaw::gaussian;
    const bool mixture = spec.signal_dist.kind == SignalDistribution::Kind::scale_mixture;
    const auto& support = spec.signal_dist.w2_support;
    std::uniform_int_distribution<std::size_t> pick(0, mixture ? support.size() - 1 : 0);

    Mat Z(m, N);
    Vec w = Vec::Ones(N);
    for (Index j = 0; j < N; ++j) {
        for (Index i = 0; i < m; ++i) Z(i, j) = draw_factor(law, engine, normal);
        if (mixture)
            w(j) = std::sqrt(support[pick(engine)]);
    }
    out.noalias() = axes.P * (axes.ells.cwiseSqrt().asDiagonal() * Z);
    if (mixture)
        out = out * w.asDiagonal();
}

} // namespace

std::string to_string(NoiseDistribution d) {
    switch (d) {
    case NoiseDistribution::gaussian: return "gaussian";
    case NoiseDistribution::rademacher: return "rademacher";
    case NoiseDistribution::uniform_pm_sqrt3: return "uniform_pm_sqrt3";
    }
    return "?";
}

NoiseDistribution noise_distribution_from_string(const std::string& name) {
    if (name == "gaussian") return NoiseDistribution::gaussian;
    if (name == "rademacher") return NoiseDistribution::rademacher;
    if (name == "uniform_pm_sqrt3" || name == "uniform") return NoiseDistribution::uniform_pm_sqrt3;
    throw ConfigError("unknown noise distribution '" + name + "'");
}

void SpikedModelSpec::validate() const {
    if (m <= 0 || n <= 0 || p < 0)
        throw ConfigError("model: m and n must be positive and p non-negative");
    if (static_cast<Index>(ells.size()) != m)
        throw ConfigError("model: ells must have exactly m entries");
    for (std::size_t i = 0; i < ells.size(); ++i) {
        if (!(ells[i] > 0.0))
            throw ConfigError("model: spikes must be positive");
        if (i > 0 && !(ells[i] < ells[i - 1]))
            throw ConfigError("model: spikes must be strictly decreasing (simple spikes only)");
    }
    signal_dist.validate();
}

std::mt19937_64 stream_engine(std::uint64_t seed, std::uint64_t replicate, std::uint64_t tag) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ replicate);
    h = splitmix64(h ^ tag);
    return std::mt19937_64(h);
}

Mat haar_orthogonal(Index m, std::mt19937_64& engine) {
    std::normal_distribution<double> normal;
    Mat G(m, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < m; ++i) G(i, j) = normal(engine);
    Eigen::HouseholderQR<Mat> qr(G);
    Mat Q = qr.householderQ() * Mat::Identity(m, m);
    const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < m; ++j)
        if (R(j, j) < 0.0)
            Q.col(j) = -Q.col(j);
    return Q;
}

PopulationAxes population_axes(const SpikedModelSpec& spec) {
    spec.validate();
    PopulationAxes axes;
    axes.ells = Eigen::Map<const Vec>(spec.ells.data(), static_cast<Index>(spec.ells.size()));
    if (spec.rotation.kind == Rotation::Kind::identity) {
        axes.P = Mat::Identity(spec.m, spec.m);
    } else {
        auto engine = stream_engine(spec.rotation.seed, 0, kTagRotation);
        axes.P = haar_orthogonal(spec.m, engine);
    }
    return axes;
}

Dataset generate(const SpikedModelSpec& spec, std::int64_t replicate) {
    return generate(spec, population_axes(spec), replicate);
}

Dataset generate(const SpikedModelSpec& spec, const PopulationAxes& axes, std::int64_t replicate) {
    spec.validate();
    Dataset data;
    data.replicate = replicate;
    const auto rep = static_cast<std::uint64_t>(replicate);

    auto signal_engine = stream_engine(spec.seed, rep, kTagSignal);
    data.X1.resize(spec.m, spec.n);
    fill_signal(spec, axes, signal_engine, data.X1);

    auto noise_engine = stream_engine(spec.seed, rep, kTagNoise);
    std::normal_distribution<double> normal;
    const FactorLaw law = noise_as_factor(spec.noise_dist);
    data.X2.resize(spec.p, spec.n);
    for (Index j = 0; j < spec.n; ++j)
        for (Index i = 0; i < spec.p; ++i) data.X2(i, j) = draw_factor(law, noise_engine, normal);
    return data;
}

Mat draw_signal_samples(const SpikedModelSpec& spec, const PopulationAxes& axes, Index N, std::uint64_t stream) {
    auto engine = stream_engine(spec.seed, stream, kTagSignal);
    Mat cols(spec.m, N);
    fill_signal(spec, axes, engine, cols);
    return cols.transpose();
}

} // namespace spiked
