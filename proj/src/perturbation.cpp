#include "spiked/perturbation.hpp"

#include "spiked/model_gen.hpp"
#include "spiked/stats.hpp"

#include <random>
#include <vector>

namespace spiked {

PerturbationFuzzSummary fuzz_perturbation(std::int64_t trials, Index dim_min, Index dim_max, double gap_ratio,
                                          std::uint64_t seed) {
    if (dim_min < 2 || dim_max < dim_min)
        throw DomainError("fuzz_perturbation: need 2 <= dim_min <= dim_max");
    if (trials < 0 || !(gap_ratio >= 0.0))
        throw DomainError("fuzz_perturbation: trials and gap ratio must be non-negative");

    PerturbationFuzzSummary out;
    out.trials = trials;
    std::vector<double> rem, rem_half, shrink;
    auto engine = stream_engine(seed, 0, 0x70657274ULL);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    for (std::int64_t t = 0; t < trials; ++t) {
        const Index m = dim_min + static_cast<Index>(t % (dim_max - dim_min + 1));
        Vec lambda(m);
        for (Index i = 0; i < m; ++i) lambda(i) = 3.0 * unif(engine);
        const Mat Q = haar_orthogonal(m, engine);
        const Mat A = Q * lambda.asDiagonal() * Q.transpose();
        const Index r = static_cast<Index>(engine() % static_cast<std::uint64_t>(m));

        Mat G(m, m);
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < m; ++i) G(i, j) = normal(engine);
        Mat B = 0.5 * (G + G.transpose());

        const Vec sorted = sorted_eigen<double>(A).values;
        const double delta = eigengap<double>(sorted, r);
        if (!(delta > 1e-6))
            continue; // near-degenerate draw; the lemma needs a simple eigenvalue
        const double bn = sym_norm<double>(B);
        B *= bn > 0.0 ? gap_ratio * delta / bn : 0.0;

        const auto full = first_order_eigvec<double>(A, B, r);
        const Mat B_half = 0.5 * B;
        const auto half = first_order_eigvec<double>(A, B_half, r);
        if (!full.applicable)
            continue;
        ++out.applicable;
        if (!full.within_bound())
            ++out.violations;
        if (full.b_norm > 0.0)
            out.max_constant = std::max(out.max_constant,
                                        full.remainder_norm * full.delta_r * full.delta_r / (full.b_norm * full.b_norm));
        rem.push_back(full.remainder_norm);
        rem_half.push_back(half.remainder_norm);
        if (half.remainder_norm > 0.0)
            shrink.push_back(full.remainder_norm / half.remainder_norm);
    }
    out.median_remainder = median(rem);
    out.median_remainder_half = median(rem_half);
    out.median_shrink = median(shrink);
    return out;
}

} // namespace spiked
