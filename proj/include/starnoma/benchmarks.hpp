#ifndef STARNOMA_BENCHMARKS_HPP
#define STARNOMA_BENCHMARKS_HPP

#include <vector>

#include "starnoma/channel.hpp"
#include "starnoma/fbl.hpp"
#include "starnoma/optimizer.hpp"

namespace starnoma {

// Trade-off surface over (m, a_c) at a fixed, non-optimized STAR-RIS
// profile, with a_s = 1 - a_c at every node.
struct GridSweepResult {
    std::vector<int> m_values;
    std::vector<double> a_c_values;
    std::vector<PerformanceTuple> tuples;  // row-major: [m index][a_c index]

    const PerformanceTuple& at(std::size_t mi, std::size_t ai) const {
        return tuples[mi * a_c_values.size() + ai];
    }
};

// The "without STAR-RIS design" reference profile: equal energy split
// mu = 1/sqrt(2) with phases drawn uniformly once per realization.
StarRisProfile fixed_random_profile(Eigen::Index n, RandomStream& rng);

GridSweepResult grid_sweep(const ChannelRealization& chan, const StarRisProfile& fixed_profile,
                           const std::vector<int>& m_range, const std::vector<double>& a_c_range,
                           const QosRequirements& qos, const ChannelParams& params);

// Block-coordinate-descent baseline: per round (i) one SCA pass on the
// beamforming vectors at fixed (m, a_c), (ii) exhaustive a_c scan at step
// 1e-3, (iii) exhaustive integer-m scan over the blocklength box; rounds
// stop when eps_sc moves less than zeta2 or at iter_max.
Solution bcd_optimize(const ChannelRealization& chan, const QosRequirements& qos,
                      const ChannelParams& params, const SolverConfig& cfg, RandomStream& rng);

// Outer-iteration objective series of two solver runs aligned by index,
// plus iterations-to-convergence (first outer index whose delta_sc is
// within tol of the final value).
struct TraceComparison {
    std::vector<double> objective_a;  // delta_sc per outer iteration
    std::vector<double> objective_b;
    int iterations_to_convergence_a = 0;
    int iterations_to_convergence_b = 0;
};

TraceComparison compare_traces(const Solution& a, const Solution& b, double tol = 1e-4);

std::vector<double> outer_objective_series(const Solution& s);
int iterations_to_convergence(const std::vector<double>& series, double tol);

}  // namespace starnoma

#endif
