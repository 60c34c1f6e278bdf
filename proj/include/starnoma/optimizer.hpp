#ifndef STARNOMA_OPTIMIZER_HPP
#define STARNOMA_OPTIMIZER_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "starnoma/channel.hpp"
#include "starnoma/fbl.hpp"

namespace starnoma {

// Auxiliary SINR/gain variables of the reformulated problem, kept tight to
// their defining inequalities at any point declared feasible.
struct AuxiliaryVariables {
    double alpha_cc = 0.0;
    double alpha_cs = 0.0;
    double alpha_sc = 0.0;
    double alpha_ss = 0.0;
    double beta_c = 0.0;
    double beta_s = 0.0;
};

struct DesignPoint {
    StarRisProfile profile;
    ResourceAllocation alloc;
    AuxiliaryVariables aux;
};

struct SolverConfig {
    double zeta1 = 1e-4;    // inner (MM) stopping tolerance on eps~_sc
    double zeta2 = 1e-10;   // outer (AO) stopping tolerance on eps_sc
    int iter_max = 30;      // cap for both loops
    double inner_tol = 1e-7;      // convex-solver objective/KKT tolerance
    double barrier_mu = 10.0;     // barrier parameter growth factor
    double line_search_shrink = 0.5;

    void validate() const;
};

struct IterationRecord {
    int outer = 0;
    int inner = 0;  // 0: record after the a_c update; -1: final point after the ceiling
    double objective_omega_sc = 0.0;
    double eps_bar_sc = 0.0;
    double eps_sc = 0.0;
    double delta_sc = 0.0;
    double max_residual = 0.0;  // largest scaled constraint violation, <= 0 when feasible
    double wall_ms = 0.0;
};

struct Solution {
    DesignPoint point;  // integer m after the final ceiling
    PerformanceTuple performance;
    std::vector<IterationRecord> trace;
    int outer_iterations = 0;
    long inner_iterations_total = 0;
    double lemma1_eps_gap = 0.0;    // |eps_cc - eps_c| at the returned point
    double lemma1_power_gap = 0.0;  // |a_c + a_s - 1|
    int lemma3_warnings = 0;        // accepted iterates outside the certified region
    bool converged = false;
};

// Raised when a subproblem (or the initialization) has no feasible point;
// carries the most violated constraint for diagnostics.
class InfeasibleError : public std::runtime_error {
  public:
    InfeasibleError(const std::string& what, std::string constraint, double violation)
        : std::runtime_error(what), constraint_name(std::move(constraint)),
          violation(violation) {}

    std::string constraint_name;
    double violation = 0.0;
};

// Raised when the inner convex solver exhausts its iteration budget.
class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Tangent minorizer of the gain f(v) = |v^H h|^2 at v_anchor:
// 2 Re(v_anchor^H h h^H v) - Re(v_anchor^H h h^H v_anchor).
// Affine in v (as 2N real coordinates), equals f at the anchor and never
// exceeds f elsewhere. Throws std::domain_error on length mismatch.
double surrogate_gain(const Eigen::VectorXcd& v, const Eigen::VectorXcd& v_anchor,
                      const Eigen::VectorXcd& h);

// Tangent majorizer of g(alpha, m) = sqrt(m/V(alpha)) (C(alpha) - d/m) at
// (alpha_anchor, m_anchor): the first-order Taylor expansion, affine in
// (alpha_sc, m), equal to g at the anchor and an upper bound wherever g is
// concave between the anchor and the evaluation point.
double surrogate_objective(double alpha_sc, double m, double alpha_anchor, double m_anchor, int d);

// Blocklength box derived from the QoS latency cap: [d_c + d_s, floor(B T_max)].
double min_blocklength(const QosRequirements& qos);
double max_blocklength(const QosRequirements& qos, const ChannelParams& params);

// One convex MM subproblem at fixed a_c: minimize the surrogate objective
// over (v_c, v_s, m) subject to the reliability constraints (with the
// anchor-linearized gains), the per-element energy split, the blocklength
// box and the certified-regime floor omega >= Q^-1(0.3) + 1e-3 on the U_s
// constraint terms. Solved by a log-barrier interior-point method with
// analytic derivatives; a feasibility-restoration phase runs first when the
// anchor is not strictly interior. Throws InfeasibleError / SolverError.
DesignPoint solve_p4(const ChannelRealization& chan, double a_c, const DesignPoint& anchor,
                     const QosRequirements& qos, const ChannelParams& params,
                     const SolverConfig& cfg);

// One-dimensional power-allocation update: the maximal a_c in
// [a_c_lower, 1) keeping eps_ss <= eps_s at the fixed profile and
// blocklength, located by bisection to width 1e-6 (the objective and
// eps_cc both improve monotonically with a_c, so larger is better).
double solve_p5(const ChannelRealization& chan, const StarRisProfile& profile, double m,
                double a_c_lower, const QosRequirements& qos, const ChannelParams& params);

// Feasible high-gain starting point: a_c = 0.7, equal energy split
// mu = 1/sqrt(2) with per-element phases aligned to the cascaded channel,
// m at the latency cap. Retries with up to 10 random phase perturbations
// if the QoS constraints fail, then reports infeasibility.
DesignPoint initialize(const ChannelRealization& chan, const QosRequirements& qos,
                       const ChannelParams& params, RandomStream& rng);

// Full AO + MM pipeline: inner MM loop over (v_i, m) stopped by zeta1 on
// the surrogate eps~_sc, a reliability-tightening step driving
// eps_cc -> eps_c (the direction in which the leakage objective improves),
// the scalar a_c update, outer stop by zeta2 on eps_sc, final blocklength
// ceiling and re-tightening at integer m.
Solution optimize(const ChannelRealization& chan, const QosRequirements& qos,
                  const ChannelParams& params, const SolverConfig& cfg, RandomStream& rng);

// Tight auxiliary variables for a (profile, allocation) pair.
AuxiliaryVariables tie_auxiliaries(const StarRisProfile& profile, const ChannelRealization& chan,
                                   const ResourceAllocation& alloc, const ChannelParams& params);

// Largest scaled violation of the original problem constraints at a point
// (<= 0 means feasible). Used for trace records and tests.
double max_constraint_residual(const DesignPoint& point, const ChannelRealization& chan,
                               const QosRequirements& qos, const ChannelParams& params);

}  // namespace starnoma

#endif
