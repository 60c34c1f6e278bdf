#ifndef STARNOMA_FBL_HPP
#define STARNOMA_FBL_HPP

#include <Eigen/Dense>

#include "starnoma/channel.hpp"

namespace starnoma {

// Per-element STAR-RIS reflection (v_c) and transmission (v_s) coefficients
// mu * exp(j*theta) under the energy-splitting protocol
// |v_c[n]|^2 + |v_s[n]|^2 <= 1.
struct StarRisProfile {
    Eigen::VectorXcd v_c;
    Eigen::VectorXcd v_s;

    static constexpr double kEnergyTol = 1e-9;

    bool energy_split_ok(double tol = kEnergyTol) const;
    void validate() const;  // throws std::domain_error on violation or length mismatch
};

// Power split and blocklength. m stays real-valued here; integrality is the
// optimizer's final ceiling step.
struct ResourceAllocation {
    double a_c = 0.7;
    double a_s = 0.3;
    double m = 1000.0;

    // Secure SIC order 0 < a_s < a_c, total power a_c + a_s <= 1, m > 0.
    void validate() const;
};

struct QosRequirements {
    double eps_c = 1e-3;
    double eps_s = 1e-3;
    double t_max_s = 0.715e-3;
    int d_c = 100;  // packet bits for s_c
    int d_s = 100;  // packet bits for s_s

    void validate() const;
};

// The four-way trade-off object: reliability (eps_cc, eps_ss), security
// (delta_sc = 1 - eps_sc) and latency (t_s = m/B).
struct PerformanceTuple {
    double eps_cc = 0.0;
    double eps_ss = 0.0;
    double delta_sc = 0.0;
    double t_s = 0.0;
};

enum class User { c, s };

// Gaussian tail Q(x) = integral_x^inf (1/sqrt(2 pi)) exp(-t^2/2) dt,
// evaluated through the complementary error function. Saturates to 0/1
// where the double-precision tail underflows (|x| beyond ~38).
double q_function(double x);

// Standard-normal tail quantile: q_function(q_inverse(p)) == p.
// Acklam's rational initial guess refined by Newton steps on q_function.
// Throws std::domain_error for p outside (0, 1).
double q_inverse(double p);

double shannon_capacity(double gamma);  // C = log2(1 + gamma)
double dispersion(double gamma);        // V = 1 - (1 + gamma)^-2

// omega(gamma, m, d) = sqrt(m/V) * (C - d/m) * ln 2, the Q argument of the
// normal-approximation block error probability. gamma <= 0 is rejected:
// V(0) = 0 is a genuine singularity of the model.
double omega(double gamma, double m, int d);

// Block error probability Q(omega(gamma, m, d)).
double block_error_prob(double gamma, double m, int d);

// Analytic first and second partials of omega w.r.t. (gamma, m), used by the
// convex solver and validated against finite differences in the test suite.
struct OmegaDerivs {
    double value = 0.0;
    double d_gamma = 0.0;
    double d_m = 0.0;
    double d_gamma_gamma = 0.0;
    double d_gamma_m = 0.0;
    double d_m_m = 0.0;
};

OmegaDerivs omega_derivs(double gamma, double m, int d);

// First-stage SINR (decode s_c at U_i), Eq.-level:
// a_c P g_i / (a_s P g_i + sigma_i^2) with g_i = |v_i^H h_i|^2.
double sinr_first_stage(const StarRisProfile& profile, const ChannelRealization& chan,
                        const ResourceAllocation& alloc, const ChannelParams& params, User user);

// Second-stage SINR after SIC: a_s P g_i / sigma_i^2.
double sinr_second_stage(const StarRisProfile& profile, const ChannelRealization& chan,
                         const ResourceAllocation& alloc, const ChannelParams& params, User user);

// SIC-chained effective error eps_si = (1 - eps_ci) * eps_bar_si + eps_ci.
double effective_error(double eps_ci, double eps_bar_si);

// Effective channel power gain |v_i^H h_i|^2 for one user.
double effective_gain(const StarRisProfile& profile, const ChannelRealization& chan, User user);

// Full performance model: eps_cc, composite eps_ss, leakage delta_sc and
// delay T = m/B at the given design.
PerformanceTuple evaluate_performance(const StarRisProfile& profile, const ChannelRealization& chan,
                                      const ResourceAllocation& alloc, const QosRequirements& qos,
                                      const ChannelParams& params);

}  // namespace starnoma

#endif
