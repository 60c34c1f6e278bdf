#include "starnoma/fbl.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace starnoma {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Acklam's rational approximation to the standard normal quantile,
// accurate to ~1.15e-9 before refinement.
double acklam_quantile(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double q_function(double x) {
    return 0.5 * std::erfc(x * kInvSqrt2);
}

double q_inverse(double p) {
    if (!(p > 0.0) || !(p < 1.0)) throw std::domain_error("q_inverse: p must lie in (0, 1)");
    // Acklam gives Phi^-1(p); the tail quantile is its negation.
    double x = -acklam_quantile(p);
    for (int i = 0; i < 3; ++i) {
        const double err = q_function(x) - p;
        const double pdf = std_normal_pdf(x);
        if (pdf <= 0.0) break;
        x += err / pdf;  // Q' = -pdf
    }
    return x;
}

double shannon_capacity(double gamma) {
    return std::log2(1.0 + gamma);
}

double dispersion(double gamma) {
    const double g1 = 1.0 + gamma;
    return 1.0 - 1.0 / (g1 * g1);
}

double omega(double gamma, double m, int d) {
    if (!(gamma > 0.0)) throw std::domain_error("omega: gamma must be positive (V(0) = 0)");
    if (!(m > 0.0)) throw std::domain_error("omega: m must be positive");
    if (d <= 0) throw std::domain_error("omega: d must be a positive integer");
    return std::sqrt(m / dispersion(gamma)) * (shannon_capacity(gamma) - double(d) / m) * kLn2;
}

double block_error_prob(double gamma, double m, int d) {
    return q_function(omega(gamma, m, d));
}

OmegaDerivs omega_derivs(double gamma, double m, int d) {
    if (!(gamma > 0.0)) throw std::domain_error("omega_derivs: gamma must be positive");
    if (!(m > 0.0)) throw std::domain_error("omega_derivs: m must be positive");

    // omega = sqrt(m) * u(gamma) * r(gamma, m) with u = (1+gamma)/sqrt(t),
    // t = gamma^2 + 2 gamma (so u = V^-1/2) and r = ln(1+gamma) - d ln2 / m.
    const double g1 = 1.0 + gamma;
    const double t = gamma * gamma + 2.0 * gamma;
    const double sqrt_t = std::sqrt(t);
    const double u = g1 / sqrt_t;
    const double du = -1.0 / (t * sqrt_t);           // u' = -t^(-3/2)
    const double ddu = 3.0 * g1 / (t * t * sqrt_t);  // u'' = 3(1+gamma) t^(-5/2)

    const double dl2 = double(d) * kLn2;
    const double r = std::log(g1) - dl2 / m;
    const double r_g = 1.0 / g1;
    const double r_gg = -1.0 / (g1 * g1);
    const double r_m = dl2 / (m * m);
    const double r_mm = -2.0 * dl2 / (m * m * m);

    const double sm = std::sqrt(m);

    OmegaDerivs o;
    o.value = sm * u * r;
    o.d_gamma = sm * (du * r + u * r_g);
    o.d_gamma_gamma = sm * (ddu * r + 2.0 * du * r_g + u * r_gg);
    o.d_m = u * (r / (2.0 * sm) + sm * r_m);
    // d/dm of sqrt(m)(u' r + u r_g); r_g does not depend on m.
    o.d_gamma_m = (du * r + u * r_g) / (2.0 * sm) + sm * du * r_m;
    o.d_m_m = u * (-r / (4.0 * m * sm) + r_m / sm + sm * r_mm);
    return o;
}

bool StarRisProfile::energy_split_ok(double tol) const {
    if (v_c.size() != v_s.size()) return false;
    for (Eigen::Index n = 0; n < v_c.size(); ++n)
        if (std::norm(v_c[n]) + std::norm(v_s[n]) > 1.0 + tol) return false;
    return true;
}

void StarRisProfile::validate() const {
    if (v_c.size() != v_s.size())
        throw std::domain_error("StarRisProfile: v_c and v_s must have identical length");
    if (!energy_split_ok())
        throw std::domain_error("StarRisProfile: energy-splitting constraint violated");
}

void ResourceAllocation::validate() const {
    if (!(a_s > 0.0) || !(a_c > a_s))
        throw std::domain_error("ResourceAllocation: secure SIC order requires 0 < a_s < a_c");
    if (a_c + a_s > 1.0 + 1e-12)
        throw std::domain_error("ResourceAllocation: a_c + a_s must not exceed 1");
    if (!(m > 0.0)) throw std::domain_error("ResourceAllocation: m must be positive");
}

void QosRequirements::validate() const {
    for (double e : {eps_c, eps_s})
        if (!(e > 0.0) || !(e < 0.5))
            throw std::domain_error("QosRequirements: thresholds must lie in (0, 0.5)");
    if (!(t_max_s > 0.0)) throw std::domain_error("QosRequirements: t_max_s must be positive");
    if (d_c <= 0 || d_s <= 0)
        throw std::domain_error("QosRequirements: packet sizes must be positive");
}

double effective_gain(const StarRisProfile& profile, const ChannelRealization& chan, User user) {
    const Eigen::VectorXcd& v = (user == User::c) ? profile.v_c : profile.v_s;
    const Eigen::VectorXcd& h = (user == User::c) ? chan.h_c : chan.h_s;
    if (v.size() != h.size())
        throw std::domain_error("effective_gain: profile/channel length mismatch");
    return std::norm(v.dot(h));  // Eigen dot conjugates the left operand
}

double sinr_first_stage(const StarRisProfile& profile, const ChannelRealization& chan,
                        const ResourceAllocation& alloc, const ChannelParams& params, User user) {
    const double p = params.transmit_power_mw();
    const double sigma2 = (user == User::c) ? params.noise_mw_c() : params.noise_mw_s();
    const double pg = p * effective_gain(profile, chan, user);
    return alloc.a_c * pg / (alloc.a_s * pg + sigma2);
}

double sinr_second_stage(const StarRisProfile& profile, const ChannelRealization& chan,
                         const ResourceAllocation& alloc, const ChannelParams& params, User user) {
    const double p = params.transmit_power_mw();
    const double sigma2 = (user == User::c) ? params.noise_mw_c() : params.noise_mw_s();
    return alloc.a_s * p * effective_gain(profile, chan, user) / sigma2;
}

double effective_error(double eps_ci, double eps_bar_si) {
    return (1.0 - eps_ci) * eps_bar_si + eps_ci;
}

PerformanceTuple evaluate_performance(const StarRisProfile& profile, const ChannelRealization& chan,
                                      const ResourceAllocation& alloc, const QosRequirements& qos,
                                      const ChannelParams& params) {
    const double m = alloc.m;
    const double eps_cc = block_error_prob(sinr_first_stage(profile, chan, alloc, params, User::c),
                                           m, qos.d_c);
    const double eps_cs = block_error_prob(sinr_first_stage(profile, chan, alloc, params, User::s),
                                           m, qos.d_c);
    const double eps_bar_ss = block_error_prob(
        sinr_second_stage(profile, chan, alloc, params, User::s), m, qos.d_s);
    const double eps_bar_sc = block_error_prob(
        sinr_second_stage(profile, chan, alloc, params, User::c), m, qos.d_s);

    PerformanceTuple perf;
    perf.eps_cc = eps_cc;
    perf.eps_ss = effective_error(eps_cs, eps_bar_ss);
    perf.delta_sc = 1.0 - effective_error(eps_cc, eps_bar_sc);
    perf.t_s = m / params.bandwidth_hz;
    return perf;
}

}  // namespace starnoma
