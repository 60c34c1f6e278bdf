#include "starnoma/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace starnoma {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLosKFactorLimit = 1e9;

void check_distinct(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const char* pair) {
    if ((a - b).norm() == 0.0)
        throw std::domain_error(std::string("coincident nodes: ") + pair);
}

double xy_norm(const Eigen::Vector3d& diff, const char* pair) {
    const double n = std::hypot(diff.x(), diff.y());
    if (n == 0.0)
        throw std::domain_error(std::string("zero xy-projection (azimuth undefined): ") + pair);
    return n;
}

}  // namespace

void SystemGeometry::validate() const {
    if (panel_rows < 1 || panel_cols < 1)
        throw std::domain_error("panel dimensions must satisfy N_v, N_h >= 1");
    if (!(spacing_ratio > 0.0))
        throw std::domain_error("spacing_ratio must be positive");
    check_distinct(ris, source, "ris/source");
    check_distinct(ris, user_c, "ris/user_c");
    check_distinct(ris, user_s, "ris/user_s");
}

void ChannelParams::validate() const {
    if (!(bandwidth_hz > 0.0)) throw std::domain_error("bandwidth_hz must be positive");
    if (!(pathloss_exp_sr > 0.0) || !(pathloss_exp_ru > 0.0))
        throw std::domain_error("path loss exponents must be positive");
    for (double v : {pathloss_ref_linear(), noise_mw_c(), noise_mw_s(), transmit_power_mw()})
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::domain_error("dB/dBm fields must convert to positive finite linear values");
}

double RandomStream::uniform() {
    // 53-bit mantissa draw in [0, 1).
    return (engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::complex<double> RandomStream::complex_gaussian() {
    const double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
    const double re = gaussian() * inv_sqrt2;
    const double im = gaussian() * inv_sqrt2;
    return {re, im};
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t cell_index) {
    std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ull * (cell_index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

GeometryAngles compute_geometry(const SystemGeometry& geo) {
    geo.validate();
    GeometryAngles out;

    const Eigen::Vector3d sr = geo.source - geo.ris;
    const Eigen::Vector3d rc = geo.user_c - geo.ris;
    const Eigen::Vector3d rs = geo.user_s - geo.ris;

    out.d_sr = sr.norm();
    out.d_rc = rc.norm();
    out.d_rs = rs.norm();

    out.phi_sr = std::asin(sr.z() / out.d_sr);
    out.phi_rc = std::asin(rc.z() / out.d_rc);
    out.phi_rs = std::asin(rs.z() / out.d_rs);

    out.varphi_sr = std::acos(sr.x() / xy_norm(sr, "ris/source"));
    out.varphi_rc = std::acos(rc.x() / xy_norm(rc, "ris/user_c"));
    out.varphi_rs = std::acos(rs.x() / xy_norm(rs, "ris/user_s"));
    return out;
}

Eigen::VectorXcd array_response(double phi, double varphi, const SystemGeometry& geo) {
    geo.validate();
    const int nv = geo.panel_rows;
    const int nh = geo.panel_cols;
    const double base = -kTwoPi * geo.spacing_ratio * std::sin(phi);
    const double step_v = base * std::cos(varphi);
    const double step_h = base * std::sin(varphi);

    Eigen::VectorXcd a(nv * nh);
    for (int r = 0; r < nv; ++r)
        for (int c = 0; c < nh; ++c)
            a[r * nh + c] = std::polar(1.0, step_v * r + step_h * c);
    return a;
}

namespace {

Eigen::VectorXcd rician_vector(double scale_power, const Eigen::VectorXcd& los, double k_linear,
                               RandomStream& rng) {
    const double amp = std::sqrt(scale_power);
    if (k_linear >= kLosKFactorLimit) return amp * los;  // pure LoS limit, exact

    const double w_los = std::sqrt(k_linear / (1.0 + k_linear));
    const double w_nlos = std::sqrt(1.0 / (1.0 + k_linear));
    Eigen::VectorXcd h(los.size());
    for (Eigen::Index n = 0; n < los.size(); ++n)
        h[n] = amp * (w_los * los[n] + w_nlos * rng.complex_gaussian());
    return h;
}

}  // namespace

ChannelRealization sample_rician(const GeometryAngles& angles, const ChannelParams& params,
                                 const SystemGeometry& geo, RandomStream& rng) {
    params.validate();
    const double rho = params.pathloss_ref_linear();
    const double k = params.rician_k_linear();

    const Eigen::VectorXcd a_sr = array_response(angles.phi_sr, angles.varphi_sr, geo);
    const Eigen::VectorXcd a_rc = array_response(angles.phi_rc, angles.varphi_rc, geo);
    const Eigen::VectorXcd a_rs = array_response(angles.phi_rs, angles.varphi_rs, geo);

    ChannelRealization chan;
    chan.h_sr = rician_vector(rho * std::pow(angles.d_sr, -params.pathloss_exp_sr), a_sr, k, rng);
    chan.h_rc = rician_vector(rho * std::pow(angles.d_rc, -params.pathloss_exp_ru), a_rc, k, rng);
    chan.h_rs = rician_vector(rho * std::pow(angles.d_rs, -params.pathloss_exp_ru), a_rs, k, rng);
    chan.h_c = chan.h_rc.cwiseProduct(chan.h_sr);
    chan.h_s = chan.h_rs.cwiseProduct(chan.h_sr);
    return chan;
}

}  // namespace starnoma
