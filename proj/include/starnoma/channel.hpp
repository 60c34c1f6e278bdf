#ifndef STARNOMA_CHANNEL_HPP
#define STARNOMA_CHANNEL_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>

namespace starnoma {

// Node placement and STAR-RIS panel layout. All coordinates in meters.
// Only the spacing-to-wavelength ratio l/lambda enters the array response,
// so neither quantity is stored separately.
struct SystemGeometry {
    Eigen::Vector3d source{0.0, 0.0, 10.0};
    Eigen::Vector3d ris{35.0, 20.0, 10.0};
    Eigen::Vector3d user_c{40.0, 0.0, 0.0};
    Eigen::Vector3d user_s{40.0, 40.0, 0.0};
    int panel_rows = 4;  // N_v
    int panel_cols = 4;  // N_h
    double spacing_ratio = 0.5;

    int elements() const { return panel_rows * panel_cols; }

    // Throws std::domain_error on non-positive panel dimensions, a
    // non-positive spacing ratio, or coincident nodes.
    void validate() const;
};

// Link-budget and fading parameters. Power bookkeeping is linear milliwatts:
// dBm fields convert as 10^(dBm/10) mW, the unit-distance path loss as a
// dimensionless linear gain.
struct ChannelParams {
    double pathloss_ref_db = -30.0;   // rho at d = 1 m
    double pathloss_exp_sr = 2.5;     // alpha_1 (S -> R)
    double pathloss_exp_ru = 2.5;     // alpha_2 (R -> U_i)
    double rician_k_db = 3.0;
    double noise_power_dbm_c = -80.0;
    double noise_power_dbm_s = -80.0;
    double transmit_power_dbm = 30.0;
    double bandwidth_hz = 1.4e6;

    double pathloss_ref_linear() const { return std::pow(10.0, pathloss_ref_db / 10.0); }
    double rician_k_linear() const { return std::pow(10.0, rician_k_db / 10.0); }
    double noise_mw_c() const { return std::pow(10.0, noise_power_dbm_c / 10.0); }
    double noise_mw_s() const { return std::pow(10.0, noise_power_dbm_s / 10.0); }
    double transmit_power_mw() const { return std::pow(10.0, transmit_power_dbm / 10.0); }

    void validate() const;
};

// Distances plus elevation/azimuth angle pairs for the three links.
// Elevations lie in [-pi/2, pi/2] (arcsin range), azimuths in [0, pi]
// (arccos range).
struct GeometryAngles {
    double d_sr = 0.0, d_rc = 0.0, d_rs = 0.0;
    double phi_sr = 0.0, phi_rc = 0.0, phi_rs = 0.0;
    double varphi_sr = 0.0, varphi_rc = 0.0, varphi_rs = 0.0;
};

// One draw of the S->R and R->U_i channels together with the cascaded
// products h_i = diag(h_Ri) h_SR used by the STAR-RIS link.
struct ChannelRealization {
    Eigen::VectorXcd h_sr;
    Eigen::VectorXcd h_rc;
    Eigen::VectorXcd h_rs;
    Eigen::VectorXcd h_c;  // element-wise h_rc .* h_sr
    Eigen::VectorXcd h_s;  // element-wise h_rs .* h_sr
};

// Deterministic random stream: mt19937_64 plus an explicit polar Box-Muller
// transform so that sequences are reproducible bit-for-bit for a given seed
// independent of the standard library's distribution internals.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double uniform();             // [0, 1)
    double gaussian();            // standard normal
    std::complex<double> complex_gaussian();  // CN(0,1): re/im ~ N(0, 1/2)

    std::uint64_t next_raw() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Mixes a base seed with a cell index into an independent stream seed
// (splitmix64 finalizer), so adding sweep axes never perturbs the
// randomness of existing cells.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t cell_index);

// Distances, elevation (arcsin of z-difference over link distance) and
// azimuth (arccos of x-difference over the xy-projected distance) for the
// S->R and R->U_i links. Throws std::domain_error naming the offending node
// pair when a distance or xy-projection vanishes.
GeometryAngles compute_geometry(const SystemGeometry& geo);

// Array response a(phi, varphi): Kronecker product of the N_v (vertical,
// phase step -2*pi*(l/lambda)*sin(phi)*cos(varphi)) and N_h (horizontal,
// phase step -2*pi*(l/lambda)*sin(phi)*sin(varphi)) steering vectors.
// Every entry has unit modulus.
Eigen::VectorXcd array_response(double phi, double varphi, const SystemGeometry& geo);

// Rician draw of h_SR and h_Ri with scale sqrt(rho * d^-alpha), LoS part
// equal to the link's array response and i.i.d. CN(0,1) NLoS entries mixed
// with weights sqrt(K/(1+K)) and sqrt(1/(1+K)). K_linear >= 1e9 is treated
// as the pure LoS limit (the NLoS term is dropped exactly). The cascaded
// vectors are formed from the same draw, never re-sampled.
ChannelRealization sample_rician(const GeometryAngles& angles, const ChannelParams& params,
                                 const SystemGeometry& geo, RandomStream& rng);

}  // namespace starnoma

#endif
