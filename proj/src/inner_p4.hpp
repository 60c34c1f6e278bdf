// Internal machinery for the convex MM subproblem: not installed, shared by
// the AO+MM optimizer and the BCD baseline.
#ifndef STARNOMA_INNER_P4_HPP
#define STARNOMA_INNER_P4_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "starnoma/channel.hpp"
#include "starnoma/fbl.hpp"
#include "starnoma/optimizer.hpp"

namespace starnoma::detail {

// Value and partials of a scalar function of (s, m), where s is the
// SNR-scaled effective gain and m the blocklength.
struct SmDerivs {
    double v = 0.0;
    double ds = 0.0, dm = 0.0;
    double dss = 0.0, dsm = 0.0, dmm = 0.0;
};

// eps(gamma(s), m, d) with gamma = A s / (B s + 1); returns nullopt outside
// the model domain (s <= 0 or gamma <= 0).
std::optional<SmDerivs> eps_sm(double s, double m, int d, double a_num, double b_den);

// omega(gamma(s), m, d) with the same gamma map.
std::optional<SmDerivs> omega_sm(double s, double m, int d, double a_num, double b_den);

// SIC composite e1 + (1 - e1) e2 of two SmDerivs sharing (s, m).
SmDerivs sic_composite(const SmDerivs& e1, const SmDerivs& e2);

// Log-barrier interior-point solver for the MM subproblem at fixed a_c:
//
//   min  g~(alpha_sc(v_c), m)    [tangent majorizer around the anchor]
//   s.t. eps(gamma_cc(s_c~), m, d_c) <= eps_c
//        SIC composite at U_s      <= eps_s
//        |v_c[n]|^2 + |v_s[n]|^2   <= 1          for every element
//        m_lo <= m <= m_hi
//        omega_cs, omega_ss        >= Q^-1(0.3) + 1e-3
//
// where s_c~, s_s~ are the anchor-linearized (surrogate) gains in SNR units
// and alpha_sc uses the exact quadratic gain (keeping the objective an upper
// bound of the true one). Variables are the 4N real coefficient coordinates
// plus (unless frozen for the BCD beamforming block) the blocklength.
class P4Solver {
  public:
    P4Solver(const ChannelRealization& chan, double a_c, const DesignPoint& anchor,
             const QosRequirements& qos, const ChannelParams& params, const SolverConfig& cfg,
             bool fix_m);

    // Runs restoration (if needed) + barrier method; returns the new point.
    DesignPoint run();

    int num_constraints() const { return n_ + 6; }
    int dim() const { return 4 * n_ + (fix_m_ ? 0 : 1); }

  private:
    // Constraint values, scaled so feasible magnitudes are O(1); false when
    // the point leaves the model domain.
    bool eval_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const;
    double objective(const Eigen::VectorXd& x) const;
    void objective_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;

    // Accumulates gradient and Hessian of constraint j at an in-domain x.
    void accumulate_constraint(const Eigen::VectorXd& x, int j, double inv_s, double inv_s2,
                               Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const;

    std::string constraint_name(int j) const;

    double barrier_value(const Eigen::VectorXd& x, double t) const;
    bool newton_rounds(Eigen::VectorXd& x, double t);
    Eigen::VectorXd restore_feasibility(const Eigen::VectorXd& x0) const;
    Eigen::VectorXd interior_start() const;

    double s_c_tilde(const Eigen::VectorXd& x) const;  // surrogate gain, SNR units
    double s_s_tilde(const Eigen::VectorXd& x) const;
    double gain_c_true(const Eigen::VectorXd& x) const;
    double m_of(const Eigen::VectorXd& x) const;

    DesignPoint unpack(const Eigen::VectorXd& x) const;
    Eigen::VectorXd pack(const StarRisProfile& profile, double m) const;

    int n_ = 0;
    bool fix_m_ = false;
    double a_c_ = 0.0, a_s_ = 0.0;
    double snr_scale_c_ = 0.0, snr_scale_s_ = 0.0;  // P / sigma_i^2
    double eps_c_ = 0.0, eps_s_ = 0.0;
    int d_c_ = 0, d_s_ = 0;
    double m_lo_ = 0.0, m_hi_ = 0.0, m_ref_ = 0.0;
    double m_fixed_ = 0.0;
    double omega_floor_ = 0.0, omega_floor_scale_ = 1.0;
    SolverConfig cfg_;

    Eigen::VectorXcd h_c_, h_s_;
    // Real lifts of h_i for the quadratic/affine gain forms.
    Eigen::VectorXd u1_c_, u2_c_, u1_s_, u2_s_;          // within the 4N block
    Eigen::VectorXd grad_s_c_, grad_s_s_;                // d s~_i / dx (constant)
    double const_s_c_ = 0.0, const_s_s_ = 0.0;
    // Objective surrogate data.
    double alpha0_ = 0.0, m0_ = 0.0, g0_ = 0.0, c_alpha_ = 0.0, c_m_ = 0.0;
    Eigen::MatrixXd hess_obj_;  // constant PSD part from the exact quadratic gain
    Eigen::VectorXd x_anchor_;
};

}  // namespace starnoma::detail

#endif
