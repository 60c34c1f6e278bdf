#include "inner_p4.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace starnoma::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

struct GammaChain {
    double g = 0.0, dg = 0.0, ddg = 0.0;
};

// gamma = a s / (b s + 1); valid only for s > 0 with positive denominator.
std::optional<GammaChain> gamma_chain(double s, double a, double b) {
    const double den = b * s + 1.0;
    if (!(s > 0.0) || !(den > 0.0)) return std::nullopt;
    GammaChain c;
    c.g = a * s / den;
    c.dg = a / (den * den);
    c.ddg = -2.0 * a * b / (den * den * den);
    if (!(c.g > 0.0) || !std::isfinite(c.g)) return std::nullopt;
    return c;
}

}  // namespace

std::optional<SmDerivs> eps_sm(double s, double m, int d, double a_num, double b_den) {
    const auto gc = gamma_chain(s, a_num, b_den);
    if (!gc || !(m > 0.0)) return std::nullopt;
    const OmegaDerivs od = omega_derivs(gc->g, m, d);
    const double w = od.value;
    const double phi = std_normal_pdf(w);

    const double eg = -phi * od.d_gamma;
    const double em = -phi * od.d_m;
    // dphi/dw = -w phi, so d(-phi w_g)/dg = w phi w_g^2 - phi w_gg.
    const double egg = phi * (w * od.d_gamma * od.d_gamma - od.d_gamma_gamma);
    const double egm = phi * (w * od.d_gamma * od.d_m - od.d_gamma_m);
    const double emm = phi * (w * od.d_m * od.d_m - od.d_m_m);

    SmDerivs out;
    out.v = q_function(w);
    out.ds = eg * gc->dg;
    out.dm = em;
    out.dss = egg * gc->dg * gc->dg + eg * gc->ddg;
    out.dsm = egm * gc->dg;
    out.dmm = emm;
    return out;
}

std::optional<SmDerivs> omega_sm(double s, double m, int d, double a_num, double b_den) {
    const auto gc = gamma_chain(s, a_num, b_den);
    if (!gc || !(m > 0.0)) return std::nullopt;
    const OmegaDerivs od = omega_derivs(gc->g, m, d);
    SmDerivs out;
    out.v = od.value;
    out.ds = od.d_gamma * gc->dg;
    out.dm = od.d_m;
    out.dss = od.d_gamma_gamma * gc->dg * gc->dg + od.d_gamma * gc->ddg;
    out.dsm = od.d_gamma_m * gc->dg;
    out.dmm = od.d_m_m;
    return out;
}

SmDerivs sic_composite(const SmDerivs& e1, const SmDerivs& e2) {
    SmDerivs e;
    e.v = e1.v + (1.0 - e1.v) * e2.v;
    e.ds = e1.ds * (1.0 - e2.v) + (1.0 - e1.v) * e2.ds;
    e.dm = e1.dm * (1.0 - e2.v) + (1.0 - e1.v) * e2.dm;
    e.dss = e1.dss * (1.0 - e2.v) - 2.0 * e1.ds * e2.ds + (1.0 - e1.v) * e2.dss;
    e.dsm = e1.dsm * (1.0 - e2.v) - e1.ds * e2.dm - e1.dm * e2.ds + (1.0 - e1.v) * e2.dsm;
    e.dmm = e1.dmm * (1.0 - e2.v) - 2.0 * e1.dm * e2.dm + (1.0 - e1.v) * e2.dmm;
    return e;
}

P4Solver::P4Solver(const ChannelRealization& chan, double a_c, const DesignPoint& anchor,
                   const QosRequirements& qos, const ChannelParams& params,
                   const SolverConfig& cfg, bool fix_m)
    : n_(int(chan.h_c.size())), fix_m_(fix_m), a_c_(a_c), a_s_(1.0 - a_c), eps_c_(qos.eps_c),
      eps_s_(qos.eps_s), d_c_(qos.d_c), d_s_(qos.d_s), cfg_(cfg), h_c_(chan.h_c),
      h_s_(chan.h_s) {
    if (!(a_c > 0.5) || !(a_c < 1.0))
        throw std::domain_error("solve_p4: a_c must lie in (0.5, 1)");
    if (anchor.profile.v_c.size() != n_ || anchor.profile.v_s.size() != n_)
        throw std::domain_error("solve_p4: anchor profile length mismatch");

    const double p_mw = params.transmit_power_mw();
    snr_scale_c_ = p_mw / params.noise_mw_c();
    snr_scale_s_ = p_mw / params.noise_mw_s();

    m_lo_ = min_blocklength(qos);
    m_hi_ = max_blocklength(qos, params);
    if (m_hi_ < m_lo_)
        throw InfeasibleError("latency cap below minimum blocklength", "m_range", m_lo_ - m_hi_);
    m_ref_ = m_hi_;
    m_fixed_ = anchor.alloc.m;

    omega_floor_ = q_inverse(0.3) + 1e-3;
    omega_floor_scale_ = 1.0 + omega_floor_;

    const int dim_total = dim();
    const auto lift = [&](const Eigen::VectorXcd& h, int offset, Eigen::VectorXd& u1,
                          Eigen::VectorXd& u2) {
        u1 = Eigen::VectorXd::Zero(dim_total);
        u2 = Eigen::VectorXd::Zero(dim_total);
        for (int k = 0; k < n_; ++k) {
            const double a = h[k].real(), b = h[k].imag();
            u1[offset + k] = a;
            u1[offset + n_ + k] = b;
            u2[offset + k] = -b;
            u2[offset + n_ + k] = a;
        }
    };
    lift(h_c_, 0, u1_c_, u2_c_);
    lift(h_s_, 2 * n_, u1_s_, u2_s_);

    // Surrogate (tangent) gains around the anchor profile.
    const std::complex<double> c0_c = h_c_.dot(anchor.profile.v_c);
    const std::complex<double> c0_s = h_s_.dot(anchor.profile.v_s);
    grad_s_c_ = snr_scale_c_ * 2.0 * (c0_c.real() * u1_c_ + c0_c.imag() * u2_c_);
    grad_s_s_ = snr_scale_s_ * 2.0 * (c0_s.real() * u1_s_ + c0_s.imag() * u2_s_);
    const_s_c_ = -snr_scale_c_ * std::norm(c0_c);
    const_s_s_ = -snr_scale_s_ * std::norm(c0_s);

    // Objective majorizer anchored at the true second-stage SNR of U_c.
    alpha0_ = a_s_ * snr_scale_c_ * std::norm(c0_c);
    if (!(alpha0_ > 0.0))
        throw InfeasibleError("anchor has zero effective channel for U_c", "alpha_sc", 0.0);
    m0_ = anchor.alloc.m;
    const double v0 = dispersion(alpha0_);
    const double cc0 = shannon_capacity(alpha0_);
    g0_ = std::sqrt(m0_ / v0) * (cc0 - double(d_s_) / m0_);
    c_m_ = 0.5 / std::sqrt(m0_ * v0) * (cc0 + double(d_s_) / m0_);
    const double t0 = alpha0_ * alpha0_ + 2.0 * alpha0_;
    c_alpha_ = std::sqrt(m0_ / v0) / (1.0 + alpha0_) *
               ((double(d_s_) / m0_ - cc0) / t0 + 1.0 / kLn2);

    const double kappa = a_s_ * snr_scale_c_;
    hess_obj_ = (2.0 * c_alpha_ * kappa) *
                (u1_c_ * u1_c_.transpose() + u2_c_ * u2_c_.transpose());

    x_anchor_ = pack(anchor.profile, fix_m_ ? m_fixed_ : anchor.alloc.m);
}

Eigen::VectorXd P4Solver::pack(const StarRisProfile& profile, double m) const {
    Eigen::VectorXd x(dim());
    for (int k = 0; k < n_; ++k) {
        x[k] = profile.v_c[k].real();
        x[n_ + k] = profile.v_c[k].imag();
        x[2 * n_ + k] = profile.v_s[k].real();
        x[3 * n_ + k] = profile.v_s[k].imag();
    }
    if (!fix_m_) x[4 * n_] = m / m_ref_;
    return x;
}

DesignPoint P4Solver::unpack(const Eigen::VectorXd& x) const {
    DesignPoint p;
    p.profile.v_c.resize(n_);
    p.profile.v_s.resize(n_);
    for (int k = 0; k < n_; ++k) {
        p.profile.v_c[k] = {x[k], x[n_ + k]};
        p.profile.v_s[k] = {x[2 * n_ + k], x[3 * n_ + k]};
    }
    p.alloc.a_c = a_c_;
    p.alloc.a_s = 1.0 - a_c_;
    p.alloc.m = m_of(x);

    const double beta_c = std::norm(h_c_.dot(p.profile.v_c));
    const double beta_s = std::norm(h_s_.dot(p.profile.v_s));
    const double sc = snr_scale_c_ * beta_c;
    const double ss = snr_scale_s_ * beta_s;
    p.aux.beta_c = beta_c;
    p.aux.beta_s = beta_s;
    p.aux.alpha_cc = a_c_ * sc / (a_s_ * sc + 1.0);
    p.aux.alpha_cs = a_c_ * ss / (a_s_ * ss + 1.0);
    p.aux.alpha_sc = a_s_ * sc;
    p.aux.alpha_ss = a_s_ * ss;
    return p;
}

double P4Solver::m_of(const Eigen::VectorXd& x) const {
    return fix_m_ ? m_fixed_ : x[4 * n_] * m_ref_;
}

double P4Solver::s_c_tilde(const Eigen::VectorXd& x) const {
    return grad_s_c_.dot(x) + const_s_c_;
}

double P4Solver::s_s_tilde(const Eigen::VectorXd& x) const {
    return grad_s_s_.dot(x) + const_s_s_;
}

double P4Solver::gain_c_true(const Eigen::VectorXd& x) const {
    const double re = u1_c_.dot(x);
    const double im = u2_c_.dot(x);
    return re * re + im * im;
}

double P4Solver::objective(const Eigen::VectorXd& x) const {
    const double alpha = a_s_ * snr_scale_c_ * gain_c_true(x);
    return g0_ + c_m_ * (m_of(x) - m0_) + c_alpha_ * (alpha - alpha0_);
}

void P4Solver::objective_grad(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    const double kappa = a_s_ * snr_scale_c_;
    const double re = u1_c_.dot(x);
    const double im = u2_c_.dot(x);
    grad = (2.0 * c_alpha_ * kappa) * (re * u1_c_ + im * u2_c_);
    if (!fix_m_) grad[4 * n_] += c_m_ * m_ref_;
}

std::string P4Solver::constraint_name(int j) const {
    if (j == 0) return "eps_cc";
    if (j == 1) return "eps_ss";
    if (j < 2 + n_) return "energy[" + std::to_string(j - 2) + "]";
    int k = j - (2 + n_);
    if (!fix_m_) {
        if (k == 0) return "m_max";
        if (k == 1) return "m_min";
        k -= 2;
    }
    return k == 0 ? "omega_cs_floor" : "omega_ss_floor";
}

bool P4Solver::eval_constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const {
    c.resize(num_constraints());
    const double m = m_of(x);
    if (!(m > 0.0)) return false;

    const double sc = s_c_tilde(x);
    const double ss = s_s_tilde(x);
    const auto e_cc = eps_sm(sc, m, d_c_, a_c_, a_s_);
    const auto e_cs = eps_sm(ss, m, d_c_, a_c_, a_s_);
    const auto e_ss = eps_sm(ss, m, d_s_, a_s_, 0.0);
    const auto w_cs = omega_sm(ss, m, d_c_, a_c_, a_s_);
    const auto w_ss = omega_sm(ss, m, d_s_, a_s_, 0.0);
    if (!e_cc || !e_cs || !e_ss || !w_cs || !w_ss) return false;

    c[0] = (e_cc->v - eps_c_) / eps_c_;
    c[1] = (sic_composite(*e_cs, *e_ss).v - eps_s_) / eps_s_;
    for (int k = 0; k < n_; ++k) {
        const double en = x[k] * x[k] + x[n_ + k] * x[n_ + k] + x[2 * n_ + k] * x[2 * n_ + k] +
                          x[3 * n_ + k] * x[3 * n_ + k];
        c[2 + k] = en - 1.0;
    }
    int j = 2 + n_;
    if (!fix_m_) {
        c[j++] = x[4 * n_] - m_hi_ / m_ref_;
        c[j++] = m_lo_ / m_ref_ - x[4 * n_];
    }
    c[j++] = (omega_floor_ - w_cs->v) / omega_floor_scale_;
    c[j++] = (omega_floor_ - w_ss->v) / omega_floor_scale_;
    return c.allFinite();
}

void P4Solver::accumulate_constraint(const Eigen::VectorXd& x, int j, double inv_s, double inv_s2,
                                     Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const int m_idx = fix_m_ ? -1 : 4 * n_;
    const double m = m_of(x);

    // Fills gj with the constraint gradient and adds inv_s * H_j; the rank-1
    // barrier term inv_s2 * gj gj^T is added by the caller pattern below.
    Eigen::VectorXd gj = Eigen::VectorXd::Zero(dim());

    auto add_sm = [&](const SmDerivs& e, const Eigen::VectorXd& gs, double scale, double sign) {
        gj = sign * scale * e.ds * gs;
        if (m_idx >= 0) gj[m_idx] += sign * scale * e.dm * m_ref_;
        hess += (inv_s * sign * scale * e.dss) * (gs * gs.transpose());
        if (m_idx >= 0) {
            const double cross = inv_s * sign * scale * e.dsm * m_ref_;
            hess.col(m_idx) += cross * gs;
            hess.row(m_idx) += cross * gs.transpose();
            hess(m_idx, m_idx) += inv_s * sign * scale * e.dmm * m_ref_ * m_ref_;
        }
    };

    if (j == 0) {
        const auto e = eps_sm(s_c_tilde(x), m, d_c_, a_c_, a_s_);
        add_sm(*e, grad_s_c_, 1.0 / eps_c_, 1.0);
    } else if (j == 1) {
        const double ss = s_s_tilde(x);
        const auto e1 = eps_sm(ss, m, d_c_, a_c_, a_s_);
        const auto e2 = eps_sm(ss, m, d_s_, a_s_, 0.0);
        add_sm(sic_composite(*e1, *e2), grad_s_s_, 1.0 / eps_s_, 1.0);
    } else if (j < 2 + n_) {
        const int k = j - 2;
        const int idx[4] = {k, n_ + k, 2 * n_ + k, 3 * n_ + k};
        for (int i : idx) {
            gj[i] = 2.0 * x[i];
            hess(i, i) += inv_s * 2.0;
        }
    } else {
        int k = j - (2 + n_);
        if (!fix_m_ && k == 0) {
            gj[m_idx] = 1.0;
        } else if (!fix_m_ && k == 1) {
            gj[m_idx] = -1.0;
        } else {
            if (!fix_m_) k -= 2;
            const double ss = s_s_tilde(x);
            const auto w = (k == 0) ? omega_sm(ss, m, d_c_, a_c_, a_s_)
                                    : omega_sm(ss, m, d_s_, a_s_, 0.0);
            add_sm(*w, grad_s_s_, 1.0 / omega_floor_scale_, -1.0);
        }
    }

    grad += inv_s * gj;
    hess += inv_s2 * (gj * gj.transpose());
}

double P4Solver::barrier_value(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd c;
    if (!eval_constraints(x, c)) return kInf;
    double phi = t * objective(x);
    for (int j = 0; j < c.size(); ++j) {
        if (c[j] >= 0.0) return kInf;
        phi -= std::log(-c[j]);
    }
    return phi;
}

bool P4Solver::newton_rounds(Eigen::VectorXd& x, double t) {
    Eigen::VectorXd c(num_constraints());
    for (int iter = 0; iter < 80; ++iter) {
        if (!eval_constraints(x, c)) return false;

        Eigen::VectorXd grad;
        objective_grad(x, grad);
        grad *= t;
        Eigen::MatrixXd hess = t * hess_obj_;
        for (int j = 0; j < num_constraints(); ++j) {
            const double s = -c[j];
            accumulate_constraint(x, j, 1.0 / s, 1.0 / (s * s), grad, hess);
        }

        Eigen::VectorXd step;
        double ridge = 0.0;
        for (int attempt = 0;; ++attempt) {
            Eigen::MatrixXd h = hess;
            if (ridge > 0.0) h.diagonal().array() += ridge;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(-grad);
                if (step.allFinite() && grad.dot(step) < 0.0) break;
            }
            if (attempt >= 8) return false;
            ridge = (ridge == 0.0) ? 1e-10 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff())
                                   : ridge * 100.0;
        }

        const double decrement2 = -grad.dot(step);
        if (0.5 * decrement2 <= 1e-8) return true;

        const double phi0 = barrier_value(x, t);
        double alpha = 1.0;
        bool accepted = false;
        while (alpha > 1e-14) {
            const Eigen::VectorXd xt = x + alpha * step;
            const double phi1 = barrier_value(xt, t);
            if (phi1 <= phi0 + 1e-4 * alpha * grad.dot(step)) {
                x = xt;
                accepted = true;
                break;
            }
            alpha *= cfg_.line_search_shrink;
        }
        if (!accepted) return 0.5 * decrement2 <= 1e-4;  // stalled near optimum is fine
    }
    return false;
}

Eigen::VectorXd P4Solver::restore_feasibility(const Eigen::VectorXd& x0) const {
    // Phase-1: minimize tau subject to c_j(x) <= tau via the same barrier
    // machinery on the lifted variable y = [x; tau].
    const int d = dim();
    Eigen::VectorXd c(num_constraints());
    if (!eval_constraints(x0, c))
        throw InfeasibleError("restoration start outside model domain", "domain", kInf);

    Eigen::VectorXd y(d + 1);
    y.head(d) = x0;
    y[d] = std::max(c.maxCoeff(), 0.0) + 0.1 * std::max(1.0, std::abs(c.maxCoeff()));

    auto phase1_value = [&](const Eigen::VectorXd& yy, double t) {
        Eigen::VectorXd cc;
        if (!eval_constraints(yy.head(d), cc)) return kInf;
        double phi = t * yy[d];
        for (int j = 0; j < cc.size(); ++j) {
            const double s = yy[d] - cc[j];
            if (s <= 0.0) return kInf;
            phi -= std::log(s);
        }
        return phi;
    };

    double t = 1.0;
    for (int round = 0; round < 24; ++round) {
        for (int iter = 0; iter < 60; ++iter) {
            if (!eval_constraints(y.head(d), c)) break;
            if (c.maxCoeff() <= -1e-9) return y.head(d);  // strictly feasible, done

            Eigen::VectorXd grad = Eigen::VectorXd::Zero(d + 1);
            Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d + 1, d + 1);
            grad[d] = t;
            for (int j = 0; j < num_constraints(); ++j) {
                const double s = y[d] - c[j];
                Eigen::MatrixXd hj = Eigen::MatrixXd::Zero(d, d);
                Eigen::VectorXd gj = Eigen::VectorXd::Zero(d);
                accumulate_constraint(y.head(d), j, 1.0, 0.0, gj, hj);  // gj = grad, hj = H_j
                grad.head(d) += gj / s;
                grad[d] -= 1.0 / s;
                hess.topLeftCorner(d, d) += hj / s + (gj * gj.transpose()) / (s * s);
                hess.col(d).head(d) -= gj / (s * s);
                hess.row(d).head(d) -= gj.transpose() / (s * s);
                hess(d, d) += 1.0 / (s * s);
            }

            Eigen::VectorXd step;
            double ridge = 0.0;
            bool solved = false;
            for (int attempt = 0; attempt < 10; ++attempt) {
                Eigen::MatrixXd h = hess;
                h.diagonal().array() += ridge;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
                if (ldlt.info() == Eigen::Success) {
                    step = ldlt.solve(-grad);
                    if (step.allFinite() && grad.dot(step) < 0.0) {
                        solved = true;
                        break;
                    }
                }
                ridge = (ridge == 0.0) ? 1e-8 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff())
                                       : ridge * 100.0;
            }
            if (!solved) break;
            if (0.5 * -grad.dot(step) <= 1e-6) break;

            const double phi0 = phase1_value(y, t);
            double alpha = 1.0;
            while (alpha > 1e-14) {
                const Eigen::VectorXd yt = y + alpha * step;
                if (phase1_value(yt, t) <= phi0 + 1e-4 * alpha * grad.dot(step)) {
                    y = yt;
                    break;
                }
                alpha *= 0.5;
            }
            if (alpha <= 1e-14) break;
        }
        if (eval_constraints(y.head(d), c) && c.maxCoeff() <= -1e-9) return y.head(d);
        t *= 10.0;
    }

    if (eval_constraints(y.head(d), c) && c.maxCoeff() < 0.0) return y.head(d);
    int worst = 0;
    c.maxCoeff(&worst);
    throw InfeasibleError("subproblem infeasible (restoration failed)", constraint_name(worst),
                          c[worst]);
}

Eigen::VectorXd P4Solver::interior_start() const {
    Eigen::VectorXd x = x_anchor_;

    if (!fix_m_) {
        const double span = m_hi_ - m_lo_;
        const double margin = std::max(1e-4 * span, 1e-6);
        x[4 * n_] = std::clamp(x[4 * n_], (m_lo_ + margin) / m_ref_, (m_hi_ - margin) / m_ref_);
    }

    // Pull exactly-tight energy elements strictly inside.
    double max_energy = 0.0;
    for (int k = 0; k < n_; ++k)
        max_energy = std::max(max_energy, x[k] * x[k] + x[n_ + k] * x[n_ + k] +
                                              x[2 * n_ + k] * x[2 * n_ + k] +
                                              x[3 * n_ + k] * x[3 * n_ + k]);
    if (max_energy > 1.0 - 1e-9) {
        const double scale = std::sqrt((1.0 - 1e-8) / max_energy);
        x.head(4 * n_) *= scale;
    }

    Eigen::VectorXd c;
    auto strictly_ok = [&]() { return eval_constraints(x, c) && c.maxCoeff() < -1e-10; };
    if (strictly_ok()) return x;

    // A tight reliability wall relaxes monotonically in m; a tight eps_cc
    // also relaxes when v_c grows slightly (headroom exists after the
    // energy pull above).
    if (eval_constraints(x, c) && c[0] > -1e-10) {
        const double scale = 1.0 + 1e-6;
        x.head(2 * n_) *= scale;
        if (strictly_ok()) return x;
    }
    if (!fix_m_) {
        for (int tries = 0; tries < 40; ++tries) {
            const double m_now = x[4 * n_] * m_ref_;
            const double m_next = m_now + std::max(1.0, 0.05 * (m_hi_ - m_now));
            if (m_next >= m_hi_ - 1e-6) break;
            x[4 * n_] = m_next / m_ref_;
            if (strictly_ok()) return x;
        }
    }

    return restore_feasibility(x);
}

DesignPoint P4Solver::run() {
    Eigen::VectorXd x = interior_start();
    double t = 1.0;
    const double gap_tol = std::max(1e-9, 0.1 * cfg_.inner_tol);
    for (int round = 0; round < 44; ++round) {
        const bool centered = newton_rounds(x, t);
        if (!centered && round == 0)
            throw SolverError("inner solver stalled on the first barrier round");
        if (double(num_constraints()) / t <= gap_tol) break;
        if (!centered) break;  // accept the last feasible iterate
        t *= cfg_.barrier_mu;
    }
    return unpack(x);
}

}  // namespace starnoma::detail
