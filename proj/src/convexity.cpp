#include "starnoma/convexity.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "starnoma/fbl.hpp"

namespace starnoma {

namespace {
constexpr double kLn2 = std::numbers::ln2;
constexpr double kPi = std::numbers::pi;
}  // namespace

Lemma3Result lemma3_holds(double alpha, double m, int d) {
    if (!(alpha > 0.0)) throw std::domain_error("lemma3_holds: alpha must be positive");
    if (!(m > 0.0)) throw std::domain_error("lemma3_holds: m must be positive");
    if (d <= 0) throw std::domain_error("lemma3_holds: d must be positive");

    const double t = alpha * alpha + 2.0 * alpha;
    const double c = shannon_capacity(alpha);
    const double cl2 = c * kLn2;

    Lemma3Result res;
    Lemma3Coefficients& k = res.coeffs;
    k.t = t;
    k.delta_a = (8.0 + 9.0 * t) / (4.0 * t * t);
    k.delta_b = (t * (6.0 * t + 8.0) - (3.0 * t + 8.0) * cl2) / (4.0 * t * t * kLn2);
    k.delta_c = (t * cl2 * (4.0 - 3.0 * kLn2) + t * t * (cl2 - 1.0) - 4.0 * cl2 * cl2) /
                (4.0 * t * t * kLn2 * kLn2);

    const double disc = k.delta_b * k.delta_b - 4.0 * k.delta_a * k.delta_c;
    if (disc < 0.0) {
        k.threshold_real = false;
        res.status = CertificateStatus::indeterminate;
        return res;
    }
    k.threshold = (-k.delta_b + std::sqrt(disc)) / (2.0 * k.delta_a);
    res.status = (alpha >= k.threshold) ? CertificateStatus::holds : CertificateStatus::fails;
    return res;
}

double lemma4_det(double omega_cs, double omega_ss) {
    if (!std::isfinite(omega_cs) || !std::isfinite(omega_ss))
        throw std::domain_error("lemma4_det: arguments must be finite");
    const double e_half = std::exp(-0.5 * (omega_cs * omega_cs + omega_ss * omega_ss));
    const double e_full = std::exp(-(omega_cs * omega_cs + omega_ss * omega_ss));
    return e_half / (2.0 * kPi) * (1.0 - q_function(omega_cs)) * (1.0 - q_function(omega_ss)) *
               omega_cs * omega_ss -
           e_full / (4.0 * kPi * kPi);
}

Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& point, double step) {
    if (!(step > 0.0)) throw std::domain_error("numeric_hessian: step must be positive");
    const Eigen::Index n = point.size();

    auto eval = [&](const Eigen::VectorXd& x) {
        const double v = f(x);
        if (!std::isfinite(v))
            throw std::runtime_error("numeric_hessian: non-finite function value");
        return v;
    };

    const double f0 = eval(point);
    Eigen::MatrixXd h(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = point, xm = point;
        xp[i] += step;
        xm[i] -= step;
        h(i, i) = (eval(xp) - 2.0 * f0 + eval(xm)) / (step * step);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            Eigen::VectorXd xpp = point, xpm = point, xmp = point, xmm = point;
            xpp[i] += step; xpp[j] += step;
            xpm[i] += step; xpm[j] -= step;
            xmp[i] -= step; xmp[j] += step;
            xmm[i] -= step; xmm[j] -= step;
            const double v = (eval(xpp) - eval(xpm) - eval(xmp) + eval(xmm)) / (4.0 * step * step);
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    return h;
}

bool numeric_psd_check(const std::function<double(const Eigen::VectorXd&)>& f,
                       const Eigen::VectorXd& point, double step) {
    const Eigen::MatrixXd h = numeric_hessian(f, point, step);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double spectral_norm = ev.cwiseAbs().maxCoeff();
    return ev.minCoeff() >= -1e-6 * spectral_norm;
}

}  // namespace starnoma
