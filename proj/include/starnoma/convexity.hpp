#ifndef STARNOMA_CONVEXITY_HPP
#define STARNOMA_CONVEXITY_HPP

#include <Eigen/Dense>
#include <functional>

namespace starnoma {

// Coefficients of the quadratic SNR condition that certifies the curvature
// regime of omega(alpha, m). The threshold is the larger root of
// Delta_a r^2 + Delta_b r + Delta_c = 0.
struct Lemma3Coefficients {
    double t = 0.0;  // alpha^2 + 2 alpha
    double delta_a = 0.0;
    double delta_b = 0.0;
    double delta_c = 0.0;
    double threshold = 0.0;
    bool threshold_real = true;  // false when the discriminant is negative
};

enum class CertificateStatus { holds, fails, indeterminate };

struct Lemma3Result {
    CertificateStatus status = CertificateStatus::indeterminate;
    Lemma3Coefficients coeffs;

    bool holds() const { return status == CertificateStatus::holds; }
};

// Evaluates the certificate condition r >= (-Delta_b + sqrt(Delta_b^2 -
// 4 Delta_a Delta_c)) / (2 Delta_a) with the condition variable r read as
// the SNR alpha itself (the only free interpretation; the coefficient record
// is returned so the threshold stays auditable). In the certified regime
// omega(alpha, m) is jointly concave in (alpha, m), which is exactly what
// makes eps = Q(omega) convex and the tangent-plane majorizer of the
// objective an upper bound; the test suite cross-validates against a
// finite-difference Hessian oracle on -omega. A negative discriminant is
// reported as indeterminate, never as a certificate.
// m and d do not enter the analytic condition; they are accepted so call
// sites can log the full operating point.
Lemma3Result lemma3_holds(double alpha, double m, int d);

// Determinant of the Hessian of eps_ss(omega_cs, omega_ss) =
// Q(omega_cs) + (1 - Q(omega_cs)) Q(omega_ss):
//   (1/2pi) e^{-(w1^2+w2^2)/2} (1-Q(w1)) (1-Q(w2)) w1 w2
//   - (1/4pi^2) e^{-w1^2-w2^2}.
// Nonnegative (together with positive diagonal entries) throughout the
// regime w1, w2 > Q^-1(0.3) with eps_ss <= 0.3.
double lemma4_det(double omega_cs, double omega_ss);

// Central-difference Hessian of f at the given point, tested for positive
// semidefiniteness: min eigenvalue >= -1e-6 * spectral norm. Throws on
// non-finite function values.
bool numeric_psd_check(const std::function<double(const Eigen::VectorXd&)>& f,
                       const Eigen::VectorXd& point, double step);

// The Hessian itself, exposed for oracle-style tests.
Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& point, double step);

}  // namespace starnoma

#endif
