#pragma once

// Characteristic function and CDF of the Gaussian limit Q[G - a], G ~ N(0, C).

#include "qfclt/common.hpp"
#include "qfclt/model.hpp"

#include <functional>

namespace qfclt::gaussianqf {

/// Spectral reduction Q[G - a] = sum_j lambda_j (W_j - mu_j)^2 with W standard normal.
struct SpectralQF {
    Vector lambda;    // eigenvalues of C^{1/2} Q C^{1/2}, nonincreasing
    Vector mu;        // P^T C^{-1/2} a
    Matrix rotation;  // P, columns are eigenvectors of C^{1/2} Q C^{1/2}
    Vector shift;     // a

    static SpectralQF build(const model::QuadraticForm& q, const model::CovarianceModel& c, const Vector& a);
    static SpectralQF build(const model::QuadraticForm& q, const model::CovarianceModel& c) {
        return build(q, c, Vector::Zero(q.dim()));
    }
    /// Direct construction from (lambda, mu); rotation is the identity.
    static SpectralQF from_spectrum(const Vector& lambda, const Vector& mu);

    int dim() const { return static_cast<int>(lambda.size()); }
    double min_abs_lambda() const { return lambda.cwiseAbs().minCoeff(); }
    /// All lambda_j equal: Q[G - a] is a scaled noncentral chi-square.
    bool isotropic() const;
    /// E Q[G - a] = sum lambda_j (1 + mu_j^2).
    double mean() const;
};

/// E exp{i t Q[G - a]}, phases accumulated per factor.
Complex cf_gaussian_qf(double t, const SpectralQF& spec);
/// prod_j (1 + 4 t^2 lambda_j^2)^{-1/4}, an upper bound for |cf| (equality at mu = 0).
double cf_modulus_bound(double t, const SpectralQF& spec);

using CharFn = std::function<Complex(double)>;
/// Nonincreasing majorant of |cf(t)| on t >= 0.
using Envelope = std::function<double(double)>;

struct QuadratureReport {
    int panels = 0;
    double error_estimate = 0.0;
};

struct InversionResult {
    double value = 0.0;      // clamped to [0, 1]
    double raw_value = 0.0;  // unclamped
    double remainder_bound = 0.0;
    double cutoff = 0.0;
    /// Point where the oscillatory integral stops; the envelope covers (stop, cutoff].
    double value_stop = 0.0;
    double tail_bound = 0.0;
    QuadratureReport quadrature;

    double total_error() const { return remainder_bound + tail_bound + quadrature.error_estimate; }
};

struct InversionOptions {
    /// (F(+inf) + F(-inf)) / 2; 0.5 for distribution functions.
    double center = 0.5;
    /// Relative panel tolerance for the adaptive Gauss-Kronrod rule.
    double panel_tol = 1e-10;
    /// Oscillation rate of cf, used to size panels (e.g. E|Y|).
    double frequency = 1.0;
    /// Optional majorant used to stop the oscillatory integral early.
    Envelope envelope;
    /// Allowed tail mass when the envelope is used.
    double tail_tol = 0.0;
};

/// Inverts cf at x over |t| <= K with the symmetric principal-value pairing.
/// The remainder bound is (1/K) int_{|t|<=K} |cf|.
InversionResult prawitz_invert(const CharFn& cf, double K, double x, const InversionOptions& opts = {});

/// Inversion of a smooth function of bounded variation vanishing at both
/// ends (center 0) or a distribution function (center 0.5), truncated where
/// the envelope tail int_T^inf env(t)/t dt / pi drops below tail_tol. No
/// Prawitz remainder is added; remainder_bound is zero.
InversionResult invert_with_envelope(const CharFn& f, double x, const Envelope& env, double tail_tol,
                                     double frequency, double center = 0.0);

/// Oscillatory part only: int_lo^hi Im(exp(-ixt) f(t)) / t dt.
QuadratureReport integrate_inversion_kernel(const CharFn& f, double x, double lo, double hi,
                                            double frequency, double panel_tol, double& value);

/// int_lo^hi g(t) dt for a smooth nonnegative g, on geometrically growing panels.
double integrate_smooth(const std::function<double(double)>& g, double lo, double hi, double panel_tol,
                        QuadratureReport* report = nullptr);

/// H_a(x) with a certified error budget. K is chosen once at construction.
class GaussianQfCdf {
public:
    /// automatic uses the closed form for isotropic spectra; prawitz always inverts.
    enum class Method { automatic, prawitz };

    GaussianQfCdf(SpectralQF spec, double tol, Method method = Method::automatic);

    InversionResult evaluate(double x) const;
    double operator()(double x) const { return evaluate(x).value; }

    const SpectralQF& spectrum() const { return spec_; }
    double tolerance() const { return tol_; }
    double cutoff() const { return cutoff_; }
    double remainder_bound() const { return remainder_; }
    /// Isotropic spectra use the noncentral chi-square closed form.
    bool closed_form() const { return closed_form_; }

private:
    SpectralQF spec_;
    double tol_;
    bool closed_form_ = false;
    double cutoff_ = 0.0;
    double remainder_ = 0.0;
    double value_stop_ = 0.0;
    double tail_ = 0.0;
};

/// One-shot H_a(x) by Prawitz inversion; throws BudgetError if tol is unreachable.
double cdf_gaussian_qf(double x, const model::QuadraticForm& q, const model::CovarianceModel& c, const Vector& a,
                       double tol);

/// Noncentral chi-square CDF with dof degrees of freedom.
double noncentral_chi_square_cdf(double x, double dof, double noncentrality);

}  // namespace qfclt::gaussianqf
