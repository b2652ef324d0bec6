#include "qfclt/gaussianqf.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>

namespace qfclt::gaussianqf {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

constexpr int kMaxDoublings = 20;

}  // namespace

SpectralQF SpectralQF::build(const model::QuadraticForm& q, const model::CovarianceModel& c, const Vector& a) {
    require(q.dim() == c.dim(), "Q and C differ in dimension");
    require(a.size() == q.dim(), "shift has wrong dimension");
    const Matrix m = c.half_power() * q.entries() * c.half_power();
    auto eig = model::symmetric_eigen(0.5 * (m + m.transpose()));
    SpectralQF s;
    s.lambda = eig.values;
    s.rotation = eig.vectors;
    s.shift = a;
    s.mu = eig.vectors.transpose() * (c.inv_half_power() * a);
    if (a.isZero(0.0)) s.mu.setZero();
    return s;
}

SpectralQF SpectralQF::from_spectrum(const Vector& lambda, const Vector& mu) {
    require(lambda.size() >= 1 && lambda.size() == mu.size(), "lambda and mu must be nonempty and equal length");
    require(lambda.allFinite() && mu.allFinite(), "spectrum must be finite");
    require(lambda.cwiseAbs().minCoeff() > 0.0, "spectrum must not contain zero");
    SpectralQF s;
    s.lambda = lambda;
    s.mu = mu;
    s.rotation = Matrix::Identity(lambda.size(), lambda.size());
    s.shift = mu;
    return s;
}

bool SpectralQF::isotropic() const {
    const double scale = lambda.cwiseAbs().maxCoeff();
    return (lambda.array() - lambda(0)).abs().maxCoeff() <= 1e-14 * scale;
}

double SpectralQF::mean() const {
    double m = 0.0;
    for (int j = 0; j < dim(); ++j) m += lambda(j) * (1.0 + mu(j) * mu(j));
    return m;
}

Complex cf_gaussian_qf(double t, const SpectralQF& spec) {
    Complex log_cf(0.0, 0.0);
    const Complex it(0.0, t);
    for (int j = 0; j < spec.dim(); ++j) {
        const Complex den = 1.0 - 2.0 * it * spec.lambda(j);
        log_cf += -0.5 * std::log(den) + it * spec.lambda(j) * spec.mu(j) * spec.mu(j) / den;
    }
    return std::exp(log_cf);
}

double cf_modulus_bound(double t, const SpectralQF& spec) {
    double log_b = 0.0;
    for (int j = 0; j < spec.dim(); ++j) log_b -= 0.25 * std::log1p(4.0 * t * t * spec.lambda(j) * spec.lambda(j));
    return std::exp(log_b);
}

QuadratureReport integrate_inversion_kernel(const CharFn& f, double x, double lo, double hi, double frequency,
                                            double panel_tol, double& value) {
    QuadratureReport report;
    value = 0.0;
    if (hi <= lo) return report;
    const double width = std::min(1.0, kPi / (2.0 * (std::abs(x) + std::abs(frequency) + 1.0)));
    auto g = [&](double t) {
        const Complex e(std::cos(x * t), -std::sin(x * t));
        return (e * f(t)).imag() / t;
    };
    const long count = static_cast<long>(std::ceil((hi - lo) / width));
    const double h = (hi - lo) / static_cast<double>(count);
    for (long k = 0; k < count; ++k) {
        const double a = lo + h * static_cast<double>(k);
        const double b = (k + 1 == count) ? hi : a + h;
        double err = 0.0;
        value += GK::integrate(g, a, b, 2, panel_tol, &err);
        report.error_estimate += err;
        ++report.panels;
    }
    return report;
}

double integrate_smooth(const std::function<double(double)>& g, double lo, double hi, double panel_tol,
                        QuadratureReport* report) {
    double total = 0.0;
    double a = lo;
    while (a < hi) {
        const double b = std::min(hi, a + std::max(1.0, a - lo));
        double err = 0.0;
        total += GK::integrate(g, a, b, 15, panel_tol, &err);
        if (report) {
            report->error_estimate += err;
            ++report->panels;
        }
        a = b;
    }
    return total;
}

namespace {

// Largest T <= K (halving from K) with int_T^K env(t)/t dt <= tail_tol.
double envelope_stop(const Envelope& env, double K, double tail_tol, double& tail) {
    tail = 0.0;
    double stop = K;
    const double floor_t = std::min(K, 1.0);
    auto weighted = [&](double t) { return env(t) / t; };
    while (stop / 2.0 >= floor_t) {
        const double seg = integrate_smooth(weighted, stop / 2.0, stop, 1e-10);
        if (tail + seg > tail_tol) break;
        tail += seg;
        stop /= 2.0;
    }
    return stop;
}

}  // namespace

InversionResult prawitz_invert(const CharFn& cf, double K, double x, const InversionOptions& opts) {
    require(K > 0.0 && std::isfinite(K), "cutoff K must be positive");
    require(std::isfinite(x), "x must be finite");
    InversionResult r;
    r.cutoff = K;

    QuadratureReport rem_report;
    const double mass = integrate_smooth([&](double t) { return std::abs(cf(t)); }, 0.0, K, 1e-10, &rem_report);
    r.remainder_bound = 2.0 * mass / K;

    double stop = K;
    double tail = 0.0;
    if (opts.envelope && opts.tail_tol > 0.0) stop = envelope_stop(opts.envelope, K, opts.tail_tol * kPi, tail);
    r.value_stop = stop;
    r.tail_bound = tail / kPi;

    double integral = 0.0;
    r.quadrature = integrate_inversion_kernel(cf, x, 0.0, stop, opts.frequency, opts.panel_tol, integral);
    r.quadrature.error_estimate = (r.quadrature.error_estimate + rem_report.error_estimate) / kPi;
    r.quadrature.panels += rem_report.panels;
    r.raw_value = opts.center - integral / kPi;
    r.value = std::clamp(r.raw_value, 0.0, 1.0);
    return r;
}

InversionResult invert_with_envelope(const CharFn& f, double x, const Envelope& env, double tail_tol,
                                     double frequency, double center) {
    require(std::isfinite(x), "x must be finite");
    require(tail_tol > 0.0, "tail tolerance must be positive");
    InversionResult r;
    r.cutoff = 16777216.0;
    double tail = 0.0;
    r.value_stop = envelope_stop(env, r.cutoff, tail_tol * kPi, tail);
    r.tail_bound = tail / kPi;
    double integral = 0.0;
    r.quadrature = integrate_inversion_kernel(f, x, 0.0, r.value_stop, frequency, 1e-12, integral);
    r.quadrature.error_estimate /= kPi;
    r.raw_value = center - integral / kPi;
    r.value = r.raw_value;
    return r;
}

double noncentral_chi_square_cdf(double x, double dof, double noncentrality) {
    require(dof > 0.0 && noncentrality >= 0.0, "invalid chi-square parameters");
    if (x <= 0.0) return 0.0;
    if (noncentrality == 0.0) return boost::math::cdf(boost::math::chi_squared_distribution<double>(dof), x);
    return boost::math::cdf(boost::math::non_central_chi_squared_distribution<double>(dof, noncentrality), x);
}

namespace {

double noncentral_chi_square_sf(double x, double dof, double noncentrality) {
    if (x <= 0.0) return 1.0;
    if (noncentrality == 0.0)
        return boost::math::cdf(complement(boost::math::chi_squared_distribution<double>(dof), x));
    return boost::math::cdf(complement(boost::math::non_central_chi_squared_distribution<double>(dof, noncentrality), x));
}

}  // namespace

GaussianQfCdf::GaussianQfCdf(SpectralQF spec, double tol, Method method) : spec_(std::move(spec)), tol_(tol) {
    require(tol > 0.0, "tolerance must be positive");
    require(spec_.dim() >= 1 && spec_.min_abs_lambda() > 0.0, "degenerate spectrum");
    if (method == Method::automatic && spec_.isotropic()) {
        closed_form_ = true;
        return;
    }

    auto modulus = [&](double t) { return std::abs(cf_gaussian_qf(t, spec_)); };
    double K = 64.0 / std::sqrt(spec_.min_abs_lambda());
    double mass = integrate_smooth(modulus, 0.0, K, 1e-10);
    double bound = 2.0 * mass / K;
    for (int k = 0; k < kMaxDoublings && bound > 0.5 * tol; ++k) {
        mass += integrate_smooth(modulus, K, 2.0 * K, 1e-10);
        K *= 2.0;
        bound = 2.0 * mass / K;
    }
    if (bound > 0.5 * tol)
        throw BudgetError("Prawitz remainder bound " + std::to_string(bound) + " exceeds half the tolerance", bound);
    cutoff_ = K;
    remainder_ = bound;

    const SpectralQF& s = spec_;
    double tail = 0.0;
    value_stop_ = envelope_stop([&s](double t) { return cf_modulus_bound(t, s); }, K, 0.25 * tol * kPi, tail);
    tail_ = tail / kPi;
}

InversionResult GaussianQfCdf::evaluate(double x) const {
    require(std::isfinite(x), "x must be finite");
    InversionResult r;
    if (closed_form_) {
        const double lam = spec_.lambda(0);
        const double nc = spec_.mu.squaredNorm();
        const double dof = spec_.dim();
        r.raw_value = lam > 0.0 ? noncentral_chi_square_cdf(x / lam, dof, nc) : noncentral_chi_square_sf(x / lam, dof, nc);
        r.value = std::clamp(r.raw_value, 0.0, 1.0);
        r.quadrature.error_estimate = 1e-14;
        return r;
    }
    r.cutoff = cutoff_;
    r.remainder_bound = remainder_;
    r.value_stop = value_stop_;
    r.tail_bound = tail_;
    double integral = 0.0;
    const SpectralQF& s = spec_;
    r.quadrature = integrate_inversion_kernel([&s](double t) { return cf_gaussian_qf(t, s); }, x, 0.0, value_stop_,
                                              spec_.lambda.cwiseAbs().sum() + spec_.mean(), 1e-12, integral);
    r.quadrature.error_estimate /= kPi;
    r.raw_value = 0.5 - integral / kPi;
    r.value = std::clamp(r.raw_value, 0.0, 1.0);
    if (r.total_error() > tol_)
        throw BudgetError("inversion error budget exceeded at x = " + std::to_string(x), r.total_error());
    return r;
}

double cdf_gaussian_qf(double x, const model::QuadraticForm& q, const model::CovarianceModel& c, const Vector& a,
                       double tol) {
    return GaussianQfCdf(SpectralQF::build(q, c, a), tol, GaussianQfCdf::Method::prawitz).evaluate(x).value;
}

}  // namespace qfclt::gaussianqf
