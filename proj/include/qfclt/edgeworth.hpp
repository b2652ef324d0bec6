#pragma once

// First-order Edgeworth correction E_a(x) for Q[S_N - a], in the signed-measure
// form over the Gaussian law and in the Fourier-Stieltjes form.

#include "qfclt/common.hpp"
#include "qfclt/gaussianqf.hpp"
#include "qfclt/model.hpp"
#include "qfclt/random.hpp"

#include <vector>

namespace qfclt::edgeworth {

class EdgeworthSpec {
public:
    static EdgeworthSpec build(const model::QuadraticForm& q, const model::SourceDistribution& law, const Vector& a,
                               long n);

    int dim() const { return q_.dim(); }
    long n_samples() const { return n_; }
    const Vector& shift() const { return a_; }
    const model::QuadraticForm& form() const { return q_; }
    const model::CovarianceModel& covariance() const { return c_; }
    const gaussianqf::SpectralQF& spectrum() const { return spec_; }

    /// Third moments E X_i X_j X_k with entries below 1e-12 (relative) set to zero.
    const std::vector<double>& third_moments() const { return third_; }
    /// m3(y) = <g, y> - cubic[y, y, y].
    const Vector& linear_coefficients() const { return g_; }
    const std::vector<double>& cubic_coefficients() const { return cubic_; }
    double m3(const Vector& y) const;

    /// a == 0 or vanishing third moments.
    bool vanishes() const { return a_zero_ || third_zero_; }
    bool shift_is_zero() const { return a_zero_; }

    /// The Fourier-form polynomial 3<h, Y> + 2it * third[QY, QY, QY].
    const Vector& fourier_linear() const { return h_; }

    friend Complex edgeworth_fourier_exact(double t, const EdgeworthSpec& spec);
    friend double edgeworth_fourier_envelope(double t, const EdgeworthSpec& spec);

private:
    model::QuadraticForm q_;
    model::CovarianceModel c_;
    gaussianqf::SpectralQF spec_;
    Vector a_;
    long n_ = 1;
    bool a_zero_ = false;
    bool third_zero_ = false;
    std::vector<double> third_;
    Vector g_;
    std::vector<double> cubic_;
    Vector h_;
    // Spectral coordinates: h rotated, and the third moments pushed through B = P^T C^{1/2} Q.
    Vector h_rot_;
    std::vector<double> third_rot_;
    Matrix b_;
};

struct McValue {
    double value = 0.0;
    double std_error = 0.0;
};

struct McComplex {
    Complex value;
    double std_error_re = 0.0;
    double std_error_im = 0.0;
};

/// Monte Carlo estimate of the Fourier form with the X-expectation taken exactly.
McComplex edgeworth_fourier(double t, const EdgeworthSpec& spec, long mc_draws, const RandomStream& stream);

/// Deterministic Fourier form via tilted complex Gaussian moments.
Complex edgeworth_fourier_exact(double t, const EdgeworthSpec& spec);
/// Majorant of |E^(t)| used to truncate the inversion integral.
double edgeworth_fourier_envelope(double t, const EdgeworthSpec& spec);

/// Common-random-number sample of (Q[G - a], m3(G)), sorted by the first
/// coordinate, so E_a can be read off at every x.
class MeasureSample {
public:
    MeasureSample(const EdgeworthSpec& spec, long mc_draws, const RandomStream& stream, int threads = 0);

    struct Point {
        double value = 0.0;
        double std_error = 0.0;
        /// Monotone parts: value = positive - negative.
        double positive = 0.0;
        double negative = 0.0;
    };
    Point at(double x) const;
    /// (1 / 6 sqrt N) E|m3(G)|.
    double total_variation_proxy() const { return tv_; }
    long draws() const { return draws_; }

private:
    bool zero_ = false;
    long draws_ = 0;
    double scale_ = 0.0;
    double tv_ = 0.0;
    std::vector<double> keys_;
    // Prefix sums of -m3, m3^2, max(-m3, 0), max(m3, 0).
    std::vector<double> sum_, sum_sq_, sum_pos_, sum_neg_;
};

/// E_a(x) = -(1 / 6 sqrt N) E_G[1{Q[G - a] <= x} m3(G)].
McValue edgeworth_measure(double x, const EdgeworthSpec& spec, long mc_draws, const RandomStream& stream);

/// E_a(x) from the exact Fourier form by inversion, with its error budget.
gaussianqf::InversionResult edgeworth_inverted(double x, const EdgeworthSpec& spec, double tail_tol = 1e-4);

struct CrossValidation {
    std::vector<double> xs;
    std::vector<double> measure;
    std::vector<double> measure_se;
    std::vector<double> fourier;
    std::vector<double> fourier_error;
    std::vector<double> budget;  // 3 * se + inversion error, per point
    double max_discrepancy = 0.0;
    double max_budget = 0.0;
    bool within_budget = true;
};

CrossValidation cross_validate_edgeworth(const EdgeworthSpec& spec, const std::vector<double>& xs, long mc_draws,
                                         const RandomStream& stream, double tail_tol = 1e-4, int threads = 0);

}  // namespace qfclt::edgeworth
