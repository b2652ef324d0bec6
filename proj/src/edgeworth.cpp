#include "qfclt/edgeworth.hpp"

#include "qfclt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qfclt::edgeworth {

namespace {

constexpr long kChunk = 1 << 16;

// out_{ijk} = sum_abc A_ia A_jb A_kc T_abc (three mode products).
std::vector<double> push_tensor(const Matrix& a, const std::vector<double>& t, int d) {
    const int m = static_cast<int>(a.rows());
    std::vector<double> s1(static_cast<std::size_t>(m) * d * d, 0.0), s2(static_cast<std::size_t>(m) * m * d, 0.0),
        out(static_cast<std::size_t>(m) * m * m, 0.0);
    for (int i = 0; i < m; ++i)
        for (int x = 0; x < d; ++x)
            for (int b = 0; b < d; ++b)
                for (int c = 0; c < d; ++c) s1[(i * d + b) * d + c] += a(i, x) * t[(x * d + b) * d + c];
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int x = 0; x < d; ++x)
                for (int c = 0; c < d; ++c) s2[(i * m + j) * d + c] += a(j, x) * s1[(i * d + x) * d + c];
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                for (int x = 0; x < d; ++x) out[(i * m + j) * m + k] += a(k, x) * s2[(i * m + j) * d + x];
    return out;
}

// v_c = sum_ab A_ab T_abc.
Vector contract_pair(const Matrix& a, const std::vector<double>& t, int d) {
    Vector v = Vector::Zero(d);
    for (int x = 0; x < d; ++x)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c) v(c) += a(x, b) * t[(x * d + b) * d + c];
    return v;
}

template <class V>
auto cubic_form(const std::vector<double>& t, const V& y, int d) {
    using S = std::decay_t<decltype(y(0))>;
    S total = S(0);
    for (int i = 0; i < d; ++i) {
        S row = S(0);
        for (int j = 0; j < d; ++j) {
            S inner = S(0);
            for (int k = 0; k < d; ++k) inner += t[(i * d + j) * d + k] * y(k);
            row += inner * y(j);
        }
        total += row * y(i);
    }
    return total;
}

}  // namespace

EdgeworthSpec EdgeworthSpec::build(const model::QuadraticForm& q, const model::SourceDistribution& law,
                                   const Vector& a, long n) {
    require(n >= 1, "N must be positive");
    require(q.dim() == law.dim(), "Q and the law differ in dimension");
    require(a.size() == q.dim(), "shift has wrong dimension");
    EdgeworthSpec s;
    s.q_ = q;
    s.c_ = model::CovarianceModel::build(law.covariance());
    s.spec_ = gaussianqf::SpectralQF::build(q, s.c_, a);
    s.a_ = a;
    s.n_ = n;
    s.a_zero_ = a.isZero(0.0);

    const int d = q.dim();
    s.third_ = law.third_moments();
    const double scale = std::max(law.beta(3), 1e-300);
    s.third_zero_ = true;
    for (double& v : s.third_) {
        if (std::abs(v) <= 1e-12 * scale) v = 0.0;
        if (v != 0.0) s.third_zero_ = false;
    }

    const Matrix& cinv = s.c_.inverse();
    s.g_ = 3.0 * cinv * contract_pair(cinv, s.third_, d);
    s.cubic_ = push_tensor(cinv, s.third_, d);
    s.h_ = q.entries() * contract_pair(q.entries(), s.third_, d);

    const Matrix& p = s.spec_.rotation;
    s.b_ = p.transpose() * s.c_.half_power() * q.entries();
    s.h_rot_ = p.transpose() * s.c_.half_power() * s.h_;
    s.third_rot_ = push_tensor(s.b_, s.third_, d);
    return s;
}

double EdgeworthSpec::m3(const Vector& y) const { return g_.dot(y) - cubic_form(cubic_, y, dim()); }

Complex edgeworth_fourier_exact(double t, const EdgeworthSpec& spec) {
    if (spec.vanishes() || t == 0.0) return Complex(0.0, 0.0);
    const int d = spec.dim();
    const auto& sp = spec.spec_;
    const Complex it(0.0, t);
    Eigen::VectorXcd m(d), s(d);
    for (int j = 0; j < d; ++j) {
        const Complex den = 1.0 - 2.0 * it * sp.lambda(j);
        s(j) = 1.0 / den;
        m(j) = -sp.mu(j) / den;
    }
    Complex linear(0.0, 0.0);
    for (int j = 0; j < d; ++j) linear += spec.h_rot_(j) * m(j);
    Complex cubic = cubic_form(spec.third_rot_, m, d);
    Complex trace_part(0.0, 0.0);
    for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c) trace_part += spec.third_rot_[(a * d + a) * d + c] * s(a) * m(c);
    cubic += 3.0 * trace_part;
    const double pref = -2.0 * t * t / (3.0 * std::sqrt(static_cast<double>(spec.n_samples())));
    return pref * gaussianqf::cf_gaussian_qf(t, sp) * (3.0 * linear + 2.0 * it * cubic);
}

double edgeworth_fourier_envelope(double t, const EdgeworthSpec& spec) {
    if (spec.vanishes()) return 0.0;
    const int d = spec.dim();
    const auto& sp = spec.spec_;
    Vector am(d), as(d);
    for (int j = 0; j < d; ++j) {
        const double r = 1.0 / std::sqrt(1.0 + 4.0 * t * t * sp.lambda(j) * sp.lambda(j));
        as(j) = r;
        am(j) = std::abs(sp.mu(j)) * r;
    }
    double linear = 0.0;
    for (int j = 0; j < d; ++j) linear += std::abs(spec.h_rot_(j)) * am(j);
    double cubic = 0.0, trace_part = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c) cubic += std::abs(spec.third_rot_[(a * d + b) * d + c]) * am(a) * am(b) * am(c);
    for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c) trace_part += std::abs(spec.third_rot_[(a * d + a) * d + c]) * as(a) * am(c);
    const double pref = 2.0 * t * t / (3.0 * std::sqrt(static_cast<double>(spec.n_samples())));
    return pref * std::abs(gaussianqf::cf_gaussian_qf(t, sp)) * (3.0 * linear + 2.0 * std::abs(t) * (cubic + 3.0 * trace_part));
}

McComplex edgeworth_fourier(double t, const EdgeworthSpec& spec, long mc_draws, const RandomStream& stream) {
    require(mc_draws >= 2, "need at least two Monte Carlo draws");
    McComplex out;
    if (spec.vanishes() || t == 0.0) return out;
    const int d = spec.dim();
    const Matrix& half = spec.covariance().half_power();
    const Matrix& q = spec.form().entries();
    RandomStream rng = stream.child(StreamKind::edgeworth_fourier, 0);
    const Complex it(0.0, t);
    Complex sum(0.0, 0.0);
    double sq_re = 0.0, sq_im = 0.0;
    Vector z(d);
    for (long i = 0; i < mc_draws; ++i) {
        for (int j = 0; j < d; ++j) z(j) = rng.normal();
        const Vector y = half * z - spec.shift();
        const Vector qy = q * y;
        const double qf = y.dot(qy);
        const Complex term =
            Complex(std::cos(t * qf), std::sin(t * qf)) * (3.0 * spec.fourier_linear().dot(y) + 2.0 * it * cubic_form(spec.third_moments(), qy, d));
        sum += term;
        sq_re += term.real() * term.real();
        sq_im += term.imag() * term.imag();
    }
    const double m = static_cast<double>(mc_draws);
    const Complex mean = sum / m;
    const double pref = -2.0 * t * t / (3.0 * std::sqrt(static_cast<double>(spec.n_samples())));
    out.value = pref * mean;
    out.std_error_re = std::abs(pref) * std::sqrt(std::max(0.0, sq_re / m - mean.real() * mean.real()) / (m - 1.0));
    out.std_error_im = std::abs(pref) * std::sqrt(std::max(0.0, sq_im / m - mean.imag() * mean.imag()) / (m - 1.0));
    return out;
}

MeasureSample::MeasureSample(const EdgeworthSpec& spec, long mc_draws, const RandomStream& stream, int threads) {
    require(mc_draws >= 2, "need at least two Monte Carlo draws");
    draws_ = mc_draws;
    zero_ = spec.vanishes();
    if (zero_) return;
    scale_ = 1.0 / (6.0 * std::sqrt(static_cast<double>(spec.n_samples())));

    const int d = spec.dim();
    const Matrix& half = spec.covariance().half_power();
    std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(mc_draws));
    const std::size_t chunks = static_cast<std::size_t>((mc_draws + kChunk - 1) / kChunk);
    parallel_for(chunks, threads, [&](std::size_t c) {
        RandomStream rng = stream.child(StreamKind::edgeworth_measure, c);
        const long lo = static_cast<long>(c) * kChunk;
        const long hi = std::min(mc_draws, lo + kChunk);
        Vector z(d);
        for (long i = lo; i < hi; ++i) {
            for (int j = 0; j < d; ++j) z(j) = rng.normal();
            const Vector y = half * z;
            pts[i] = {spec.form()(y - spec.shift()), spec.m3(y)};
        }
    });
    std::sort(pts.begin(), pts.end());

    keys_.resize(pts.size());
    sum_.assign(pts.size() + 1, 0.0);
    sum_sq_.assign(pts.size() + 1, 0.0);
    sum_pos_.assign(pts.size() + 1, 0.0);
    sum_neg_.assign(pts.size() + 1, 0.0);
    double abs_total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        keys_[i] = pts[i].first;
        const double f = -pts[i].second;
        sum_[i + 1] = sum_[i] + f;
        sum_sq_[i + 1] = sum_sq_[i] + f * f;
        sum_pos_[i + 1] = sum_pos_[i] + std::max(f, 0.0);
        sum_neg_[i + 1] = sum_neg_[i] + std::max(-f, 0.0);
        abs_total += std::abs(f);
    }
    tv_ = scale_ * abs_total / static_cast<double>(mc_draws);
}

MeasureSample::Point MeasureSample::at(double x) const {
    Point p;
    if (zero_) return p;
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(keys_.begin(), keys_.end(), x) - keys_.begin());
    const double m = static_cast<double>(draws_);
    const double mean = sum_[k] / m;
    p.value = scale_ * mean;
    p.std_error = scale_ * std::sqrt(std::max(0.0, sum_sq_[k] / m - mean * mean) / (m - 1.0));
    p.positive = scale_ * sum_pos_[k] / m;
    p.negative = scale_ * sum_neg_[k] / m;
    return p;
}

McValue edgeworth_measure(double x, const EdgeworthSpec& spec, long mc_draws, const RandomStream& stream) {
    if (spec.shift_is_zero()) return {};
    const auto p = MeasureSample(spec, mc_draws, stream).at(x);
    return {p.value, p.std_error};
}

gaussianqf::InversionResult edgeworth_inverted(double x, const EdgeworthSpec& spec, double tail_tol) {
    if (spec.vanishes()) return {};
    const auto& sp = spec.spectrum();
    const double freq = sp.lambda.cwiseAbs().sum() + std::abs(sp.mean());
    return gaussianqf::invert_with_envelope([&spec](double t) { return edgeworth_fourier_exact(t, spec); }, x,
                                            [&spec](double t) { return edgeworth_fourier_envelope(t, spec); },
                                            tail_tol, freq, 0.0);
}

CrossValidation cross_validate_edgeworth(const EdgeworthSpec& spec, const std::vector<double>& xs, long mc_draws,
                                         const RandomStream& stream, double tail_tol, int threads) {
    CrossValidation cv;
    cv.xs = xs;
    const std::size_t n = xs.size();
    cv.measure.assign(n, 0.0);
    cv.measure_se.assign(n, 0.0);
    cv.fourier.assign(n, 0.0);
    cv.fourier_error.assign(n, 0.0);
    cv.budget.assign(n, 0.0);
    const MeasureSample sample(spec, mc_draws, stream, threads);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto m = sample.at(xs[i]);
        const auto f = edgeworth_inverted(xs[i], spec, tail_tol);
        cv.measure[i] = m.value;
        cv.measure_se[i] = m.std_error;
        cv.fourier[i] = f.raw_value;
        cv.fourier_error[i] = f.total_error();
        cv.budget[i] = 3.0 * m.std_error + f.total_error();
    });
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = std::abs(cv.measure[i] - cv.fourier[i]);
        cv.max_discrepancy = std::max(cv.max_discrepancy, diff);
        cv.max_budget = std::max(cv.max_budget, cv.budget[i]);
        if (diff > cv.budget[i]) cv.within_budget = false;
    }
    return cv;
}

}  // namespace qfclt::edgeworth
