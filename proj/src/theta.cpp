#include "qfclt/theta.hpp"

#include "qfclt/lattice.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>

namespace qfclt::theta {

namespace {

double min_eigenvalue(const Matrix& s) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

// Bound on sum of exp{-x |y|^2} over points y of a set with pairwise distances
// >= mu and |y| > radius, via #{|y| <= rho} <= (2 rho / mu + 1)^s.
double gaussian_tail(double x, double mu, int s, double radius) {
    double tail = 0.0;
    for (int k = 0;; ++k) {
        const double term = std::pow(2.0 * (radius + k + 1) / mu + 1.0, s) * std::exp(-x * std::pow(radius + k, 2));
        tail += term;
        if (k > 2 && term <= 1e-6 * tail) break;
        if (k > 2 && tail == 0.0) break;
    }
    return tail;
}

long ceil_long(double v) { return static_cast<long>(std::ceil(v)); }

}  // namespace

ThetaParams ThetaParams::make(const Matrix& s_form, Complex z, const Vector& a, const Vector& b) {
    const long s = s_form.rows();
    require(s >= 1 && s_form.cols() == s, "S must be square");
    require(a.size() == s && b.size() == s, "a and b must match the dimension of S");
    const double scale = std::max(1.0, s_form.cwiseAbs().maxCoeff());
    require((s_form - s_form.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "S must be symmetric");
    const double norm = Eigen::SelfAdjointEigenSolver<Matrix>(s_form, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
    require(min_eigenvalue(s_form) > 1e-12 * norm, "S must be positive definite");
    require(z.real() > 0.0, "Re z must be positive");
    return {0.5 * (s_form + s_form.transpose()), z, a, b};
}

ThetaValue theta_series(const ThetaParams& params, double tol, std::int64_t cap) {
    require(tol > 0.0, "tolerance must be positive");
    const int s = params.dim();
    const double x = params.z.real();
    const double mu = std::sqrt(min_eigenvalue(params.s_form));

    double radius = 1.0;
    while (gaussian_tail(x, mu, s, radius) > tol) {
        radius += 0.25;
        if (radius > 1e4) throw BudgetError("theta series tolerance unreachable", gaussian_tail(x, mu, s, radius));
    }
    ThetaValue out;
    out.tail_bound = gaussian_tail(x, mu, s, radius);

    Eigen::LLT<Matrix> llt(params.s_form);
    const Matrix u = llt.matrixU();
    const auto lat = lattice::Lattice::make(u);
    Complex sum(0.0, 0.0);
    try {
        out.terms = lattice::enumerate_ball(
            lat, -(u * params.a), radius * radius,
            [&](const lattice::IntVector& m, double q) {
                const double phase = 2.0 * kPi * m.cast<double>().dot(params.b);
                sum += std::exp(-params.z * q + Complex(0.0, phase));
            },
            cap);
    } catch (const BudgetError& e) {
        throw BudgetError("theta series exceeded its term cap", e.best_bound());
    }
    out.value = sum;
    return out;
}

PoissonCheck poisson_check(const ThetaParams& params, double tol) {
    const int s = params.dim();
    PoissonCheck out;
    const auto lhs = theta_series(params, tol);
    out.lhs = lhs.value;
    out.lhs_tail = lhs.tail_bound;

    Matrix inv = params.s_form.inverse();
    inv = 0.5 * (inv + inv.transpose());
    const Complex zinv = kPi * kPi / params.z;
    const Complex half_power = std::exp(-0.5 * std::log(params.z));
    const Complex prefactor = std::pow(kPi, 0.5 * s) / std::sqrt(params.s_form.determinant()) *
                              std::pow(half_power, s) * std::exp(Complex(0.0, -2.0 * kPi * params.a.dot(params.b)));
    const auto dual = theta_series(ThetaParams::make(inv, zinv, params.b, -params.a), tol / std::max(1.0, std::abs(prefactor)));
    out.rhs = prefactor * dual.value;
    out.rhs_tail = std::abs(prefactor) * dual.tail_bound;
    out.diff = std::abs(out.lhs - out.rhs);
    return out;
}

WeightTable WeightTable::make(long n, int s, double tail_tol) {
    require(n >= 1 && s >= 1, "n and s must be positive");
    WeightTable w;
    w.n = n;
    w.s = s;
    const double nd = static_cast<double>(n);
    auto tail = [&](long k) {
        const double lead = std::exp(-std::pow(k + 1.0, 2) / (2.0 * nd));
        return 2.0 * lead / (1.0 - std::exp(-(2.0 * k + 3.0) / (2.0 * nd)));
    };
    long k = 0;
    while (tail(k) > tail_tol) ++k;
    w.range = k;
    double z = 1.0;
    for (long j = 1; j <= k; ++j) z += 2.0 * std::exp(-static_cast<double>(j) * j / (2.0 * nd));
    w.a_n = std::sqrt(nd) / z;
    w.tail_bound = tail(k) / z;
    return w;
}

double WeightTable::p1(long m) const {
    if (m < -n || m > n) return 0.0;
    return boost::math::pdf(boost::math::binomial_distribution<double>(2.0 * n, 0.5), static_cast<double>(m + n));
}

double WeightTable::q1(long m) const {
    const double nd = static_cast<double>(n);
    return a_n / std::sqrt(nd) * std::exp(-static_cast<double>(m) * m / (2.0 * nd));
}

double WeightTable::p(const Eigen::VectorXi& m) const {
    double v = 1.0;
    for (int j = 0; j < m.size(); ++j) v *= p1(m(j));
    return v;
}

double WeightTable::q(const Eigen::VectorXi& m) const {
    double v = 1.0;
    for (int j = 0; j < m.size(); ++j) v *= q1(m(j));
    return v;
}

double WeightTable::p1_charfn(double theta) const { return std::pow(std::cos(theta / 2.0), 2.0 * n); }

double WeightTable::q1_charfn(double theta) const {
    double v = q1(0);
    for (long m = 1; m <= range; ++m) v += 2.0 * q1(m) * std::cos(m * theta);
    return v;
}

DominationCheck weight_domination_check(long n, double c2) {
    require(n >= 1, "n must be positive");
    require(c2 > 0.0 && c2 <= 0.5, "c2 must lie in (0, 1/2]");
    const auto w = WeightTable::make(n, 1);
    const double nd = static_cast<double>(n);
    DominationCheck out;
    const long top = static_cast<long>(std::floor(c2 * nd));
    for (long m = 0; m <= top; ++m) {
        const double ratio = w.p1(m) * std::sqrt(nd) * std::exp(static_cast<double>(m) * m / (2.0 * nd));
        if (ratio > out.sup_ratio) {
            out.sup_ratio = ratio;
            out.argmax = m;
        }
    }
    const long from = ceil_long(c2 * nd);
    if (from <= 0) {
        out.tail_mass = 1.0;
    } else {
        for (long m = n; m >= from; --m) out.tail_mass += 2.0 * w.p1(m);
    }
    return out;
}

SymmetrizationCheck symmetrization_check(double t, const model::DiscreteLaw& z, const model::DiscreteLaw& u,
                                         const model::DiscreteLaw& v, const model::DiscreteLaw& w, const Matrix& q,
                                         const Vector& l, double c, std::int64_t cap) {
    const int d = z.dim();
    require(u.dim() == d && v.dim() == d && w.dim() == d, "laws must share a dimension");
    require(q.rows() == d && q.cols() == d && l.size() == d, "Q and L must match the laws");
    require((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff()),
            "Q must be symmetric");
    const double product = static_cast<double>(z.size()) * u.size() * v.size() * w.size();
    if (product > static_cast<double>(cap)) throw BudgetError("symmetrization enumeration exceeds its cap", product);
    const double sym = std::pow(static_cast<double>(z.size()), 2) * std::max(u.size(), v.size()) * std::max(u.size(), v.size());
    if (sym > static_cast<double>(cap)) throw BudgetError("symmetrized enumeration exceeds its cap", sym);

    const auto total = model::convolve(model::convolve(z, u), model::convolve(v, w));
    Complex e(0.0, 0.0);
    for (std::size_t i = 0; i < total.size(); ++i) {
        const Vector& x = total.atoms[i];
        e += total.probs[i] * std::exp(Complex(0.0, t * (x.dot(q * x) + l.dot(x) + c)));
    }
    SymmetrizationCheck out;
    out.lhs = 2.0 * std::norm(e);

    const auto zt = model::symmetrize(z);
    auto pair_term = [&](const model::DiscreteLaw& other) {
        const auto ot = model::symmetrize(other);
        Complex acc(0.0, 0.0);
        for (std::size_t i = 0; i < zt.size(); ++i) {
            const Vector qz = q * zt.atoms[i];
            for (std::size_t j = 0; j < ot.size(); ++j)
                acc += zt.probs[i] * ot.probs[j] * std::exp(Complex(0.0, 2.0 * t * qz.dot(ot.atoms[j])));
        }
        return acc;
    };
    const Complex rhs = pair_term(u) + pair_term(v);
    out.rhs = rhs.real();
    out.rhs_imag = rhs.imag();
    out.holds = out.lhs <= out.rhs + 1e-12;
    return out;
}

SymmetrizationInstance SymmetrizationInstance::make(const Matrix& q, const Matrix& z, const Matrix& zp, const Matrix& cov) {
    const long d = q.rows();
    require(q.cols() == d, "Q must be square");
    require((q - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff()),
            "Q must be symmetric");
    require(z.rows() == d && zp.rows() == d && z.cols() == zp.cols() && z.cols() >= 1 && z.cols() <= d,
            "z and z' must be d x s with 1 <= s <= d");
    model::CovarianceModel::build(cov);
    return {q, z, zp, cov};
}

Matrix SymmetrizationInstance::b(double t) const { return t * z.transpose() * q * zp; }

double SymmetrizationInstance::sigma1_sq() const {
    return Eigen::SelfAdjointEigenSolver<Matrix>(cov, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

bool SymmetrizationInstance::in_class(double delta) const {
    const Matrix dz = model::CovarianceModel::build(cov).inv_half_power();
    for (int j = 0; j < s(); ++j) {
        const Vector e = Vector::Unit(d(), j);
        if ((dz * z.col(j) - e).norm() > delta || (dz * zp.col(j) - e).norm() > delta) return false;
    }
    return true;
}

namespace {

// Calls f(m) for every m in [-k, k]^s.
template <class F>
void for_box(int s, long k, F&& f) {
    Eigen::VectorXi m = Eigen::VectorXi::Constant(s, static_cast<int>(-k));
    while (true) {
        f(m);
        int i = 0;
        while (i < s && m(i) == k) m(i++) = static_cast<int>(-k);
        if (i == s) return;
        ++m(i);
    }
}

}  // namespace

Lemma75Probe lemma75_probe(double t, const SymmetrizationInstance& inst, long n) {
    const int s = inst.s();
    require(n >= 1, "n must be positive");
    require(s <= 3, "the probe enumerates s <= 3");
    require(std::pow(2.0 * n + 1.0, s) <= 1e7, "the binomial enumeration is too large");
    const auto w = WeightTable::make(n, s);
    require(std::pow(2.0 * w.range + 1.0, s) <= 2e6, "the Gaussian weight range is too large");
    const Matrix bt = inst.b(t).transpose();

    Lemma75Probe out;
    for_box(s, n, [&](const Eigen::VectorXi& mbar) {
        const Vector th = bt * mbar.cast<double>();
        double v = w.p(mbar);
        for (int j = 0; j < s; ++j) v *= w.p1_charfn(th(j));
        out.lhs += v;
    });
    for_box(s, w.range, [&](const Eigen::VectorXi& mbar) {
        const Vector th = bt * mbar.cast<double>();
        double v = w.q(mbar);
        for (int j = 0; j < s; ++j) v *= w.q1_charfn(th(j));
        out.gaussian_term += v;
    });
    const double tail = weight_domination_check(n, 0.25).tail_mass;
    out.additive_proxy = 1.0 - std::pow(1.0 - tail, s);

    const double r = std::sqrt(2.0 * kPi * kPi * static_cast<double>(n));
    out.r = r;
    const Matrix tv = t * inst.v();
    const long outer = ceil_long(6.0 * r);
    const long inner = ceil_long(6.0 / r) + 1;
    require(std::pow(2.0 * outer + 1.0, s) <= 2e7, "the theta-series range is too large");
    double acc = 0.0;
    for_box(s, outer, [&](const Eigen::VectorXi& mbar) {
        const Vector md = mbar.cast<double>();
        double v = std::exp(-md.squaredNorm() / (r * r));
        if (v < 1e-300) return;
        const Vector c = tv * md;
        for (int j = 0; j < s; ++j) {
            double f = 0.0;
            for (long k = static_cast<long>(std::floor(c(j))) - inner; k <= static_cast<long>(std::ceil(c(j))) + inner; ++k)
                f += std::exp(-r * r * std::pow(k - c(j), 2));
            v *= f;
        }
        acc += v;
    });
    out.theta_bound = std::pow(r, -s) * acc;
    return out;
}

}  // namespace qfclt::theta
