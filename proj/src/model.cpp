#include "qfclt/model.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace qfclt::model {

namespace {

struct LexLess {
    bool operator()(const Vector& a, const Vector& b) const {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    }
};

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

void require_square_symmetric(const Matrix& m, const char* what) {
    require(m.rows() >= 1 && m.rows() == m.cols(), std::string(what) + ": expected a non-empty square matrix");
    require(m.allFinite(), std::string(what) + ": entries must be finite");
    const double scale = std::max(1.0, max_abs(m));
    require(max_abs(m - m.transpose()) <= 1e-12 * scale, std::string(what) + ": matrix is not symmetric");
}

double normalized_probability_sum(const std::vector<double>& probs) {
    double total = 0.0;
    for (double p : probs) {
        require(std::isfinite(p) && p >= 0.0, "probabilities must be finite and nonnegative");
        total += p;
    }
    require(std::abs(total - 1.0) <= 1e-12, "probabilities must sum to 1 (within 1e-12)");
    return total;
}

}  // namespace

QuadraticForm QuadraticForm::build(const Matrix& entries) {
    require_square_symmetric(entries, "quadratic form");
    QuadraticForm q;
    q.entries_ = 0.5 * (entries + entries.transpose());

    // Non-degeneracy: ker Q = {0}, tested after scaling rows to unit max-abs.
    Matrix scaled = q.entries_;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
        const double row_max = scaled.row(i).cwiseAbs().maxCoeff();
        require(row_max > 0.0, "quadratic form is degenerate (zero row)");
        scaled.row(i) /= row_max;
    }
    require(std::abs(scaled.determinant()) > 1e-12, "quadratic form is degenerate (singular)");

    const int d = q.dim();
    q.isometric_ = max_abs(q.entries_ * q.entries_ - Matrix::Identity(d, d)) <= 1e-12;
    Matrix off = q.entries_;
    off.diagonal().setZero();
    q.diagonal_ = max_abs(off) == 0.0;
    return q;
}

double QuadraticForm::bilinear_sum(const Vector& x) const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i)
        for (int j = 0; j < dim(); ++j) s += entries_(i, j) * x(i) * x(j);
    return s;
}

SymmetricEigen symmetric_eigen(const Matrix& m) {
    // Householder tridiagonalization followed by implicit symmetric QR.
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    require(solver.info() == Eigen::Success, "eigendecomposition failed");
    const Eigen::Index n = m.rows();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return solver.eigenvalues()(a) > solver.eigenvalues()(b); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = solver.eigenvalues()(order[k]);
        out.vectors.col(k) = solver.eigenvectors().col(order[k]);
    }
    return out;
}

CovarianceModel CovarianceModel::build(const Matrix& entries) {
    require_square_symmetric(entries, "covariance");
    CovarianceModel c;
    c.entries_ = 0.5 * (entries + entries.transpose());
    auto eig = symmetric_eigen(c.entries_);
    const double top = std::max(std::abs(eig.values(0)), 1e-300);
    require(eig.values(eig.values.size() - 1) > 1e-12 * top, "covariance must be positive definite");
    c.eigenvalues_ = eig.values;
    c.eigenvectors_ = eig.vectors;
    c.trace_ = c.entries_.trace();
    c.determinant_ = eig.values.prod();
    const Matrix& p = eig.vectors;
    c.half_ = p * eig.values.cwiseSqrt().asDiagonal() * p.transpose();
    c.inv_half_ = p * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() * p.transpose();
    c.inverse_ = p * eig.values.cwiseInverse().asDiagonal() * p.transpose();
    return c;
}

DiscreteLaw DiscreteLaw::make(std::vector<Vector> atoms, std::vector<double> probs) {
    require(!atoms.empty(), "law needs at least one atom");
    require(atoms.size() == probs.size(), "atoms and probabilities differ in length");
    const auto d = atoms.front().size();
    require(d >= 1, "atoms must have dimension >= 1");
    for (const auto& a : atoms) {
        require(static_cast<std::size_t>(a.size()) == static_cast<std::size_t>(d), "atoms differ in dimension");
        require(a.allFinite(), "atoms must be finite");
    }
    const double total = normalized_probability_sum(probs);

    std::map<Vector, double, LexLess> merged;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (probs[i] == 0.0) continue;
        merged[atoms[i]] += probs[i] / total;
    }
    DiscreteLaw law;
    law.atoms.reserve(merged.size());
    law.probs.reserve(merged.size());
    for (auto& [atom, p] : merged) {
        law.atoms.push_back(atom);
        law.probs.push_back(p);
    }
    return law;
}

Vector DiscreteLaw::mean() const {
    Vector m = Vector::Zero(dim());
    for (std::size_t i = 0; i < size(); ++i) m += probs[i] * atoms[i];
    return m;
}

Matrix DiscreteLaw::second_moment() const {
    Matrix m = Matrix::Zero(dim(), dim());
    for (std::size_t i = 0; i < size(); ++i) m += probs[i] * atoms[i] * atoms[i].transpose();
    return m;
}

DiscreteLaw convolve(const DiscreteLaw& x, const DiscreteLaw& y) {
    require(x.dim() == y.dim(), "convolution of laws with different dimensions");
    std::map<Vector, double, LexLess> merged;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) merged[x.atoms[i] + y.atoms[j]] += x.probs[i] * y.probs[j];
    DiscreteLaw out;
    for (auto& [atom, p] : merged) {
        out.atoms.push_back(atom);
        out.probs.push_back(p);
    }
    return out;
}

DiscreteLaw symmetrize(const DiscreteLaw& law) {
    DiscreteLaw negated = law;
    for (auto& a : negated.atoms) a = -a;
    return convolve(law, negated);
}

const char* to_string(DistKind kind) {
    switch (kind) {
        case DistKind::finite_discrete: return "finite-discrete";
        case DistKind::coordinate_product: return "coordinate-product";
        case DistKind::gaussian: return "gaussian";
    }
    return "unknown";
}

SourceDistribution SourceDistribution::finite_discrete(std::vector<Vector> atoms, std::vector<double> probs) {
    SourceDistribution s;
    s.kind_ = DistKind::finite_discrete;
    DiscreteLaw raw = DiscreteLaw::make(std::move(atoms), std::move(probs));
    s.dim_ = raw.dim();
    s.offset_ = raw.mean();
    double scale = 0.0;
    for (const auto& a : raw.atoms) scale = std::max(scale, a.cwiseAbs().maxCoeff());
    // Leave already-centered laws untouched so exact symmetry survives.
    if (s.offset_.cwiseAbs().maxCoeff() <= 1e-14 * scale) s.offset_.setZero();
    for (auto& a : raw.atoms) a -= s.offset_;
    s.law_ = DiscreteLaw::make(raw.atoms, raw.probs);
    s.compute_moments();
    return s;
}

SourceDistribution SourceDistribution::coordinate_product(std::vector<CoordinateLaw> coordinates) {
    require(!coordinates.empty(), "coordinate-product law needs at least one coordinate");
    SourceDistribution s;
    s.kind_ = DistKind::coordinate_product;
    s.dim_ = static_cast<int>(coordinates.size());
    s.offset_ = Vector::Zero(s.dim_);
    for (int j = 0; j < s.dim_; ++j) {
        auto& c = coordinates[j];
        std::vector<Vector> pts;
        for (double v : c.values) pts.push_back(Vector::Constant(1, v));
        DiscreteLaw one = DiscreteLaw::make(std::move(pts), c.probs);
        double m = one.mean()(0);
        double scale = 0.0;
        for (const auto& a : one.atoms) scale = std::max(scale, std::abs(a(0)));
        if (std::abs(m) <= 1e-14 * scale) m = 0.0;
        s.offset_(j) = m;
        CoordinateLaw centered;
        for (std::size_t i = 0; i < one.size(); ++i) {
            centered.values.push_back(one.atoms[i](0) - m);
            centered.probs.push_back(one.probs[i]);
        }
        s.coordinates_.push_back(std::move(centered));
    }
    s.compute_moments();
    return s;
}

SourceDistribution SourceDistribution::gaussian(const Matrix& covariance) {
    CovarianceModel cov = CovarianceModel::build(covariance);
    SourceDistribution s;
    s.kind_ = DistKind::gaussian;
    s.dim_ = cov.dim();
    s.offset_ = Vector::Zero(s.dim_);
    s.covariance_ = cov.entries();
    s.compute_moments();
    return s;
}

DiscreteLaw SourceDistribution::atoms() const {
    switch (kind_) {
        case DistKind::finite_discrete: return law_;
        case DistKind::coordinate_product: {
            double count = 1.0;
            for (const auto& c : coordinates_) count *= static_cast<double>(c.values.size());
            if (count > static_cast<double>(1 << 22))
                throw BudgetError("coordinate-product expansion exceeds 2^22 atoms", count);
            DiscreteLaw out;
            out.atoms.push_back(Vector::Zero(dim_));
            out.probs.push_back(1.0);
            for (int j = 0; j < dim_; ++j) {
                DiscreteLaw next;
                const auto& c = coordinates_[j];
                for (std::size_t a = 0; a < out.size(); ++a)
                    for (std::size_t k = 0; k < c.values.size(); ++k) {
                        Vector v = out.atoms[a];
                        v(j) = c.values[k];
                        next.atoms.push_back(std::move(v));
                        next.probs.push_back(out.probs[a] * c.probs[k]);
                    }
                out = std::move(next);
            }
            return out;
        }
        case DistKind::gaussian: break;
    }
    throw ValidationError("gaussian law has no atoms");
}

void SourceDistribution::compute_moments() {
    const int d = dim_;
    third_.assign(static_cast<std::size_t>(d) * d * d, 0.0);
    mean_ = Vector::Zero(d);

    if (kind_ == DistKind::gaussian) {
        const auto eig = symmetric_eigen(covariance_);
        const double tr = covariance_.trace();
        betas_[0] = tr;
        betas_[2] = tr * tr + 2.0 * (covariance_ * covariance_).trace();
        // E R^{3/2} for R = sum lambda_j Z_j^2 via R^{-1/2} = pi^{-1/2} int s^{-1/2} e^{-sR} ds
        // and E R^2 e^{-sR} = L''(s), L(s) = prod (1 + 2 s lambda_j)^{-1/2}.
        auto integrand = [&](double s) {
            double log_l = 0.0, a = 0.0, b = 0.0;
            for (Eigen::Index j = 0; j < eig.values.size(); ++j) {
                const double lam = eig.values(j);
                const double den = 1.0 + 2.0 * s * lam;
                log_l -= 0.5 * std::log(den);
                a += lam / den;
                b += lam * lam / (den * den);
            }
            return std::exp(log_l) * (a * a + 2.0 * b) / std::sqrt(s);
        };
        boost::math::quadrature::exp_sinh<double> integrator;
        betas_[1] = integrator.integrate(integrand) / std::sqrt(kPi);
        return;
    }

    if (kind_ == DistKind::coordinate_product) {
        covariance_ = Matrix::Zero(d, d);
        // Law of ||X||^2 by convolving per-coordinate squared values.
        std::map<double, double> norm_sq{{0.0, 1.0}};
        for (int j = 0; j < d; ++j) {
            const auto& c = coordinates_[j];
            double m1 = 0.0, m2 = 0.0, m3 = 0.0;
            std::map<double, double> sq;
            for (std::size_t k = 0; k < c.values.size(); ++k) {
                const double v = c.values[k], p = c.probs[k];
                m1 += p * v;
                m2 += p * v * v;
                m3 += p * v * v * v;
                sq[v * v] += p;
            }
            mean_(j) = m1;
            covariance_(j, j) = m2 - m1 * m1;
            third_[(j * d + j) * d + j] = m3;
            std::map<double, double> next;
            for (auto [u, pu] : norm_sq)
                for (auto [w, pw] : sq) next[u + w] += pu * pw;
            norm_sq = std::move(next);
        }
        betas_ = {0.0, 0.0, 0.0};
        for (auto [r, p] : norm_sq) {
            betas_[0] += p * r;
            betas_[1] += p * std::pow(r, 1.5);
            betas_[2] += p * r * r;
        }
        return;
    }

    mean_ = law_.mean();
    covariance_ = law_.second_moment() - mean_ * mean_.transpose();
    betas_ = {0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < law_.size(); ++a) {
        const Vector& x = law_.atoms[a];
        const double p = law_.probs[a];
        const double r = x.squaredNorm();
        betas_[0] += p * r;
        betas_[1] += p * std::pow(r, 1.5);
        betas_[2] += p * r * r;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) third_[(i * d + j) * d + k] += p * x(i) * x(j) * x(k);
    }
}

double SourceDistribution::beta(int q) const {
    require(q >= 2 && q <= 4, "beta_q is cached for q in {2, 3, 4}");
    return betas_[q - 2];
}

bool SourceDistribution::third_moments_vanish() const {
    double scale = std::pow(std::max(betas_[0], 1e-300), 1.5);
    for (double v : third_)
        if (std::abs(v) > 1e-12 * scale) return false;
    return true;
}

SourceDistribution symmetrize(const SourceDistribution& dist) {
    switch (dist.kind()) {
        case DistKind::gaussian: return SourceDistribution::gaussian(2.0 * dist.covariance());
        case DistKind::coordinate_product: {
            std::vector<CoordinateLaw> coords;
            for (const auto& c : dist.coordinates()) {
                std::vector<Vector> pts;
                for (double v : c.values) pts.push_back(Vector::Constant(1, v));
                DiscreteLaw sym = symmetrize(DiscreteLaw::make(std::move(pts), c.probs));
                CoordinateLaw out;
                for (std::size_t i = 0; i < sym.size(); ++i) {
                    out.values.push_back(sym.atoms[i](0));
                    out.probs.push_back(sym.probs[i]);
                }
                coords.push_back(std::move(out));
            }
            return SourceDistribution::coordinate_product(std::move(coords));
        }
        case DistKind::finite_discrete: {
            DiscreteLaw sym = symmetrize(dist.atoms());
            return SourceDistribution::finite_discrete(std::move(sym.atoms), std::move(sym.probs));
        }
    }
    throw ValidationError("unknown distribution kind");
}

ConditionReport check_condition_N(const SourceDistribution& law, double p, double delta,
                                  const std::vector<Vector>& points, std::uint64_t seed, long mc_draws) {
    require(delta >= 0.0, "delta must be nonnegative");
    require(p > 0.0 && p <= 1.0, "p must lie in (0, 1]");
    for (const auto& e : points) require(e.size() == law.dim(), "condition point has wrong dimension");

    ConditionReport report;
    const double slack = 1e-12 * std::max(1.0, delta);
    if (law.kind() != DistKind::gaussian) {
        const DiscreteLaw atoms = law.atoms();
        for (const auto& e : points) {
            double mass = 0.0;
            for (std::size_t i = 0; i < atoms.size(); ++i)
                if ((atoms.atoms[i] - e).norm() <= delta + slack) mass += atoms.probs[i];
            report.probabilities.push_back(mass);
            report.std_errors.push_back(0.0);
            report.holds = report.holds && mass >= p;
        }
        return report;
    }

    require(mc_draws >= 1, "Monte Carlo draw count must be positive");
    const Matrix half = CovarianceModel::build(law.covariance()).half_power();
    RandomStream master(seed);
    for (std::size_t k = 0; k < points.size(); ++k) {
        RandomStream rng = master.child(StreamKind::condition_check, k);
        long hits = 0;
        Vector z(law.dim());
        for (long i = 0; i < mc_draws; ++i) {
            for (int j = 0; j < law.dim(); ++j) z(j) = rng.normal();
            if ((half * z - points[k]).norm() <= delta + slack) ++hits;
        }
        const double est = static_cast<double>(hits) / static_cast<double>(mc_draws);
        report.probabilities.push_back(est);
        report.std_errors.push_back(std::sqrt(std::max(est * (1.0 - est), 0.0) / static_cast<double>(mc_draws)));
        report.holds = report.holds && est >= p;
    }
    return report;
}

ConditionReport check_condition_NQ(const SourceDistribution& law, const QuadraticForm& q, double p,
                                   double delta, const std::vector<Vector>& points, std::uint64_t seed,
                                   long mc_draws) {
    std::vector<Vector> all = points;
    for (const auto& e : points) all.push_back(q.entries() * e);
    return check_condition_N(law, p, delta, all, seed, mc_draws);
}

ShiftedInstance ShiftedInstance::make(const Vector& a, long n) {
    require(n >= 1, "N must be positive");
    return ShiftedInstance{a, n, std::sqrt(static_cast<double>(n)) * a};
}

}  // namespace qfclt::model
