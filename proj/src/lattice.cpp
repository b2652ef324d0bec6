#include "qfclt/lattice.hpp"

#include "qfclt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qfclt::lattice {

namespace {

struct Gso {
    Matrix mu;     // mu(i, j) for j < i
    Vector norms;  // |b*_i|^2
};

Gso gram_schmidt(const Matrix& b) {
    const int m = static_cast<int>(b.cols());
    Gso g{Matrix::Zero(m, m), Vector::Zero(m)};
    Matrix star = b;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < i; ++j) {
            g.mu(i, j) = b.col(i).dot(star.col(j)) / g.norms(j);
            star.col(i) -= g.mu(i, j) * star.col(j);
        }
        g.norms(i) = star.col(i).squaredNorm();
    }
    return g;
}

double spectral_norm(const Matrix& a) {
    return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

// Adds v to an orthonormal set if it is independent of it.
bool extend_independent(std::vector<Vector>& ortho, const Vector& v) {
    Vector r = v;
    for (const auto& e : ortho) r -= e.dot(r) * e;
    for (const auto& e : ortho) r -= e.dot(r) * e;
    if (r.norm() <= 1e-9 * v.norm()) return false;
    ortho.push_back(r.normalized());
    return true;
}

std::int64_t gcd_of(const IntVector& x) {
    std::int64_t g = 0;
    for (int i = 0; i < x.size(); ++i) g = std::gcd(g, x(i) < 0 ? -x(i) : x(i));
    return g;
}

}  // namespace

Lattice Lattice::make(const Matrix& basis) {
    require(basis.cols() >= 1 && basis.cols() <= basis.rows(), "lattice basis must have 1 <= rank <= ambient dimension");
    require(basis.allFinite(), "lattice basis must be finite");
    Lattice lat;
    lat.basis_ = basis;
    double scale = 1.0;
    for (int j = 0; j < basis.cols(); ++j) scale *= basis.col(j).squaredNorm();
    const double gram_det = std::pow(lat.det(), 2);
    require(scale > 0.0 && gram_det > 1e-10 * scale, "lattice basis vectors must be linearly independent");
    return lat;
}

double Lattice::det() const {
    Eigen::HouseholderQR<Matrix> qr(basis_);
    const Matrix r = qr.matrixQR().topRows(basis_.cols()).triangularView<Eigen::Upper>();
    return std::abs(r.diagonal().prod());
}

NormSpec NormSpec::weighted_sup(double sigma1_sq, const Matrix& v) {
    require(sigma1_sq > 0.0, "sigma1^2 must be positive");
    require(v.rows() == v.cols() && v.rows() >= 1, "V must be square");
    Eigen::FullPivLU<Matrix> lu(v);
    require(lu.isInvertible(), "V must be invertible");
    NormSpec n(Kind::weighted_sup);
    n.sigma1_sq_ = sigma1_sq;
    n.v_inv_ = lu.inverse();
    n.form_ = v;
    return n;
}

NormSpec NormSpec::quadratic(const Matrix& a) {
    require(a.rows() == a.cols(), "norm form must be square");
    require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()),
            "norm form must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    require(es.eigenvalues().minCoeff() > 0.0, "norm form must be positive definite");
    NormSpec n(Kind::quadratic);
    n.form_ = a;
    n.form_min_ = es.eigenvalues().minCoeff();
    n.form_max_ = es.eigenvalues().maxCoeff();
    return n;
}

double NormSpec::operator()(const Vector& x) const {
    switch (kind_) {
        case Kind::euclidean:
            return x.norm();
        case Kind::sup:
            return x.cwiseAbs().maxCoeff();
        case Kind::quadratic:
            require(x.size() == form_.rows(), "norm dimension mismatch");
            return std::sqrt(std::max(0.0, x.dot(form_ * x)));
        case Kind::weighted_sup: {
            const long s = v_inv_.rows();
            require(x.size() == 2 * s, "weighted sup norm acts on R^{2s}");
            return std::max(x.head(s).cwiseAbs().maxCoeff(), sigma1_sq_ * (v_inv_ * x.tail(s)).cwiseAbs().maxCoeff());
        }
    }
    return 0.0;
}

double NormSpec::lower_constant(int dim) const {
    switch (kind_) {
        case Kind::euclidean:
            return 1.0;
        case Kind::sup:
            return 1.0 / std::sqrt(static_cast<double>(dim));
        case Kind::quadratic:
            return std::sqrt(form_min_);
        case Kind::weighted_sup:
            return std::min(1.0, sigma1_sq_ / spectral_norm(form_)) / std::sqrt(static_cast<double>(dim));
    }
    return 1.0;
}

double NormSpec::upper_constant(int) const {
    switch (kind_) {
        case Kind::euclidean:
        case Kind::sup:
            return 1.0;
        case Kind::quadratic:
            return std::sqrt(form_max_);
        case Kind::weighted_sup:
            return std::max(1.0, sigma1_sq_ * spectral_norm(v_inv_));
    }
    return 1.0;
}

LllResult lll_reduce(const Lattice& lat, double delta) { return lll_reduce_basis(lat.basis(), delta); }

LllResult lll_reduce_basis(const Matrix& basis, double delta) {
    require(delta > 0.25 && delta < 1.0, "LLL parameter must lie in (1/4, 1)");
    require(basis.cols() >= 1 && basis.cols() <= basis.rows() && basis.allFinite(), "invalid lattice basis");
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    qr.setThreshold(1e-12);
    require(qr.rank() == basis.cols(), "lattice basis vectors must be linearly independent");
    Matrix b = basis;
    const int m = static_cast<int>(basis.cols());
    IntMatrix u = IntMatrix::Identity(m, m);
    Gso g = gram_schmidt(b);
    int k = 1;
    long guard = 0;
    while (k < m) {
        if (++guard > 1'000'000) throw BudgetError("LLL did not terminate", 0.0);
        for (int j = k - 1; j >= 0; --j) {
            const double q = std::round(g.mu(k, j));
            if (q == 0.0) continue;
            b.col(k) -= q * b.col(j);
            u.col(k) -= static_cast<std::int64_t>(q) * u.col(j);
            for (int i = 0; i < j; ++i) g.mu(k, i) -= q * g.mu(j, i);
            g.mu(k, j) -= q;
        }
        if (g.norms(k) >= (delta - g.mu(k, k - 1) * g.mu(k, k - 1)) * g.norms(k - 1)) {
            ++k;
        } else {
            b.col(k).swap(b.col(k - 1));
            u.col(k).swap(u.col(k - 1));
            g = gram_schmidt(b);
            k = std::max(k - 1, 1);
        }
    }
    return {Lattice::make(b), u};
}

bool is_lll_reduced(const Lattice& lat, double delta, double tol) {
    const Gso g = gram_schmidt(lat.basis());
    for (int i = 1; i < lat.rank(); ++i) {
        for (int j = 0; j < i; ++j)
            if (std::abs(g.mu(i, j)) > 0.5 + tol) return false;
        if (g.norms(i) < (delta - g.mu(i, i - 1) * g.mu(i, i - 1)) * g.norms(i - 1) * (1.0 - tol)) return false;
    }
    return true;
}

std::int64_t enumerate_ball(const Lattice& lat, const Vector& center, double radius_sq,
                            const std::function<void(const IntVector&, double)>& visit, std::int64_t cap) {
    require(center.size() == lat.ambient_dim(), "center dimension mismatch");
    if (radius_sq < 0.0) return 0;
    const LllResult red = lll_reduce(lat);
    const Matrix& b = red.reduced.basis();
    const int m = lat.rank();
    const Vector y = b.colPivHouseholderQr().solve(center);
    const double perp = (center - b * y).squaredNorm();
    const double budget = radius_sq - perp;
    if (budget < -1e-12 * std::max(1.0, radius_sq)) return 0;

    Eigen::LLT<Matrix> llt(b.transpose() * b);
    const Matrix r = llt.matrixU();
    const double slack = 1e-12 * std::max(radius_sq, 1e-300);

    IntVector x = IntVector::Zero(m);
    IntVector orig(m);
    std::int64_t visits = 0;
    std::function<void(int, double)> level = [&](int i, double used) {
        double off = 0.0;
        for (int j = i + 1; j < m; ++j) off += r(i, j) * (static_cast<double>(x(j)) - y(j));
        const double ctr = y(i) - off / r(i, i);
        const double rem = budget - used;
        if (rem < -slack) return;
        const double half = std::sqrt(std::max(0.0, rem + slack)) / r(i, i);
        const auto lo = static_cast<std::int64_t>(std::ceil(ctr - half));
        const auto hi = static_cast<std::int64_t>(std::floor(ctr + half));
        for (std::int64_t v = lo; v <= hi; ++v) {
            x(i) = v;
            const double term = r(i, i) * (static_cast<double>(v) - ctr);
            const double next = used + term * term;
            if (next > budget + slack) continue;
            if (i == 0) {
                if (++visits > cap) throw BudgetError("lattice enumeration exceeded its cap", static_cast<double>(visits));
                orig = red.transform * x;
                visit(orig, next + perp);
            } else {
                level(i - 1, next);
            }
        }
    };
    level(m - 1, 0.0);
    return visits;
}

const char* to_string(MinimaMethod m) {
    return m == MinimaMethod::exact_enumeration ? "exact-enumeration" : "lll-approx";
}

SuccessiveMinima successive_minima(const Lattice& lat, const NormSpec& norm, MinimaMethod mode, std::int64_t cap) {
    const LllResult red = lll_reduce(lat);
    const int m = lat.rank();
    const int n = lat.ambient_dim();

    auto approx = [&] {
        SuccessiveMinima out;
        out.method = MinimaMethod::lll_approx;
        std::vector<std::pair<double, Vector>> cols;
        for (int j = 0; j < m; ++j) cols.emplace_back(norm(red.reduced.basis().col(j)), red.reduced.basis().col(j));
        std::stable_sort(cols.begin(), cols.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        out.values.resize(m);
        for (int j = 0; j < m; ++j) {
            out.values(j) = cols[j].first;
            out.witnesses.push_back(cols[j].second);
        }
        return out;
    };
    if (mode == MinimaMethod::lll_approx) return approx();
    require(m <= 10, "exact successive minima are limited to rank <= 10");

    double bound = 0.0;
    for (int j = 0; j < m; ++j) bound = std::max(bound, norm(red.reduced.basis().col(j)));
    const double rho = bound / norm.lower_constant(n);
    std::vector<std::pair<double, Vector>> cands;
    try {
        enumerate_ball(
            lat, Vector::Zero(n), rho * rho * (1.0 + 1e-10),
            [&](const IntVector& x, double) {
                int lead = 0;
                while (lead < x.size() && x(lead) == 0) ++lead;
                if (lead == x.size() || x(lead) < 0) return;
                const Vector v = lat.point(x);
                const double f = norm(v);
                if (f <= bound * (1.0 + 1e-10)) cands.emplace_back(f, v);
            },
            cap);
    } catch (const BudgetError&) {
        auto out = approx();
        out.fell_back = true;
        return out;
    }
    std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    SuccessiveMinima out;
    out.method = MinimaMethod::exact_enumeration;
    out.values.resize(m);
    std::vector<Vector> ortho;
    int found = 0;
    for (const auto& [f, v] : cands) {
        if (found == m) break;
        if (extend_independent(ortho, v)) {
            out.values(found++) = f;
            out.witnesses.push_back(v);
        }
    }
    if (found < m) {
        auto fallback = approx();
        fallback.fell_back = true;
        return fallback;
    }
    return out;
}

AlphaProfile alpha_characteristic(const Lattice& lat, MinimaMethod mode, bool exact_sup) {
    const int m = lat.rank();
    AlphaProfile out;
    out.alpha_l.resize(m);
    if (exact_sup) {
        require(m <= 3, "exact alpha sup is limited to rank <= 3");
        mode = MinimaMethod::exact_enumeration;
    }
    const auto minima = successive_minima(lat, NormSpec::euclidean(), mode);
    out.method = minima.method;
    double prod = 1.0;
    for (int l = 0; l < m; ++l) {
        prod *= minima.values(l);
        out.alpha_l(l) = 1.0 / prod;
    }
    out.alpha_l(m - 1) = 1.0 / lat.det();

    if (exact_sup && m == 3 && minima.method == MinimaMethod::exact_enumeration) {
        // Reduced bases of the densest plane have both vectors within (2 / sqrt 3) M_2.
        const double rho = 2.0 / std::sqrt(3.0) * minima.values(1) * (1.0 + 1e-9);
        std::vector<Vector> shorts;
        enumerate_ball(lat, Vector::Zero(lat.ambient_dim()), rho * rho, [&](const IntVector& x, double) {
            int lead = 0;
            while (lead < x.size() && x(lead) == 0) ++lead;
            if (lead == x.size() || x(lead) < 0 || gcd_of(x) != 1) return;
            shorts.push_back(lat.point(x));
        }, 200'000);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < shorts.size(); ++i)
            for (std::size_t j = i + 1; j < shorts.size(); ++j) {
                Matrix pair(lat.ambient_dim(), 2);
                pair << shorts[i], shorts[j];
                const double area = std::sqrt(std::max(0.0, (pair.transpose() * pair).determinant()));
                if (area > 1e-9 * shorts[i].norm() * shorts[j].norm()) best = std::min(best, area);
            }
        out.alpha_l(1) = 1.0 / best;
    }
    out.exact_sup = exact_sup && minima.method == MinimaMethod::exact_enumeration;
    out.alpha = out.alpha_l.maxCoeff();
    return out;
}

std::int64_t count_norm_ball(const Lattice& lat, const NormSpec& norm, double b, std::int64_t cap) {
    require(b > 0.0, "radius must be positive");
    const int n = lat.ambient_dim();
    const double rho = b / norm.lower_constant(n);
    const LllResult red = lll_reduce(lat);
    const Gso g = gram_schmidt(red.reduced.basis());
    double estimate = 1.0;
    for (int j = 0; j < lat.rank(); ++j) estimate *= 2.0 * rho / std::sqrt(g.norms(j)) + 1.0;
    if (estimate > 20.0 * static_cast<double>(cap))
        throw BudgetError("norm-ball count would exceed the enumeration cap", estimate);
    std::int64_t count = 0;
    enumerate_ball(lat, Vector::Zero(n), rho * rho * (1.0 + 1e-10), [&](const IntVector& x, double) {
        if (norm(lat.point(x)) < b) ++count;
    }, 20 * cap);
    if (count > cap) throw BudgetError("norm-ball count exceeded its cap", static_cast<double>(count));
    return count;
}

double unit_ball_volume(int d) {
    return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

EllipsoidCount count_ellipsoid(const Matrix& q, double r, const Vector& a, int threads, std::int64_t cap) {
    const int d = static_cast<int>(q.rows());
    require(d >= 1 && q.cols() == d && a.size() == d, "ellipsoid form and shift dimensions must agree");
    require(r > 0.0, "radius must be positive");
    Eigen::LLT<Matrix> llt(q);
    require(llt.info() == Eigen::Success, "ellipsoid form must be positive definite");
    const Matrix u = llt.matrixU();
    const double det = std::pow(u.diagonal().prod(), 2);

    EllipsoidCount out;
    out.volume = unit_ball_volume(d) * std::pow(r, d) / std::sqrt(det);
    if (out.volume > static_cast<double>(cap)) throw BudgetError("ellipsoid count exceeds the cap", out.volume);

    const double r2 = r * r;
    const double slack = 1e-12 * r2;
    // Q[m - a] = sum_i (u_ii (m_i - a_i) + sum_{j > i} u_ij (m_j - a_j))^2, counted from the last coordinate.
    auto interval = [&](int i, const std::vector<std::int64_t>& m, double used, std::int64_t& lo, std::int64_t& hi) {
        double off = 0.0;
        for (int j = i + 1; j < d; ++j) off += u(i, j) * (static_cast<double>(m[j]) - a(j));
        const double ctr = a(i) - off / u(i, i);
        const double half = std::sqrt(std::max(0.0, r2 - used + slack)) / u(i, i);
        lo = static_cast<std::int64_t>(std::ceil(ctr - half));
        hi = static_cast<std::int64_t>(std::floor(ctr + half));
        return ctr;
    };

    std::vector<std::int64_t> top(d, 0);
    std::int64_t lo = 0, hi = -1;
    interval(d - 1, top, 0.0, lo, hi);
    const std::size_t slabs = hi >= lo ? static_cast<std::size_t>(hi - lo + 1) : 0;
    std::vector<std::int64_t> partial(slabs, 0);

    parallel_for(slabs, threads, [&](std::size_t s) {
        std::vector<std::int64_t> m(d, 0);
        m[d - 1] = lo + static_cast<std::int64_t>(s);
        std::function<std::int64_t(int, double)> rec = [&](int i, double used) -> std::int64_t {
            std::int64_t l = 0, h = -1;
            const double ctr = interval(i, m, used, l, h);
            if (i == 0) return h >= l ? h - l + 1 : 0;
            std::int64_t c = 0;
            for (std::int64_t v = l; v <= h; ++v) {
                m[i] = v;
                const double term = u(i, i) * (static_cast<double>(v) - ctr);
                const double next = used + term * term;
                if (next <= r2 + slack) c += rec(i - 1, next);
            }
            return c;
        };
        const double ctr = a(d - 1);
        const double term = u(d - 1, d - 1) * (static_cast<double>(m[d - 1]) - ctr);
        const double used = term * term;
        if (used > r2 + slack) return;
        partial[s] = d == 1 ? 1 : rec(d - 2, used);
    });
    out.count = std::accumulate(partial.begin(), partial.end(), std::int64_t{0});
    out.relative_error = std::abs(static_cast<double>(out.count) - out.volume) / out.volume;
    return out;
}

std::vector<Vector> halton_points(int d, int n) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    require(d >= 1 && d <= 16, "Halton points are available for 1 <= d <= 16");
    std::vector<Vector> pts;
    for (int i = 0; i < n; ++i) {
        Vector p(d);
        for (int j = 0; j < d; ++j) {
            double f = 1.0, v = 0.0;
            for (int k = i; k > 0; k /= primes[j]) {
                f /= primes[j];
                v += f * (k % primes[j]);
            }
            p(j) = v;
        }
        pts.push_back(p);
    }
    return pts;
}

std::vector<EllipsoidSweepRow> ellipsoid_sweep(const Matrix& q, const std::vector<double>& radii,
                                               const std::vector<Vector>& shifts, int threads) {
    require(!shifts.empty(), "shift set must be nonempty");
    std::vector<EllipsoidSweepRow> rows;
    for (double r : radii) {
        EllipsoidSweepRow row;
        row.r = r;
        for (const auto& a : shifts) {
            const auto c = count_ellipsoid(q, r, a, threads);
            if (c.relative_error > row.sup_relative_error || row.worst_shift.size() == 0) {
                row.sup_relative_error = std::max(row.sup_relative_error, c.relative_error);
                row.worst_shift = a;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

FlowMatrices FlowMatrices::build(int s, double r, double t, double sigma1_sq, const Matrix& v) {
    require(s >= 1, "s must be positive");
    require(r > 0.0, "r must be positive");
    require(sigma1_sq > 0.0, "sigma1^2 must be positive");
    require(v.rows() == s && v.cols() == s, "V must be s x s");
    return {s, r, t, sigma1_sq, v};
}

double FlowMatrices::theta() const { return std::asin(t / std::sqrt(1.0 + t * t)); }

Matrix FlowMatrices::d(double a) const {
    Matrix m = Matrix::Zero(2 * s, 2 * s);
    m.topLeftCorner(s, s) = a * Matrix::Identity(s, s);
    m.bottomRightCorner(s, s) = Matrix::Identity(s, s) / a;
    return m;
}

Matrix FlowMatrices::u_shear(double a) const {
    Matrix m = Matrix::Identity(2 * s, 2 * s);
    m.topRightCorner(s, s) = -a * Matrix::Identity(s, s);
    return m;
}

Matrix FlowMatrices::k(double a) const {
    Matrix m = Matrix::Identity(2 * s, 2 * s);
    m.topRightCorner(s, s) = -a * Matrix::Identity(s, s);
    m.bottomLeftCorner(s, s) = a * Matrix::Identity(s, s);
    return m;
}

Matrix FlowMatrices::perm() const {
    Matrix p = Matrix::Zero(2 * s, 2 * s);
    for (int i = 0; i < s; ++i) {
        p(2 * i, i) = 1.0;
        p(2 * i + 1, s + i) = 1.0;
    }
    return p;
}

Lattice FlowMatrices::base_lattice() const {
    Matrix b = Matrix::Zero(2 * s, 2 * s);
    b.topLeftCorner(s, s) = Matrix::Identity(s, s);
    b.bottomRightCorner(s, s) = v0();
    return Lattice::make(b);
}

Lattice FlowMatrices::lambda_j(int j) const {
    require(j >= 1, "j must be positive");
    return base_lattice().transformed(d(j) * u_shear(1.0 / j));
}

Matrix FlowMatrices::lambda_j_block(int j) const {
    Matrix b = Matrix::Zero(2 * s, 2 * s);
    b.topLeftCorner(s, s) = j * Matrix::Identity(s, s);
    b.topRightCorner(s, s) = -v0();
    b.bottomRightCorner(s, s) = v0() / j;
    return b;
}

Matrix FlowMatrices::dbar(double a) {
    Matrix m(2, 2);
    m << a, 0.0, 0.0, 1.0 / a;
    return m;
}

Matrix FlowMatrices::kbar(double theta) {
    Matrix m(2, 2);
    m << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return m;
}

Matrix FlowMatrices::g(double r, double t) {
    Matrix m(2, 2);
    m << r, -r * t, t / r, 1.0 / r;
    return m;
}

Matrix FlowMatrices::block_diag(const Matrix& block, int n) {
    Matrix m = Matrix::Zero(block.rows() * n, block.cols() * n);
    for (int i = 0; i < n; ++i) m.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
    return m;
}

GmProbe gm_integral_probe(const Matrix& hbar, const Lattice& delta, double beta, int grid, int threads) {
    require(hbar.rows() == 2 && hbar.cols() == 2, "H must be 2 x 2");
    require(std::abs(hbar.determinant() - 1.0) <= 1e-9, "H must lie in SL(2, R)");
    require(delta.ambient_dim() % 2 == 0 && delta.rank() == delta.ambient_dim(), "Delta must be a full-rank lattice in R^{2d}");
    const int d = delta.ambient_dim() / 2;
    require(beta > 0.0 && beta * d > 2.0, "the probe needs beta d > 2");
    require(grid >= 8, "theta grid must have at least 8 points");

    const Matrix htilde = FlowMatrices::block_diag(hbar, d);
    std::vector<double> vals(grid);
    parallel_for(static_cast<std::size_t>(grid), threads, [&](std::size_t k) {
        const double theta = 2.0 * kPi * static_cast<double>(k) / grid;
        const Lattice lat =
            lll_reduce_basis(htilde * FlowMatrices::block_diag(FlowMatrices::kbar(theta), d) * delta.basis()).reduced;
        vals[k] = std::pow(alpha_characteristic(lat).alpha, beta);
    });
    GmProbe out;
    out.grid = grid;
    out.integral = 2.0 * kPi / grid * std::accumulate(vals.begin(), vals.end(), 0.0);
    out.min_integrand = *std::min_element(vals.begin(), vals.end());
    out.alpha_base = alpha_characteristic(delta).alpha;
    out.h_norm = spectral_norm(hbar);
    out.ratio = out.integral / (std::pow(out.alpha_base, beta) * std::pow(out.h_norm, beta * d - 2.0));
    return out;
}

DavenportBracket davenport_bracket(const Lattice& lat, double epsilon, double tail_tol) {
    require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0, 1]");
    require(lat.rank() == lat.ambient_dim(), "Davenport bracket needs a full-rank lattice");
    const int d = lat.rank();
    DavenportBracket out;
    out.epsilon = epsilon;
    out.count_h = count_norm_ball(lat, NormSpec::sup(), 1.0);

    // Disjoint balls of radius M_1 / 2 give #{|v| < rho} <= (2 rho / M_1 + 1)^d.
    const double m1 = successive_minima(lat).values(0);
    auto shell_tail = [&](double radius) {
        double tail = 0.0;
        for (int k = 0;; ++k) {
            const double term = std::pow(2.0 * (radius + k + 1) / m1 + 1.0, d) * std::exp(-epsilon * std::pow(radius + k, 2));
            tail += term;
            if (term < 1e-6 * tail_tol && k > 2) break;
        }
        return tail;
    };
    double radius = 1.0;
    while (shell_tail(radius) > tail_tol) radius *= 1.25;
    out.tail_bound = shell_tail(radius);

    std::vector<double> terms;
    enumerate_ball(lat, Vector::Zero(d), radius * radius, [&](const IntVector&, double n2) {
        terms.push_back(std::exp(-epsilon * n2));
    });
    std::sort(terms.begin(), terms.end());
    out.sum = std::accumulate(terms.begin(), terms.end(), 0.0);
    out.lower_holds = std::exp(-epsilon) * static_cast<double>(out.count_h) <= out.sum + 1e-12;
    out.upper_ratio = (out.sum + out.tail_bound) * std::pow(epsilon, d / 2.0) / static_cast<double>(out.count_h);
    return out;
}

}  // namespace qfclt::lattice
