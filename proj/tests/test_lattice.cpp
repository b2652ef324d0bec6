#include <doctest.h>

#include "qfclt/empirics.hpp"
#include "qfclt/lattice.hpp"
#include "qfclt/random.hpp"

#include <cmath>
#include <functional>

using namespace qfclt;
using namespace qfclt::lattice;

namespace {

// All coefficient vectors in [-k, k]^m.
void for_box(int m, int k, const std::function<void(const IntVector&)>& f) {
    IntVector x = IntVector::Constant(m, -k);
    while (true) {
        f(x);
        int i = 0;
        while (i < m && x(i) == k) x(i++) = -k;
        if (i == m) return;
        ++x(i);
    }
}

double brute_shortest(const Lattice& lat, int k) {
    double best = 1e300;
    for_box(lat.rank(), k, [&](const IntVector& x) {
        if (x.cwiseAbs().maxCoeff() > 0) best = std::min(best, lat.point(x).norm());
    });
    return best;
}

// Successive minima by brute force over a coefficient box, greedy on sorted norms.
Vector brute_minima(const Lattice& lat, const NormSpec& norm, int k) {
    std::vector<std::pair<double, Vector>> all;
    for_box(lat.rank(), k, [&](const IntVector& x) {
        if (x.cwiseAbs().maxCoeff() > 0) all.emplace_back(norm(lat.point(x)), lat.point(x));
    });
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Vector out(lat.rank());
    Matrix span(lat.ambient_dim(), 0);
    int found = 0;
    for (const auto& [f, v] : all) {
        Matrix trial(lat.ambient_dim(), found + 1);
        trial << span, v;
        Eigen::FullPivLU<Matrix> lu(trial);
        lu.setThreshold(1e-9);
        if (lu.rank() == found + 1) {
            span = trial;
            out(found++) = f;
            if (found == lat.rank()) break;
        }
    }
    return out;
}

Matrix random_unimodular(RandomStream& rng, int m, int steps) {
    Matrix u = Matrix::Identity(m, m);
    for (int s = 0; s < steps; ++s) {
        const int i = static_cast<int>(rng.integer(0, m - 1));
        int j = static_cast<int>(rng.integer(0, m - 1));
        if (i == j) j = (j + 1) % m;
        const double c = static_cast<double>(rng.integer(-2, 2));
        u.col(i) += c * u.col(j);
    }
    return u;
}

Matrix random_basis(RandomStream& rng, int m) {
    Matrix b(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) b(i, j) = rng.normal();
    return b;
}

}  // namespace

TEST_CASE("lattice construction and determinant") {
    CHECK(Lattice::integer(3).det() == doctest::Approx(1.0));
    Matrix b(3, 2);
    b << 1, 0, 0, 2, 0, 0;
    CHECK(Lattice::make(b).det() == doctest::Approx(2.0));
    Matrix dep(2, 2);
    dep << 1, 2, 2, 4;
    CHECK_THROWS_AS(Lattice::make(dep), ValidationError);

    RandomStream rng(4);
    const Lattice lat = Lattice::make(random_basis(rng, 4));
    for (int k = 0; k < 10; ++k) {
        const Lattice other = lat.transformed(Matrix::Identity(4, 4));
        const Lattice moved = Lattice::make(other.basis() * random_unimodular(rng, 4, 12));
        CHECK(std::abs(moved.det() - lat.det()) <= 1e-9 * lat.det());
    }
}

TEST_CASE("norm specs") {
    RandomStream rng(5);
    Matrix a = random_basis(rng, 4);
    a = a * a.transpose() + Matrix::Identity(4, 4);
    Matrix v = random_basis(rng, 2) + 3.0 * Matrix::Identity(2, 2);
    const std::vector<NormSpec> norms = {NormSpec::euclidean(), NormSpec::sup(), NormSpec::quadratic(a),
                                         NormSpec::weighted_sup(0.7, v)};
    for (const auto& f : norms) {
        for (int k = 0; k < 100; ++k) {
            Vector x(4), y(4);
            for (int j = 0; j < 4; ++j) {
                x(j) = rng.normal();
                y(j) = rng.normal();
            }
            const double c = rng.uniform(-3, 3);
            CHECK(std::abs(f(c * x) - std::abs(c) * f(x)) <= 1e-10 * (1 + f(x)));
            CHECK(f(x + y) <= f(x) + f(y) + 1e-10);
            CHECK(f(x) >= f.lower_constant(4) * x.norm() - 1e-10);
            CHECK(f(x) <= f.upper_constant(4) * x.norm() + 1e-10);
        }
    }
}

TEST_CASE("LLL reduction") {
    const auto id = lll_reduce(Lattice::integer(3));
    CHECK((id.reduced.basis() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

    for (int k : {1, 5, 17, -40, 1000}) {
        Matrix b(2, 2);
        b << 1, k, 0, 1;
        const auto red = lll_reduce(Lattice::make(b));
        CHECK(red.reduced.basis().col(0).norm() == doctest::Approx(1.0));
        CHECK(std::abs(red.reduced.det() - 1.0) <= 1e-10);
        CHECK(brute_shortest(red.reduced, 3) == doctest::Approx(1.0));
        CHECK(std::abs(static_cast<double>(red.transform.cast<double>().determinant())) == doctest::Approx(1.0));
    }

    RandomStream rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix u = random_unimodular(rng, 5, 12);
        const auto red = lll_reduce(Lattice::make(u));
        CHECK(is_lll_reduced(red.reduced));
        for (int j = 0; j < 5; ++j) CHECK(red.reduced.basis().col(j).norm() == doctest::Approx(1.0));
        CHECK((u * red.transform.cast<double>() - red.reduced.basis()).cwiseAbs().maxCoeff() <= 1e-9);
    }
    for (int trial = 0; trial < 20; ++trial) {
        const Lattice lat = Lattice::make(random_basis(rng, 4) * random_unimodular(rng, 4, 6));
        const auto red = lll_reduce(lat);
        CHECK(is_lll_reduced(red.reduced));
        CHECK(std::abs(red.reduced.det() - lat.det()) <= 1e-10 * lat.det());
    }
}

TEST_CASE("ball enumeration matches a box scan") {
    RandomStream rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Lattice lat = Lattice::make(random_basis(rng, 3) + 2.0 * Matrix::Identity(3, 3));
        Vector c(3);
        for (int j = 0; j < 3; ++j) c(j) = rng.normal();
        const double rad2 = 9.0;
        std::int64_t brute = 0;
        for_box(3, 12, [&](const IntVector& x) {
            if ((lat.point(x) - c).squaredNorm() <= rad2) ++brute;
        });
        std::int64_t count = 0;
        enumerate_ball(lat, c, rad2, [&](const IntVector& x, double d2) {
            CHECK(std::abs((lat.point(x) - c).squaredNorm() - d2) <= 1e-9);
            ++count;
        });
        CHECK(count == brute);
    }
}

TEST_CASE("successive minima") {
    const auto z2 = successive_minima(Lattice::integer(2));
    CHECK(z2.values(0) == doctest::Approx(1.0));
    CHECK(z2.values(1) == doctest::Approx(1.0));
    Matrix d(2, 2);
    d << 2, 0, 0, 0.5;
    const auto dm = successive_minima(Lattice::make(d));
    CHECK(dm.values(0) == doctest::Approx(0.5));
    CHECK(dm.values(1) == doctest::Approx(2.0));

    RandomStream rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const Lattice lat = Lattice::make(random_basis(rng, 4));
        const auto ex = successive_minima(lat);
        const auto ap = successive_minima(lat, NormSpec::euclidean(), MinimaMethod::lll_approx);
        REQUIRE(ex.method == MinimaMethod::exact_enumeration);
        const Vector brute = brute_minima(lll_reduce(lat).reduced, NormSpec::euclidean(), 3);
        for (int j = 0; j < 4; ++j) {
            CHECK(ex.values(j) == doctest::Approx(brute(j)).epsilon(1e-9));
            CHECK(ex.values(j) <= ap.values(j) * (1 + 1e-12));
            CHECK(ap.values(j) <= std::pow(2.0, 1.5) * ex.values(j));
            CHECK(NormSpec::euclidean()(ex.witnesses[j]) == doctest::Approx(ex.values(j)));
            if (j > 0) CHECK(ex.values(j - 1) <= ex.values(j));
        }
        const double ratio = ex.values.prod() / lat.det();
        CHECK(ratio >= std::pow(2.0, -16.0));
        CHECK(ratio <= std::pow(2.0, 16.0));
        // Sup norm against the same brute force.
        const auto sup = successive_minima(lat, NormSpec::sup());
        const Vector bsup = brute_minima(lll_reduce(lat).reduced, NormSpec::sup(), 4);
        for (int j = 0; j < 4; ++j) CHECK(sup.values(j) == doctest::Approx(bsup(j)).epsilon(1e-9));
    }
}

TEST_CASE("alpha characteristics") {
    const auto z = alpha_characteristic(Lattice::integer(4));
    for (int l = 0; l < 4; ++l) CHECK(z.alpha_l(l) == doctest::Approx(1.0));
    CHECK(z.alpha == doctest::Approx(1.0));
    Matrix d(2, 2);
    d << 2, 0, 0, 0.5;
    const auto a = alpha_characteristic(Lattice::make(d), MinimaMethod::exact_enumeration);
    CHECK(a.alpha_l(0) == doctest::Approx(2.0));
    CHECK(a.alpha_l(1) == doctest::Approx(1.0));
    CHECK(a.alpha == doctest::Approx(2.0));

    RandomStream rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const Lattice lat = Lattice::make(random_basis(rng, 3));
        const auto sur = alpha_characteristic(lat, MinimaMethod::exact_enumeration);
        const auto ex = alpha_characteristic(lat, MinimaMethod::exact_enumeration, true);
        CHECK(ex.exact_sup);
        for (int l = 0; l < 3; ++l) {
            CHECK(ex.alpha_l(l) >= sur.alpha_l(l) * (1 - 1e-9));
            CHECK(ex.alpha_l(l) <= 8.0 * sur.alpha_l(l));
        }
        CHECK(sur.alpha >= 1.0 / lat.det() * (1 - 1e-12));
        // Brute-force planes from a coefficient box.
        double best = 1e300;
        std::vector<Vector> pts;
        for_box(3, 3, [&](const IntVector& x) {
            if (x.cwiseAbs().maxCoeff() > 0) pts.push_back(lll_reduce(lat).reduced.point(x));
        });
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double area = Eigen::Vector3d(pts[i]).cross(Eigen::Vector3d(pts[j])).norm();
                if (area > 1e-9) best = std::min(best, area);
            }
        CHECK(ex.alpha_l(1) == doctest::Approx(1.0 / best).epsilon(1e-9));

        // Orthogonal invariance.
        const Matrix q = Eigen::HouseholderQR<Matrix>(random_basis(rng, 3)).householderQ();
        const auto rot = alpha_characteristic(lat.transformed(q));
        const auto base = alpha_characteristic(lat);
        for (int l = 0; l < 3; ++l) CHECK(std::abs(rot.alpha_l(l) - base.alpha_l(l)) <= 1e-9 * base.alpha_l(l));
    }
}

TEST_CASE("norm-ball counts") {
    CHECK(count_norm_ball(Lattice::integer(5), NormSpec::sup(), 2.5) == 3125);
    CHECK(count_norm_ball(Lattice::integer(2), NormSpec::euclidean(), 1.5) == 9);
    CHECK(count_norm_ball(Lattice::integer(2), NormSpec::euclidean(), 1.0) == 1);
    CHECK_THROWS_AS(count_norm_ball(Lattice::integer(5), NormSpec::euclidean(), 200.0, 1000), BudgetError);
}

TEST_CASE("ellipsoid counts") {
    const auto c1 = count_ellipsoid(Matrix::Identity(5, 5), 1.0, Vector::Zero(5));
    CHECK(c1.count == 11);
    CHECK(c1.volume == doctest::Approx(8.0 * kPi * kPi / 15.0));
    CHECK(unit_ball_volume(2) == doctest::Approx(kPi));

    std::int64_t brute = 0;
    for_box(5, 2, [&](const IntVector& x) {
        if (x.squaredNorm() <= 4) ++brute;
    });
    CHECK(count_ellipsoid(Matrix::Identity(5, 5), 2.0, Vector::Zero(5)).count == brute);

    RandomStream rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix q = random_basis(rng, 3);
        q = q * q.transpose() + 0.5 * Matrix::Identity(3, 3);
        Vector a(3);
        for (int j = 0; j < 3; ++j) a(j) = rng.uniform();
        std::int64_t b = 0;
        for_box(3, 12, [&](const IntVector& x) {
            const Vector y = x.cast<double>() - a;
            if (y.dot(q * y) <= 9.0) ++b;
        });
        const auto c = count_ellipsoid(q, 3.0, a);
        CHECK(c.count == b);
        Vector z(3);
        z << 2, -1, 3;
        CHECK(count_ellipsoid(q, 3.0, a + z).count == c.count);
        CHECK(count_ellipsoid(q, 3.0, a, 3).count == c.count);
    }
    const auto h = halton_points(5, 64);
    CHECK(h.size() == 64);
    CHECK(h[0].norm() == 0.0);
    CHECK(h[1](0) == 0.5);
    CHECK(h[1](1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ellipsoid relative error decays at d = 5") {
    const auto shifts = halton_points(5, 8);
    const auto rows = ellipsoid_sweep(Matrix::Identity(5, 5), {4.0, 6.0, 9.0, 12.0}, shifts);
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) pts.emplace_back(r.r, r.sup_relative_error);
    const double slope = empirics::rate_fit(pts).slope;
    MESSAGE("slope " << slope);
    CHECK(slope <= -1.5);
}

TEST_CASE("flow matrices") {
    RandomStream rng(11);
    Matrix v = random_basis(rng, 3) + 3.0 * Matrix::Identity(3, 3);
    const auto f = FlowMatrices::build(3, 2.5, 0.4, 0.8, v);
    CHECK(std::abs(f.d(2.5).determinant() - 1.0) <= 1e-12);
    CHECK(std::abs(f.u_shear(0.4).determinant() - 1.0) <= 1e-12);
    CHECK((f.d(2) * f.d(3) - f.d(6)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((f.u_shear(0.3) * f.u_shear(0.7) - f.u_shear(1.0)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((f.d(1.7) * f.u_shear(0.6) - f.u_shear(1.7 * 1.7 * 0.6) * f.d(1.7)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((f.perm() * f.perm().transpose() - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 1; j <= 4; ++j) {
        CHECK((f.lambda_j(j).basis() - f.lambda_j_block(j)).cwiseAbs().maxCoeff() <= 1e-12);
        const Matrix lhs = f.perm() * f.d(f.r) * f.k(f.t) * f.lambda_j_block(j);
        const double th = f.theta();
        const Matrix rhs = std::sqrt(1 + f.t * f.t) * FlowMatrices::block_diag(FlowMatrices::dbar(f.r), 3) *
                           FlowMatrices::block_diag(FlowMatrices::kbar(th), 3) * f.perm() * f.lambda_j_block(j);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, lhs.cwiseAbs().maxCoeff()));
    }
    const Matrix w = f.perm() * f.d(f.r) * f.k(f.t) * f.perm().transpose();
    CHECK((w - FlowMatrices::block_diag(FlowMatrices::g(f.r, f.t), 3)).cwiseAbs().maxCoeff() <= 1e-12);
    const auto f2 = FlowMatrices::build(1, 1.0, 2.0, 1.0, Matrix::Identity(1, 1));
    CHECK(f2.theta() == doctest::Approx(std::asin(2.0 / std::sqrt(5.0))));
    CHECK(std::cos(f2.theta()) == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(f.u() == doctest::Approx(0.32));
}

TEST_CASE("GM probe") {
    const auto id = gm_integral_probe(Matrix::Identity(2, 2), Lattice::integer(10), 0.5, 64);
    CHECK(id.min_integrand >= 1.0 - 1e-12);
    CHECK(id.integral >= 2.0 * kPi - 1e-9);
    CHECK_THROWS_AS(gm_integral_probe(Matrix::Identity(2, 2), Lattice::integer(4), 0.5, 64), ValidationError);
    CHECK_THROWS_AS(gm_integral_probe(2.0 * Matrix::Identity(2, 2), Lattice::integer(10), 0.5, 64), ValidationError);
}

TEST_CASE("Davenport bracket") {
    RandomStream rng(12);
    for (int d : {2, 3}) {
        std::vector<double> ratios;
        for (int trial = 0; trial < 20; ++trial) {
            const Lattice lat = Lattice::make(0.2 * (Matrix::Identity(d, d) + 0.3 * random_basis(rng, d)));
            const auto b = davenport_bracket(lat, 1.0);
            CHECK(b.lower_holds);
            CHECK(b.tail_bound <= 1e-12);
            ratios.push_back(b.upper_ratio);
        }
        std::sort(ratios.begin(), ratios.end());
        const double median = ratios[ratios.size() / 2];
        MESSAGE("d " << d << " c(d) ~ " << median);
        for (double r : ratios) {
            CHECK(r >= 0.8 * median);
            CHECK(r <= 1.2 * median);
        }
    }
    const auto z = davenport_bracket(Lattice::integer(2), 1.0);
    CHECK(z.count_h == 1);
    CHECK(z.sum == doctest::Approx(std::pow(std::exp(-1.0) * 2 + 1 + 2 * std::exp(-4.0) + 2 * std::exp(-9.0), 2)).epsilon(1e-6));
}
