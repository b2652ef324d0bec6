#include <doctest.h>

#include "qfclt/model.hpp"

#include <cmath>

using namespace qfclt;
using namespace qfclt::model;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(v.size());
    int i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

SourceDistribution rademacher(int d) {
    return SourceDistribution::coordinate_product(std::vector<CoordinateLaw>(d, CoordinateLaw{{-1.0, 1.0}, {0.5, 0.5}}));
}

}  // namespace

TEST_CASE("quadratic form flags") {
    CHECK(QuadraticForm::identity(5).isometric());
    Vector diag = vec({1, 1, 1, -1, -1});
    CHECK(QuadraticForm::build(diag.asDiagonal().toDenseMatrix()).isometric());
    diag(0) = 2;
    CHECK_FALSE(QuadraticForm::build(Matrix(diag.asDiagonal())).isometric());
}

TEST_CASE("quadratic form rejects bad input") {
    Matrix asym = Matrix::Identity(3, 3);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(QuadraticForm::build(asym), ValidationError);
    Matrix singular = Matrix::Identity(3, 3);
    singular(2, 2) = 0.0;
    CHECK_THROWS_AS(QuadraticForm::build(singular), ValidationError);
    CHECK_THROWS_AS(QuadraticForm::build(Matrix(2, 3)), ValidationError);
}

TEST_CASE("quadratic form evaluated two ways") {
    RandomStream rng(11);
    Matrix a(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) a(i, j) = rng.normal();
    auto q = QuadraticForm::build(a + a.transpose());
    for (int k = 0; k < 100; ++k) {
        Vector x(6);
        for (int i = 0; i < 6; ++i) x(i) = rng.normal();
        CHECK(std::abs(q(x) - q.bilinear_sum(x)) <= 1e-12 * std::max(1.0, std::abs(q(x))));
    }
}

TEST_CASE("covariance model invariants") {
    RandomStream rng(3);
    Matrix b(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) b(i, j) = rng.normal();
    auto c = CovarianceModel::build(b * b.transpose() + Matrix::Identity(5, 5));
    for (int j = 1; j < 5; ++j) CHECK(c.eigenvalues()(j - 1) >= c.eigenvalues()(j));
    CHECK(c.eigenvalues()(4) > 0.0);
    CHECK(std::abs(c.trace() - c.eigenvalues().sum()) <= 1e-10 * c.trace());
    CHECK((c.half_power() * c.half_power() - c.entries()).norm() <= 1e-10 * c.entries().norm());
    CHECK((c.inverse() * c.entries() - Matrix::Identity(5, 5)).norm() <= 1e-10);
    CHECK_THROWS_AS(CovarianceModel::build(-Matrix::Identity(2, 2)), ValidationError);
}

TEST_CASE("discrete law validation and centering") {
    CHECK_THROWS_AS(SourceDistribution::finite_discrete({vec({1.0}), vec({2.0})}, {0.5, 0.4}), ValidationError);
    CHECK_THROWS_AS(SourceDistribution::finite_discrete({vec({1.0}), vec({2.0})}, {1.2, -0.2}), ValidationError);
    auto s = SourceDistribution::finite_discrete({vec({1.0, 0.0}), vec({3.0, 2.0})}, {0.5, 0.5});
    CHECK(s.mean().norm() <= 1e-10);
    CHECK(s.centering_offset()(0) == doctest::Approx(2.0));
    CHECK(s.centering_offset()(1) == doctest::Approx(1.0));
    CHECK(std::abs(s.beta(2) - s.covariance().trace()) <= 1e-10);
}

TEST_CASE("symmetrization examples") {
    auto sym = symmetrize(rademacher(1));
    const auto& c = sym.coordinates().at(0);
    REQUIRE(c.values.size() == 3);
    CHECK(c.values[0] == -2.0);
    CHECK(c.values[1] == 0.0);
    CHECK(c.values[2] == 2.0);
    CHECK(c.probs[0] == doctest::Approx(0.25));
    CHECK(c.probs[1] == doctest::Approx(0.5));

    // Atoms {-1, 2} with probabilities {2/3, 1/3} are already centered.
    auto skew = SourceDistribution::coordinate_product({CoordinateLaw{{-1.0, 2.0}, {2.0 / 3.0, 1.0 / 3.0}}});
    auto ssym = symmetrize(skew).coordinates().at(0);
    REQUIRE(ssym.values.size() == 3);
    CHECK(ssym.values[0] == doctest::Approx(-3.0));
    CHECK(ssym.values[2] == doctest::Approx(3.0));
    CHECK(std::abs(ssym.probs[0] - 2.0 / 9.0) <= 1e-15);
    CHECK(std::abs(ssym.probs[1] - 5.0 / 9.0) <= 1e-15);
    CHECK(std::abs(ssym.probs[2] - 2.0 / 9.0) <= 1e-15);

    auto point = SourceDistribution::finite_discrete({vec({0.0, 0.0})}, {1.0});
    auto psym = symmetrize(point).atoms();
    CHECK(psym.size() == 1);
    CHECK(psym.atoms[0].norm() == 0.0);
}

TEST_CASE("symmetrization properties on random discrete laws") {
    RandomStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + static_cast<int>(rng.integer(0, 2));
        const int n = 2 + static_cast<int>(rng.integer(0, 3));
        std::vector<Vector> atoms;
        std::vector<double> probs;
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            Vector a(d);
            for (int j = 0; j < d; ++j) a(j) = static_cast<double>(rng.integer(-3, 3));
            atoms.push_back(a);
            probs.push_back(1.0 + rng.uniform());
            total += probs.back();
        }
        for (auto& p : probs) p /= total;
        auto x = SourceDistribution::finite_discrete(atoms, probs);
        auto sx = symmetrize(x);
        CHECK((sx.covariance() - 2.0 * x.covariance()).cwiseAbs().maxCoeff() <= 1e-10);
        auto twice = symmetrize(sx).atoms();
        // Atoms come in +- pairs with equal mass.
        for (std::size_t i = 0; i < twice.size(); ++i) {
            bool found = false;
            for (std::size_t j = 0; j < twice.size(); ++j)
                if ((twice.atoms[i] + twice.atoms[j]).norm() == 0.0) {
                    found = true;
                    CHECK(std::abs(twice.probs[i] - twice.probs[j]) <= 1e-15);
                }
            CHECK(found);
        }
    }
}

TEST_CASE("moments of coordinate products agree with expansion") {
    auto law = SourceDistribution::coordinate_product(
        {CoordinateLaw{{-1.0, 2.0}, {2.0 / 3.0, 1.0 / 3.0}}, CoordinateLaw{{-1.0, 1.0}, {0.5, 0.5}},
         CoordinateLaw{{0.0, 1.0, 5.0}, {0.2, 0.5, 0.3}}});
    auto flat = SourceDistribution::finite_discrete(law.atoms().atoms, law.atoms().probs);
    for (int q = 2; q <= 4; ++q) CHECK(law.beta(q) == doctest::Approx(flat.beta(q)).epsilon(1e-12));
    CHECK((law.covariance() - flat.covariance()).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) CHECK(std::abs(law.third_moment(i, j, k) - flat.third_moment(i, j, k)) <= 1e-12);
    CHECK_FALSE(law.third_moments_vanish());
    CHECK(rademacher(4).third_moments_vanish());
}

TEST_CASE("gaussian moments") {
    Matrix c = Vector::LinSpaced(3, 1.0, 2.0).asDiagonal();
    auto g = SourceDistribution::gaussian(c);
    CHECK(g.beta(2) == doctest::Approx(4.5));
    CHECK(g.beta(4) == doctest::Approx(4.5 * 4.5 + 2.0 * (1.0 + 2.25 + 4.0)));
    // E ||G||^3 for C = I_3 equals 2^{3/2} Gamma(3) / Gamma(3/2).
    auto iso = SourceDistribution::gaussian(Matrix::Identity(3, 3));
    CHECK(iso.beta(3) == doctest::Approx(std::pow(2.0, 1.5) * 2.0 / std::tgamma(1.5)).epsilon(1e-9));
    CHECK(g.third_moments_vanish());
}

TEST_CASE("condition N examples") {
    auto point = SourceDistribution::finite_discrete({vec({0.0, 0.0})}, {1.0});
    auto r = check_condition_N(point, 1.0, 0.0, {vec({0.0, 0.0})});
    CHECK(r.holds);
    CHECK(r.probabilities[0] == 1.0);

    auto two = SourceDistribution::finite_discrete({vec({1.0, 0.0}), vec({-1.0, 0.0})}, {0.5, 0.5});
    CHECK(check_condition_N(two, 0.5, 0.0, {vec({1.0, 0.0})}).holds);
    CHECK_FALSE(check_condition_N(two, 0.5, 0.0, {vec({2.0, 0.0})}).holds);

    auto gauss = SourceDistribution::gaussian(Matrix::Identity(5, 5));
    Vector e = Vector::Zero(5);
    e(0) = 1.0;
    auto g = check_condition_N(gauss, 0.5, 0.01, {e}, 7, 1'000'000);
    CHECK_FALSE(g.holds);
    CHECK(g.probabilities[0] + 3.0 * g.std_errors[0] < 0.5);

    auto nq = check_condition_NQ(two, QuadraticForm::build(Matrix(vec({2.0, 1.0}).asDiagonal())), 0.5, 0.0,
                                 {vec({1.0, 0.0})});
    CHECK_FALSE(nq.holds);
    CHECK(nq.probabilities.size() == 2);
}

TEST_CASE("shifted instance") {
    auto s = ShiftedInstance::make(vec({1.0, 0.5}), 16);
    CHECK(s.shift_b(0) == 4.0);
    CHECK(s.shift_b(1) == 2.0);
    CHECK_THROWS_AS(ShiftedInstance::make(vec({1.0}), 0), ValidationError);
}
