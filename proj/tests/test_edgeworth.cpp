#include <doctest.h>

#include "qfclt/edgeworth.hpp"

#include <cmath>

using namespace qfclt;
using namespace qfclt::edgeworth;

namespace {

model::SourceDistribution skewed(int d) {
    return model::SourceDistribution::coordinate_product(
        std::vector<model::CoordinateLaw>(d, model::CoordinateLaw{{-1.0, 2.0}, {2.0 / 3.0, 1.0 / 3.0}}));
}

model::SourceDistribution rademacher(int d) {
    return model::SourceDistribution::coordinate_product(
        std::vector<model::CoordinateLaw>(d, model::CoordinateLaw{{-1.0, 1.0}, {0.5, 0.5}}));
}

Vector unit(int d, int i) {
    Vector e = Vector::Zero(d);
    e(i) = 1.0;
    return e;
}

}  // namespace

TEST_CASE("cubic polynomial matches the third derivative formula") {
    RandomStream rng(4);
    // A general discrete law with non-diagonal covariance.
    std::vector<Vector> atoms;
    std::vector<double> probs;
    for (int k = 0; k < 7; ++k) {
        Vector v(3);
        for (int j = 0; j < 3; ++j) v(j) = rng.uniform(-2, 3);
        atoms.push_back(v);
        probs.push_back(1.0 / 7.0);
    }
    auto law = model::SourceDistribution::finite_discrete(atoms, probs);
    auto spec = EdgeworthSpec::build(model::QuadraticForm::identity(3), law, unit(3, 0), 4);
    const Matrix cinv = spec.covariance().inverse();
    const auto flat = law.atoms();
    for (int trial = 0; trial < 100; ++trial) {
        Vector y(3);
        for (int j = 0; j < 3; ++j) y(j) = rng.normal();
        double direct = 0.0;
        for (std::size_t k = 0; k < flat.size(); ++k) {
            const Vector& u = flat.atoms[k];
            const double cy = (cinv * y).dot(u);
            direct += flat.probs[k] * (3.0 * (cinv * u).dot(u) * cy - cy * cy * cy);
        }
        CHECK(std::abs(spec.m3(y) - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("vanishing cases") {
    auto sym = EdgeworthSpec::build(model::QuadraticForm::identity(5), rademacher(5), unit(5, 0), 16);
    CHECK(sym.vanishes());
    for (double v : sym.cubic_coefficients()) CHECK(v == 0.0);
    auto zero_shift = EdgeworthSpec::build(model::QuadraticForm::identity(5), skewed(5), Vector::Zero(5), 16);
    CHECK(zero_shift.shift_is_zero());
    RandomStream rng(1);
    CHECK(edgeworth_measure(5.0, zero_shift, 1000, rng).value == 0.0);
    CHECK(edgeworth_fourier_exact(0.4, zero_shift) == Complex(0.0, 0.0));
    auto skew = EdgeworthSpec::build(model::QuadraticForm::identity(5), skewed(5), unit(5, 0), 4);
    CHECK_FALSE(skew.vanishes());
    CHECK(edgeworth_fourier(0.0, skew, 100, rng).value == Complex(0.0, 0.0));
}

TEST_CASE("Gaussian moment cancellation of m3") {
    auto spec = EdgeworthSpec::build(model::QuadraticForm::identity(5), skewed(5), unit(5, 0), 4);
    MeasureSample sample(spec, 400000, RandomStream(3));
    const auto top = sample.at(1e9);
    CHECK(std::abs(top.value) <= 4.0 * top.std_error);
    CHECK(sample.at(-1e9).value == 0.0);
    // Monotone parts.
    double pos = 0.0, neg = 0.0;
    for (double x = 0.0; x <= 40.0; x += 0.5) {
        auto p = sample.at(x);
        CHECK(p.positive >= pos);
        CHECK(p.negative >= neg);
        pos = p.positive;
        neg = p.negative;
    }
}

TEST_CASE("Fourier form: Monte Carlo vs closed form") {
    auto spec = EdgeworthSpec::build(model::QuadraticForm::identity(5), skewed(5), unit(5, 0), 4);
    RandomStream a(10), b(20);
    for (double t : {0.05, 0.3, 1.0}) {
        const auto exact = edgeworth_fourier_exact(t, spec);
        const auto m1 = edgeworth_fourier(t, spec, 200000, a);
        const auto m2 = edgeworth_fourier(t, spec, 200000, b);
        const double se_re = std::hypot(m1.std_error_re, m2.std_error_re);
        const double se_im = std::hypot(m1.std_error_im, m2.std_error_im);
        CHECK(std::abs(m1.value.real() - m2.value.real()) <= 3.0 * se_re + 1e-15);
        CHECK(std::abs(m1.value.imag() - m2.value.imag()) <= 3.0 * se_im + 1e-15);
        CHECK(std::abs(m1.value.real() - exact.real()) <= 4.0 * m1.std_error_re + 1e-15);
        CHECK(std::abs(m1.value.imag() - exact.imag()) <= 4.0 * m1.std_error_im + 1e-15);
        CHECK(std::abs(exact) <= edgeworth_fourier_envelope(t, spec) * (1 + 1e-12));
    }
    // Symmetric laws give zero in the Monte Carlo route too.
    auto sym = EdgeworthSpec::build(model::QuadraticForm::identity(5), rademacher(5), unit(5, 0), 4);
    for (int k = 0; k < 20; ++k) {
        const auto v = edgeworth_fourier(0.1 * (k + 1), sym, 1000, a);
        CHECK(std::abs(v.value.real()) <= 3.0 * v.std_error_re);
        CHECK(std::abs(v.value.imag()) <= 3.0 * v.std_error_im);
    }
}

TEST_CASE("N enters only through the prefactor") {
    auto s4 = EdgeworthSpec::build(model::QuadraticForm::identity(5), skewed(5), unit(5, 0), 4);
    auto s16 = EdgeworthSpec::build(model::QuadraticForm::identity(5), skewed(5), unit(5, 0), 16);
    MeasureSample a(s4, 50000, RandomStream(8)), b(s16, 50000, RandomStream(8));
    for (double x : {2.0, 5.0, 9.0}) CHECK(std::abs(a.at(x).value / b.at(x).value - 2.0) <= 1e-10);
    CHECK(std::abs(edgeworth_fourier_exact(0.3, s4) / edgeworth_fourier_exact(0.3, s16) - 2.0) <= 1e-10);
}

TEST_CASE("cross validation of the two forms") {
    auto spec = EdgeworthSpec::build(model::QuadraticForm::identity(5), skewed(5), unit(5, 0), 4);
    std::vector<double> xs;
    for (int i = 0; i < 20; ++i) xs.push_back(1.0 + 1.5 * i);
    auto cv = cross_validate_edgeworth(spec, xs, 2'000'000, RandomStream(12));
    CHECK(cv.within_budget);
    CHECK(cv.max_budget <= 2e-3);
    MESSAGE("max discrepancy " << cv.max_discrepancy << " budget " << cv.max_budget);
}
