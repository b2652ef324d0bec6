#include <doctest.h>

#include "oracles.hpp"
#include "qfclt/edgeworth.hpp"
#include "qfclt/empirics.hpp"

#include <cmath>
#include <map>
#include <numeric>

using namespace qfclt;
using namespace qfclt::empirics;
using model::CoordinateLaw;
using model::SourceDistribution;

namespace {

SourceDistribution rademacher(int d) {
    return SourceDistribution::coordinate_product(std::vector<CoordinateLaw>(d, CoordinateLaw{{-1.0, 1.0}, {0.5, 0.5}}));
}

SourceDistribution skewed(int d) {
    return SourceDistribution::coordinate_product(
        std::vector<CoordinateLaw>(d, CoordinateLaw{{-1.0, 2.0}, {2.0 / 3.0, 1.0 / 3.0}}));
}

// Small atoms {+-s}^5 with total mass 1 - p and large atoms +-3 sqrt(5) e_j with
// mass p / 10 each, so that C = I.
SourceDistribution heavy_law(double p) {
    const double s = std::sqrt((1.0 - 9.0 * p) / (1.0 - p));
    std::vector<Vector> atoms;
    std::vector<double> probs;
    for (int mask = 0; mask < 32; ++mask) {
        Vector v(5);
        for (int j = 0; j < 5; ++j) v(j) = (mask >> j & 1) ? s : -s;
        atoms.push_back(v);
        probs.push_back((1.0 - p) / 32.0);
    }
    for (int j = 0; j < 5; ++j)
        for (double sign : {1.0, -1.0}) {
            atoms.push_back(sign * 3.0 * std::sqrt(5.0) * Vector::Unit(5, j));
            probs.push_back(p / 10.0);
        }
    return SourceDistribution::finite_discrete(atoms, probs);
}

SourceDistribution random_law(RandomStream& rng, int d) {
    std::vector<Vector> atoms;
    std::vector<double> probs;
    const int n = d + 2 + static_cast<int>(rng.integer(0, 6));
    for (int k = 0; k < n; ++k) {
        Vector v(d);
        const double scale = rng.uniform() < 0.3 ? 6.0 : 1.0;
        for (int j = 0; j < d; ++j) v(j) = scale * rng.normal();
        atoms.push_back(v);
        probs.push_back(rng.uniform(0.2, 1.0));
    }
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (auto& p : probs) p /= total;
    return SourceDistribution::finite_discrete(atoms, probs);
}

}  // namespace

TEST_CASE("truncation of a bounded law removes nothing") {
    auto t = truncate(rademacher(3), 4);
    CHECK(t.box_lower.size() == 1);
    CHECK(t.box_lower.atoms[0].norm() == 0.0);
    for (int q = 2; q <= 4; ++q) CHECK(t.pi_box_at(q) == 0.0);
    CHECK(t.cov_w.cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("truncation of a heavy atom at N = 1") {
    const double p = 0.01;
    auto law = heavy_law(p);
    CHECK((law.covariance() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-12);
    auto t = truncate(law, 1);
    CHECK(std::abs(t.pi_box_at(2) - 9.0 * p) <= 1e-12);
    CHECK(t.box_lower.size() == 11);
    // Disjoint supports: each original atom lands in exactly one part.
    for (const auto& x : law.atoms().atoms) {
        const bool big = x.norm() > std::sqrt(5.0);
        bool in_lower = false;
        for (const auto& y : t.box_lower.atoms) in_lower = in_lower || (y - x).norm() == 0.0;
        CHECK(in_lower == big);
    }
}

TEST_CASE("covariance decomposition and moment chains") {
    RandomStream rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int d = 2 + static_cast<int>(rng.integer(0, 3));
        auto law = random_law(rng, d);
        for (long n : {4L, 16L}) {
            auto t = truncate(law, n);
            const auto atoms = law.atoms();
            for (int k = 0; k < 20; ++k) {
                Vector x(d);
                for (int j = 0; j < d; ++j) x(j) = rng.normal();
                double lower = 0.0;
                for (std::size_t i = 0; i < t.box_lower.size(); ++i)
                    lower += t.box_lower.probs[i] * std::pow(t.box_lower.atoms[i].dot(x), 2);
                const double lhs = x.dot(law.covariance() * x);
                const double rhs = x.dot(t.box_cov * x) + lower + std::pow(t.box_mean.dot(x), 2);
                CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, lhs));
                CHECK(x.dot(t.cov_w * x) >= -1e-10 * x.squaredNorm());
            }
            const auto c = model::CovarianceModel::build(law.covariance());
            const double trace_w = (c.inv_half_power() * t.cov_w * c.inv_half_power()).trace();
            CHECK(trace_w <= 2.0 * d * t.pi_box_at(2) + 1e-10);
            CHECK(t.pi_diamond_at(2) + t.lambda4_diamond <= t.pi_diamond_at(3) + t.lambda4_diamond + 1e-15);
            CHECK(t.pi_diamond_at(3) + t.lambda4_diamond <= law.beta(4) / (std::pow(law.beta(2), 2) * n) * (1 + 1e-10));
            double e4 = 0.0;
            for (std::size_t i = 0; i < atoms.size(); ++i)
                e4 += atoms.probs[i] * std::pow((c.inv_half_power() * atoms.atoms[i]).squaredNorm(), 2);
            CHECK(t.pi_box_at(3) + t.lambda4_box <= e4 / (double(d) * d * n) + 1e-10);
            // (C^{-1/2} X)^<> equals C^{-1/2} X^[] atom by atom.
            std::vector<Vector> transformed;
            for (const auto& a : atoms.atoms) transformed.push_back(c.inv_half_power() * a);
            auto tl = SourceDistribution::finite_discrete(transformed, atoms.probs);
            auto tt = truncate(tl, n);
            CHECK(tt.diamond_lower.size() == t.box_lower.size());
        }
    }
}

TEST_CASE("sampling basics") {
    auto g = SourceDistribution::gaussian(Matrix::Identity(3, 3) * 2.0);
    auto q = model::QuadraticForm::identity(3);
    auto vals = sample_sn(g, q, Vector::Zero(3), 10, 20000, RandomStream(3));
    double mean = 0.0, sq = 0.0;
    for (double v : vals) {
        mean += v;
        sq += v * v;
    }
    mean /= vals.size();
    const double se = std::sqrt((sq / vals.size() - mean * mean) / vals.size());
    CHECK(std::abs(mean - 6.0) <= 4.0 * se);

    auto a = sample_sn(rademacher(5), model::QuadraticForm::identity(5), Vector::Zero(5), 1, 1000, RandomStream(4));
    for (double v : a) CHECK(v == 5.0);
    auto two = SourceDistribution::finite_discrete({Vector::Constant(1, 1.0), Vector::Constant(1, -2.0)}, {2.0 / 3.0, 1.0 / 3.0});
    auto s = sample_sn(two, model::QuadraticForm::identity(1), Vector::Zero(1), 1, 30000, RandomStream(5));
    const double freq = std::count(s.begin(), s.end(), 1.0) / 30000.0;
    CHECK(std::abs(freq - 2.0 / 3.0) <= 4.0 * std::sqrt(2.0 / 9.0 / 30000.0));

    auto r1 = sample_sn(rademacher(5), model::QuadraticForm::identity(5), Vector::Zero(5), 7, 5000, RandomStream(9), 1);
    auto r2 = sample_sn(rademacher(5), model::QuadraticForm::identity(5), Vector::Zero(5), 7, 5000, RandomStream(9), 3);
    CHECK(r1 == r2);
}

TEST_CASE("exact convolution examples") {
    auto q = model::QuadraticForm::identity(5);
    auto t1 = exact_cdf_product(rademacher(5), q, 1);
    REQUIRE(t1.size() == 1);
    CHECK(t1.normalized_value(0) == 5.0);
    CHECK(t1.probs[0] == 1.0);

    auto t2 = exact_cdf_product(rademacher(5), q, 2);
    REQUIRE(t2.size() == 6);
    for (int k = 0; k <= 5; ++k) {
        CHECK(t2.normalized_value(k) == 2.0 * k);
        CHECK(std::abs(t2.probs[k] - oracle::binomial(5, k) / 32.0) <= 1e-15);
    }

    auto t8 = exact_cdf_product(rademacher(5), q, 8);
    CHECK(std::abs(t8.total_mass() - 1.0) <= 1e-12);
    auto mc = sample_sn(rademacher(5), q, Vector::Zero(5), 8, 40000, RandomStream(21));
    std::map<double, int> hist;
    for (double v : mc) hist[v]++;
    for (std::size_t i = 0; i < t8.size(); ++i) {
        const double p = t8.probs[i];
        const double f = hist[t8.normalized_value(i)] / 40000.0;
        if (p >= 1e-3) CHECK(std::abs(f - p) <= 4.0 * std::sqrt(p * (1 - p) / 40000.0));
    }
}

TEST_CASE("exact convolution of a skewed law with a compatible shift") {
    // Coordinates {-1, 2}: step 3, N = 4 gives sums in {-4, -1, 2, 5, 8}.
    auto law = skewed(2);
    Vector b(2);
    b << -1.0, 0.5;
    CHECK(lattice_compatible(law, 4, b));
    CHECK_FALSE(lattice_compatible(law, 4, Vector::Zero(2)));
    auto t = exact_cdf_product(law, model::QuadraticForm::identity(2), 4, b);
    // Brute force over 2^8 patterns.
    std::map<double, double> brute;
    for (int mask = 0; mask < 256; ++mask) {
        double z0 = 0, z1 = 0, p = 1;
        for (int i = 0; i < 4; ++i) {
            const bool hi0 = mask >> i & 1, hi1 = mask >> (i + 4) & 1;
            z0 += hi0 ? 2 : -1;
            z1 += hi1 ? 2 : -1;
            p *= (hi0 ? 1.0 / 3 : 2.0 / 3) * (hi1 ? 1.0 / 3 : 2.0 / 3);
        }
        brute[(z0 - b(0)) * (z0 - b(0)) + (z1 - b(1)) * (z1 - b(1))] += p;
    }
    REQUIRE(t.size() == brute.size());
    std::size_t i = 0;
    for (auto [v, p] : brute) {
        CHECK(t.sum_value(i) == doctest::Approx(v));
        CHECK(std::abs(t.probs[i] - p) <= 1e-14);
        ++i;
    }
    CHECK_THROWS_AS(exact_cdf_product(law, model::QuadraticForm::identity(2), 4, Vector::Zero(2)), ValidationError);
}

TEST_CASE("Delta for Gaussian sources vanishes") {
    auto g = SourceDistribution::gaussian(Matrix::Identity(3, 3));
    DeltaOptions opts;
    opts.mode = DeltaMode::monte_carlo;
    opts.reps = 20000;
    opts.tol = 1e-6;
    auto e = estimate_delta(g, model::QuadraticForm::identity(3), Vector::Zero(3), 7, opts);
    CHECK(e.estimate <= 3.0 * (e.std_error + 1e-6) + 3.0 * 0.5 / std::sqrt(20000.0));
}

TEST_CASE("Monte Carlo Delta against the exact table") {
    auto q = model::QuadraticForm::identity(5);
    auto table = exact_cdf_product(rademacher(5), q, 6);
    auto ref = ReferenceCdf::from_table(table);
    auto e = estimate_delta_mc(rademacher(5), q, Vector::Zero(5), 6, ref, 40000, RandomStream(17));
    CHECK(e.estimate <= 3.0 * e.std_error);
}

TEST_CASE("exact Delta decays like 1/N") {
    auto law = rademacher(5);
    auto q = model::QuadraticForm::identity(5);
    DeltaOptions opts;
    std::vector<std::pair<double, double>> pts;
    for (long n : {16L, 32L, 64L, 128L}) {
        auto e = estimate_delta(law, q, Vector::Zero(5), n, opts);
        pts.emplace_back(double(n), e.estimate);
        CHECK(e.max_jump * n >= 0.1);
        CHECK(e.max_jump * n <= 10.0);
    }
    auto fit = rate_fit(pts);
    MESSAGE("slope " << fit.slope);
    CHECK(fit.slope <= -0.85);
    CHECK(fit.slope >= -1.15);
}

TEST_CASE("Edgeworth correction improves the lattice approximation") {
    // Exact law of the skewed product at a lattice-compatible shift; the
    // correction with the chosen sign must beat both no correction and the
    // opposite sign.
    auto law = skewed(5);
    auto q = model::QuadraticForm::identity(5);
    const long n = 64;
    Vector b = Vector::Constant(5, 0.5);
    b(0) = 2.0;
    REQUIRE(lattice_compatible(law, n, b));
    const Vector a = b / std::sqrt(double(n));
    auto table = exact_cdf_product(law, q, n, b);
    auto fref = ReferenceCdf::from_table(table);
    const auto cov = model::CovarianceModel::build(law.covariance());
    gaussianqf::GaussianQfCdf h(gaussianqf::SpectralQF::build(q, cov, a), 1e-6);
    auto spec = edgeworth::EdgeworthSpec::build(q, law, a, n);
    double plain = 0.0, plus = 0.0, minus = 0.0;
    for (int i = 0; i < 40; ++i) {
        const double x = 2.0 + 0.45 * i;
        const double f = fref.cdf(x);
        const double hx = h(x);
        const double ex = edgeworth::edgeworth_inverted(x, spec, 1e-6).raw_value;
        plain = std::max(plain, std::abs(f - hx));
        plus = std::max(plus, std::abs(f - hx - ex));
        minus = std::max(minus, std::abs(f - hx + ex));
    }
    MESSAGE("plain " << plain << " corrected " << plus << " opposite " << minus);
    CHECK(plus < plain);
    CHECK(plus < minus);
}

TEST_CASE("concentration examples") {
    auto q = model::QuadraticForm::identity(5);
    ConcentrationOptions opts;
    auto c0 = concentration(rademacher(5), q, 0.0, 1, opts);
    CHECK(c0.value == 1.0);
    CHECK(c0.lower_bound);
    auto wide = concentration(rademacher(5), q, 1e6, 4, opts);
    CHECK(wide.value == doctest::Approx(1.0));
    double prev = 0.0;
    for (double lam : {0.0, 1.0, 2.0, 5.0, 20.0}) {
        auto c = concentration(rademacher(5), q, lam, 16, opts);
        CHECK(c.value >= prev);
        prev = c.value;
    }
    ConcentrationOptions mc;
    mc.mode = DeltaMode::monte_carlo;
    mc.reps = 5000;
    prev = 0.0;
    for (double lam : {0.0, 1.0, 4.0}) {
        auto c = concentration(rademacher(5), q, lam, 16, mc);
        CHECK(c.value >= prev);
        prev = c.value;
    }
}

TEST_CASE("exact characteristic function") {
    auto law = rademacher(5);
    auto q = model::QuadraticForm::identity(5);
    CHECK(charfn_qf_exact(0.0, Vector::Zero(5), law, q, 3) == Complex(1.0, 0.0));
    auto sym = SourceDistribution::finite_discrete({Vector::Constant(2, 1.0), Vector::Constant(2, -1.0), Vector::Zero(2)},
                                                   {0.25, 0.25, 0.5});
    const auto q2 = model::QuadraticForm::identity(2);
    const Vector x2 = Vector::Constant(2, 0.3);
    CHECK(std::abs(charfn_qf_exact(0.7, x2, sym, q2, 3) - charfn_qf_exact(0.7, -x2, sym, q2, 3)) <= 1e-14);
    CHECK(std::abs(std::conj(charfn_qf_exact(0.7, x2, sym, q2, 3)) - charfn_qf_exact(-0.7, -x2, sym, q2, 3)) <= 1e-14);

    RandomStream rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const double t = rng.uniform(-2, 2);
        Vector x(5);
        for (int j = 0; j < 5; ++j) x(j) = rng.uniform(-2, 2);
        Complex brute(0.0, 0.0);
        for (int mask = 0; mask < (1 << 15); ++mask) {
            Vector z = Vector::Zero(5);
            for (int i = 0; i < 15; ++i) z(i % 5) += (mask >> i & 1) ? 1.0 : -1.0;
            const double ph = t * z.squaredNorm() + x.dot(z);
            brute += Complex(std::cos(ph), std::sin(ph)) / double(1 << 15);
        }
        const Complex v = charfn_qf_exact(t, x, law, q, 3);
        CHECK(std::abs(v - brute) <= 1e-12);
        CHECK(std::abs(v) <= 1.0 + 1e-15);
        // Same value through the generic atom route.
        auto flat = SourceDistribution::finite_discrete(law.atoms().atoms, law.atoms().probs);
        CHECK(std::abs(charfn_qf_exact(t, x, flat, q, 3) - brute) <= 1e-12);
    }
}

TEST_CASE("rate fit") {
    std::vector<std::pair<double, double>> pts;
    for (double n : {16.0, 32.0, 64.0, 128.0}) pts.emplace_back(n, 7.0 / n);
    auto f = rate_fit(pts);
    CHECK(std::abs(f.slope + 1.0) <= 1e-12);
    CHECK(std::abs(f.intercept - std::log(7.0)) <= 1e-12);
    pts.clear();
    for (double n : {10.0, 100.0, 1000.0}) pts.emplace_back(n, 3.0 / std::sqrt(n));
    CHECK(rate_fit(pts).slope == doctest::Approx(-0.5));
    pts.back().second = 0.0;
    CHECK_THROWS_AS(rate_fit(pts), ValidationError);
}
