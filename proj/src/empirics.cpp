#include "qfclt/empirics.hpp"

#include "qfclt/edgeworth.hpp"
#include "qfclt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>

namespace qfclt::empirics {

namespace {

constexpr long kRepChunk = 4096;

model::DiscreteLaw law_from(std::vector<Vector> atoms, std::vector<double> probs) {
    return model::DiscreteLaw::make(std::move(atoms), std::move(probs));
}

bool near_integer(double v, double tol = 1e-9) { return std::abs(v - std::round(v)) <= tol * std::max(1.0, std::abs(v)); }

// Largest h with every value an integer multiple of h (values nonnegative).
double lattice_gcd(const std::vector<double>& diffs) {
    double h = 0.0;
    for (double v : diffs) {
        if (v <= 0.0) continue;
        if (h == 0.0) {
            h = v;
            continue;
        }
        double a = std::max(h, v), b = std::min(h, v);
        const double tol = 1e-9 * a;
        while (b > tol) {
            double r = std::fmod(a, b);
            if (r > b - tol) r = 0.0;
            a = b;
            b = r;
        }
        h = a;
    }
    return h;
}

struct CoordinateLattice {
    double origin = 0.0;  // smallest value
    double step = 1.0;
    std::vector<long> index;  // (value - origin) / step
    std::vector<double> probs;
    long max_index = 0;
};

CoordinateLattice coordinate_lattice(const model::CoordinateLaw& law) {
    CoordinateLattice c;
    c.origin = *std::min_element(law.values.begin(), law.values.end());
    std::vector<double> diffs;
    for (double v : law.values) diffs.push_back(v - c.origin);
    const double h = lattice_gcd(diffs);
    c.step = h > 0.0 ? h : 1.0;
    for (std::size_t i = 0; i < law.values.size(); ++i) {
        const double k = diffs[i] / c.step;
        require(near_integer(k), "coordinate law is not supported on a lattice");
        c.index.push_back(std::lround(k));
        c.probs.push_back(law.probs[i]);
        c.max_index = std::max(c.max_index, c.index.back());
    }
    return c;
}

// Twice the lattice offset c = (N * origin - b) / step, if integral.
bool twice_offset(const CoordinateLattice& c, long n, double b, long& out) {
    const double twoc = 2.0 * (static_cast<double>(n) * c.origin - b) / c.step;
    if (!near_integer(twoc)) return false;
    out = std::lround(twoc);
    return true;
}

// N-fold convolution of an integer-indexed pmf, pruning tiny masses.
std::vector<double> nfold(const CoordinateLattice& c, long n, double prune, double& pruned, long& lo) {
    std::vector<double> cur{1.0};
    lo = 0;
    for (long step = 0; step < n; ++step) {
        std::vector<double> next(cur.size() + c.max_index, 0.0);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            if (cur[i] == 0.0) continue;
            for (std::size_t a = 0; a < c.index.size(); ++a) next[i + c.index[a]] += cur[i] * c.probs[a];
        }
        std::size_t first = 0, last = next.size();
        for (auto& v : next)
            if (v < prune && v > 0.0) {
                pruned += v;
                v = 0.0;
            }
        while (first < last && next[first] == 0.0) ++first;
        while (last > first && next[last - 1] == 0.0) --last;
        lo += static_cast<long>(first);
        cur.assign(next.begin() + first, next.begin() + last);
    }
    return cur;
}

struct PreparedTable {
    std::vector<std::map<std::int64_t, double>> factors;  // key -> mass, per coordinate
    std::vector<std::int64_t> weights;
    double unit = 1.0;
    double pruned = 0.0;
};

PreparedTable prepare(const model::SourceDistribution& dist, const model::QuadraticForm& q, long n, const Vector& b,
                      const ExactOptions& opts) {
    require(dist.kind() == model::DistKind::coordinate_product, "exact convolution needs a coordinate-product law");
    require(q.is_diagonal(), "exact convolution needs a diagonal Q");
    require(q.dim() == dist.dim() && b.size() == dist.dim(), "dimension mismatch");
    require(n >= 1, "N must be positive");
    const int d = dist.dim();
    PreparedTable t;
    std::vector<double> coef(d);
    for (int j = 0; j < d; ++j) {
        const auto lat = coordinate_lattice(dist.coordinates()[j]);
        long twoc = 0;
        require(twice_offset(lat, n, b(j), twoc), "shift is not compatible with the coordinate lattice");
        long lo = 0;
        const auto pmf = nfold(lat, n, opts.prune, t.pruned, lo);
        std::map<std::int64_t, double> factor;
        for (std::size_t i = 0; i < pmf.size(); ++i) {
            if (pmf[i] == 0.0) continue;
            const std::int64_t s = 2 * (lo + static_cast<std::int64_t>(i)) + twoc;
            factor[s * s] += pmf[i];
        }
        t.factors.push_back(std::move(factor));
        coef[j] = q.entries()(j, j) * lat.step * lat.step / 4.0;
    }

    double base = std::abs(coef[0]);
    for (double c : coef) base = std::min(base, std::abs(c));
    for (int div = 1; div <= 12; ++div) {
        const double u = base / div;
        bool ok = true;
        std::vector<std::int64_t> w(d);
        for (int j = 0; j < d && ok; ++j) {
            const double r = coef[j] / u;
            ok = std::abs(r - std::round(r)) <= 1e-12 * std::abs(r);
            w[j] = std::llround(r);
        }
        if (ok) {
            t.unit = u;
            t.weights = w;
            return t;
        }
    }
    throw ValidationError("diagonal scales of Q are not commensurate on the lattice");
}

ExactTable combine(const PreparedTable& t, long n, const ExactOptions& opts) {
    // Dense accumulator indexed by key - lo.
    std::int64_t lo = 0, hi = 0;
    std::vector<double> acc{1.0};
    double pruned = t.pruned;
    for (std::size_t j = 0; j < t.factors.size(); ++j) {
        const auto& f = t.factors[j];
        const std::int64_t w = t.weights[j];
        std::int64_t fmin = INT64_MAX, fmax = INT64_MIN;
        for (const auto& [k, p] : f) {
            fmin = std::min(fmin, w * k);
            fmax = std::max(fmax, w * k);
        }
        const std::int64_t nlo = lo + fmin, nhi = hi + fmax;
        const double cells = static_cast<double>(nhi - nlo + 1);
        if (cells > static_cast<double>(opts.cap))
            throw BudgetError("exact table exceeds the cell cap (" + std::to_string(cells) + " cells)", cells);
        std::vector<std::pair<std::int64_t, double>> sparse;
        for (const auto& [k, p] : f) sparse.emplace_back(w * k, p);
        std::vector<double> next(static_cast<std::size_t>(nhi - nlo + 1), 0.0);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            const double a = acc[i];
            if (a == 0.0) continue;
            const std::int64_t base = lo + static_cast<std::int64_t>(i) - nlo;
            for (const auto& [k, p] : sparse) next[static_cast<std::size_t>(base + k)] += a * p;
        }
        for (auto& v : next)
            if (v > 0.0 && v < opts.prune) {
                pruned += v;
                v = 0.0;
            }
        acc = std::move(next);
        lo = nlo;
        hi = nhi;
    }
    ExactTable out;
    out.n_samples = n;
    out.unit = t.unit;
    out.pruned_mass = pruned;
    for (std::size_t i = 0; i < acc.size(); ++i)
        if (acc[i] > 0.0) {
            out.keys.push_back(lo + static_cast<std::int64_t>(i));
            out.probs.push_back(acc[i]);
        }
    return out;
}

// Sums Z_N = X_1 + ... + X_N, one row per replicate.
Matrix sample_sums(const model::SourceDistribution& dist, long n, long reps, const RandomStream& stream, int threads) {
    require(n >= 1 && reps >= 1, "N and reps must be positive");
    const int d = dist.dim();
    Matrix out(reps, d);
    const std::size_t chunks = static_cast<std::size_t>((reps + kRepChunk - 1) / kRepChunk);

    if (dist.kind() == model::DistKind::gaussian) {
        const Matrix half = model::CovarianceModel::build(dist.covariance()).half_power();
        const double root = std::sqrt(static_cast<double>(n));
        parallel_for(chunks, threads, [&](std::size_t c) {
            RandomStream rng = stream.child(StreamKind::sampling, c);
            Vector z(d);
            for (long r = static_cast<long>(c) * kRepChunk; r < std::min(reps, (static_cast<long>(c) + 1) * kRepChunk); ++r) {
                for (int j = 0; j < d; ++j) z(j) = rng.normal();
                out.row(r) = (root * (half * z)).transpose();
            }
        });
        return out;
    }

    auto cumulative = [](const std::vector<double>& p) {
        std::vector<double> c(p.size());
        std::partial_sum(p.begin(), p.end(), c.begin());
        c.back() = 1.0;
        return c;
    };
    auto pick = [](const std::vector<double>& cum, double u) {
        return static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    };

    if (dist.kind() == model::DistKind::coordinate_product) {
        std::vector<std::vector<double>> cums;
        for (const auto& c : dist.coordinates()) cums.push_back(cumulative(c.probs));
        parallel_for(chunks, threads, [&](std::size_t c) {
            RandomStream rng = stream.child(StreamKind::sampling, c);
            for (long r = static_cast<long>(c) * kRepChunk; r < std::min(reps, (static_cast<long>(c) + 1) * kRepChunk); ++r)
                for (int j = 0; j < d; ++j) {
                    const auto& vals = dist.coordinates()[j].values;
                    double s = 0.0;
                    for (long i = 0; i < n; ++i) s += vals[std::min(pick(cums[j], rng.uniform()), vals.size() - 1)];
                    out(r, j) = s;
                }
        });
        return out;
    }

    const auto law = dist.atoms();
    const auto cum = cumulative(law.probs);
    parallel_for(chunks, threads, [&](std::size_t c) {
        RandomStream rng = stream.child(StreamKind::sampling, c);
        for (long r = static_cast<long>(c) * kRepChunk; r < std::min(reps, (static_cast<long>(c) + 1) * kRepChunk); ++r) {
            Vector s = Vector::Zero(d);
            for (long i = 0; i < n; ++i) s += law.atoms[std::min(pick(cum, rng.uniform()), law.size() - 1)];
            out.row(r) = s.transpose();
        }
    });
    return out;
}

void sorted_masses(std::vector<double> vals, std::vector<double>& values, std::vector<double>& probs) {
    std::sort(vals.begin(), vals.end());
    values.clear();
    probs.clear();
    const double w = 1.0 / static_cast<double>(vals.size());
    for (double v : vals) {
        if (!values.empty() && values.back() == v) {
            probs.back() += w;
        } else {
            values.push_back(v);
            probs.push_back(w);
        }
    }
}

}  // namespace

TruncationReport truncate(const model::SourceDistribution& dist, long n) {
    require(n >= 1, "N must be positive");
    require(dist.kind() != model::DistKind::gaussian, "truncation needs a discrete law");
    const auto law = dist.atoms();
    const int d = dist.dim();
    const auto cov = model::CovarianceModel::build(dist.covariance());
    const double sigma2 = cov.trace();
    const double nn = static_cast<double>(n);

    TruncationReport r;
    r.n_samples = n;
    r.diamond_threshold = std::sqrt(sigma2 * nn);
    r.box_threshold = std::sqrt(static_cast<double>(d) * nn);

    std::vector<Vector> du, dl, bu, bl;
    double e4_du = 0.0, e4_bu = 0.0;
    std::array<double, 3> e_dl{}, e_bl{};
    r.box_mean = Vector::Zero(d);
    Matrix box_second = Matrix::Zero(d, d);
    r.lower_second_moment = Matrix::Zero(d, d);
    const Vector zero = Vector::Zero(d);
    for (std::size_t i = 0; i < law.size(); ++i) {
        const Vector& x = law.atoms[i];
        const double p = law.probs[i];
        const double nx = x.norm();
        const double ny = (cov.inv_half_power() * x).norm();
        if (nx <= r.diamond_threshold) {
            du.push_back(x);
            dl.push_back(zero);
            e4_du += p * std::pow(nx, 4);
        } else {
            du.push_back(zero);
            dl.push_back(x);
            for (int q = 2; q <= 4; ++q) e_dl[q - 2] += p * std::pow(nx, q);
        }
        if (ny <= r.box_threshold) {
            bu.push_back(x);
            bl.push_back(zero);
            e4_bu += p * std::pow(ny, 4);
            r.box_mean += p * x;
            box_second += p * x * x.transpose();
        } else {
            bu.push_back(zero);
            bl.push_back(x);
            for (int q = 2; q <= 4; ++q) e_bl[q - 2] += p * std::pow(ny, q);
            r.lower_second_moment += p * x * x.transpose();
        }
    }
    r.diamond_upper = law_from(du, law.probs);
    r.diamond_lower = law_from(dl, law.probs);
    r.box_upper = law_from(bu, law.probs);
    r.box_lower = law_from(bl, law.probs);

    r.lambda4_diamond = e4_du / (sigma2 * sigma2 * nn);
    r.lambda4_box = e4_bu / (static_cast<double>(d) * d * nn);
    for (int q = 2; q <= 4; ++q) {
        r.pi_diamond[q - 2] = nn / std::pow(r.diamond_threshold, q) * e_dl[q - 2];
        r.pi_box[q - 2] = nn / std::pow(r.box_threshold, q) * e_bl[q - 2];
    }

    r.box_cov = box_second - r.box_mean * r.box_mean.transpose();
    r.cov_w = cov.entries() - r.box_cov;
    r.cov_w = 0.5 * (r.cov_w + r.cov_w.transpose());
    const auto eig = model::symmetric_eigen(r.cov_w);
    if (eig.values(d - 1) < -1e-10)
        throw ValidationError("covariance of W is not positive semidefinite (min eigenvalue " +
                              std::to_string(eig.values(d - 1)) + ")");

    std::vector<Vector> prime;
    for (const auto& x : bu) prime.push_back(x - r.box_mean);
    r.prime_discrete = law_from(prime, law.probs);
    r.prime_gaussian_cov = r.cov_w;
    return r;
}

std::vector<double> sample_sn(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                              long n, long reps, const RandomStream& stream, int threads) {
    require(a.size() == dist.dim() && q.dim() == dist.dim(), "dimension mismatch");
    const Matrix sums = sample_sums(dist, n, reps, stream, threads);
    const double root = std::sqrt(static_cast<double>(n));
    std::vector<double> out(reps);
    const Vector b = root * a;
    const double nd = static_cast<double>(n);
    for (long r = 0; r < reps; ++r) out[r] = q(sums.row(r).transpose() - b) / nd;
    return out;
}

double ExactTable::total_mass() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

double ExactTable::max_prob() const { return probs.empty() ? 0.0 : *std::max_element(probs.begin(), probs.end()); }

bool lattice_compatible(const model::SourceDistribution& dist, long n, const Vector& b) {
    if (dist.kind() != model::DistKind::coordinate_product || b.size() != dist.dim()) return false;
    for (int j = 0; j < dist.dim(); ++j) {
        long twoc = 0;
        try {
            if (!twice_offset(coordinate_lattice(dist.coordinates()[j]), n, b(j), twoc)) return false;
        } catch (const ValidationError&) {
            return false;
        }
    }
    return true;
}

ExactTable exact_cdf_product(const model::SourceDistribution& dist, const model::QuadraticForm& q, long n,
                             const Vector& b, const ExactOptions& opts) {
    return combine(prepare(dist, q, n, b, opts), n, opts);
}

ExactTable exact_cdf_product(const model::SourceDistribution& dist, const model::QuadraticForm& q, long n,
                             const ExactOptions& opts) {
    return exact_cdf_product(dist, q, n, Vector::Zero(dist.dim()), opts);
}

ReferenceCdf ReferenceCdf::continuous(std::function<double(double)> f, double budget) {
    ReferenceCdf r;
    r.cdf = f;
    r.cdf_left = std::move(f);
    r.budget = budget;
    return r;
}

ReferenceCdf ReferenceCdf::from_table(const ExactTable& table) {
    auto values = std::make_shared<std::vector<double>>();
    auto prefix = std::make_shared<std::vector<double>>(1, 0.0);
    for (std::size_t i = 0; i < table.size(); ++i) {
        values->push_back(table.normalized_value(i));
        prefix->push_back(prefix->back() + table.probs[i]);
    }
    ReferenceCdf r;
    r.jumps = *values;
    r.cdf = [values, prefix](double x) {
        return (*prefix)[std::upper_bound(values->begin(), values->end(), x) - values->begin()];
    };
    r.cdf_left = [values, prefix](double x) {
        return (*prefix)[std::lower_bound(values->begin(), values->end(), x) - values->begin()];
    };
    r.budget = table.pruned_mass;
    return r;
}

ReferenceCdf gaussian_reference(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                                long n, double tol, bool with_edgeworth) {
    const auto cov = model::CovarianceModel::build(dist.covariance());
    auto h = std::make_shared<gaussianqf::GaussianQfCdf>(gaussianqf::SpectralQF::build(q, cov, a), tol);
    const bool edge = with_edgeworth && dist.kind() != model::DistKind::gaussian && !a.isZero(0.0) &&
                      !dist.third_moments_vanish();
    if (!edge) return ReferenceCdf::continuous([h](double x) { return h->evaluate(x).raw_value; }, tol);
    auto spec = std::make_shared<edgeworth::EdgeworthSpec>(edgeworth::EdgeworthSpec::build(q, dist, a, n));
    return ReferenceCdf::continuous(
        [h, spec, tol](double x) { return h->evaluate(x).raw_value + edgeworth::edgeworth_inverted(x, *spec, tol).raw_value; },
        3.0 * tol);
}

const char* to_string(DeltaMode mode) { return mode == DeltaMode::exact ? "exact" : "monte-carlo"; }

double sup_distance(const std::vector<double>& values, const std::vector<double>& probs, const ReferenceCdf& ref) {
    require(values.size() == probs.size(), "values and probabilities differ in length");
    std::vector<double> points = values;
    points.insert(points.end(), ref.jumps.begin(), ref.jumps.end());
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    std::vector<double> prefix(values.size() + 1, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) prefix[i + 1] = prefix[i] + probs[i];
    double sup = 0.0;
    std::size_t k = 0;  // number of values < current point
    for (double z : points) {
        while (k < values.size() && values[k] < z) ++k;
        const double left = prefix[k];
        const double right = (k < values.size() && values[k] == z) ? prefix[k + 1] : left;
        sup = std::max({sup, std::abs(right - ref.cdf(z)), std::abs(left - ref.cdf_left(z))});
    }
    return sup;
}

DeltaEstimate estimate_delta_exact(const ExactTable& table, const ReferenceCdf& ref) {
    std::vector<double> values(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) values[i] = table.normalized_value(i);
    DeltaEstimate e;
    e.n_samples = table.n_samples;
    e.mode = DeltaMode::exact;
    e.estimate = sup_distance(values, table.probs, ref);
    e.budget = ref.budget + table.pruned_mass;
    e.max_jump = table.max_prob();
    return e;
}

DeltaEstimate estimate_delta_mc(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                                long n, const ReferenceCdf& ref, long reps, const RandomStream& stream, int threads) {
    std::vector<double> values, probs;
    sorted_masses(sample_sn(dist, q, a, n, reps, stream, threads), values, probs);
    DeltaEstimate e;
    e.n_samples = n;
    e.shift = a;
    e.mode = DeltaMode::monte_carlo;
    e.reps = reps;
    e.seed = stream.seed();
    e.estimate = sup_distance(values, probs, ref);
    e.std_error = kKolmogorovRms / std::sqrt(static_cast<double>(reps));
    e.budget = 3.0 * e.std_error + ref.budget;
    e.max_jump = *std::max_element(probs.begin(), probs.end());
    return e;
}

DeltaEstimate estimate_delta(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                             long n, const DeltaOptions& opts) {
    require(a.size() == dist.dim(), "shift has wrong dimension");
    const ReferenceCdf ref = gaussian_reference(dist, q, a, n, opts.tol, opts.with_edgeworth);
    DeltaEstimate e;
    if (opts.mode == DeltaMode::exact) {
        const Vector b = std::sqrt(static_cast<double>(n)) * a;
        e = estimate_delta_exact(exact_cdf_product(dist, q, n, b, opts.exact), ref);
    } else {
        e = estimate_delta_mc(dist, q, a, n, ref, opts.reps, RandomStream(opts.seed), opts.threads);
    }
    e.shift = a;
    e.seed = opts.seed;
    return e;
}

double sliding_window_max(const std::vector<double>& values, const std::vector<double>& probs, double lambda,
                          double* left) {
    require(lambda >= 0.0, "lambda must be nonnegative");
    const double slack = 1e-9 * std::max(1.0, lambda);
    double best = 0.0, window = 0.0;
    std::size_t lo = 0;
    for (std::size_t hi = 0; hi < values.size(); ++hi) {
        window += probs[hi];
        while (values[hi] - values[lo] > lambda + slack) window -= probs[lo++];
        if (window > best) {
            best = window;
            if (left) *left = values[lo];
        }
    }
    return std::min(best, 1.0);
}

std::vector<Vector> concentration_candidates(const model::SourceDistribution& dist, long n, int random_shifts,
                                             const RandomStream& stream, bool exact) {
    const int d = dist.dim();
    std::vector<Vector> raw;
    raw.push_back(Vector::Zero(d));
    for (int j = 0; j < d; ++j) raw.push_back(Vector::Unit(d, j));
    if (dist.kind() != model::DistKind::gaussian) {
        const auto law = dist.atoms();
        for (std::size_t i = 0; i < std::min<std::size_t>(law.size(), 32); ++i) raw.push_back(law.atoms[i]);
    }
    for (int k = 0; k < random_shifts; ++k) {
        RandomStream rng = stream.child(StreamKind::concentration_shift, static_cast<std::uint64_t>(k));
        Vector v(d);
        for (int j = 0; j < d; ++j) v(j) = static_cast<double>(rng.integer(-2, 2));
        raw.push_back(v);
    }
    std::vector<Vector> out;
    for (const auto& v : raw) {
        if (exact && !lattice_compatible(dist, n, v)) continue;
        bool dup = false;
        for (const auto& w : out) dup = dup || (w - v).norm() == 0.0;
        if (!dup) out.push_back(v);
    }
    return out;
}

ConcentrationEstimate concentration(const model::SourceDistribution& dist, const model::QuadraticForm& q,
                                    double lambda, long n, const ConcentrationOptions& opts) {
    require(lambda >= 0.0, "lambda must be nonnegative");
    const RandomStream master(opts.seed);
    const bool exact = opts.mode == DeltaMode::exact;
    const auto cands = concentration_candidates(dist, n, opts.random_shifts, master, exact);
    require(!cands.empty(), "no admissible shift candidates");

    ConcentrationEstimate e;
    e.lambda = lambda;
    e.mode = opts.mode;
    e.candidates = static_cast<int>(cands.size());
    std::vector<double> best(cands.size(), 0.0), lefts(cands.size(), 0.0);

    if (exact) {
        parallel_for(cands.size(), opts.threads, [&](std::size_t i) {
            const auto table = exact_cdf_product(dist, q, n, cands[i], opts.exact);
            std::vector<double> values(table.size());
            for (std::size_t k = 0; k < table.size(); ++k) values[k] = table.sum_value(k);
            best[i] = sliding_window_max(values, table.probs, lambda, &lefts[i]);
        });
    } else {
        const Matrix sums = sample_sums(dist, n, opts.reps, master, opts.threads);
        parallel_for(cands.size(), opts.threads, [&](std::size_t i) {
            std::vector<double> vals(opts.reps);
            for (long r = 0; r < opts.reps; ++r) vals[r] = q(sums.row(r).transpose() - cands[i]);
            std::vector<double> values, probs;
            sorted_masses(std::move(vals), values, probs);
            best[i] = sliding_window_max(values, probs, lambda, &lefts[i]);
        });
    }
    const std::size_t arg = static_cast<std::size_t>(std::max_element(best.begin(), best.end()) - best.begin());
    e.value = best[arg];
    e.best_shift = cands[arg];
    e.best_left = lefts[arg];
    return e;
}

Complex charfn_qf_exact(double t, const Vector& x, const model::SourceDistribution& dist,
                        const model::QuadraticForm& q, long j, std::size_t cap) {
    require(j >= 0, "j must be nonnegative");
    require(x.size() == dist.dim() && q.dim() == dist.dim(), "dimension mismatch");
    require(dist.kind() != model::DistKind::gaussian, "exact expectation needs a discrete law");
    if (j == 0) return Complex(1.0, 0.0);

    if (dist.kind() == model::DistKind::coordinate_product && q.is_diagonal()) {
        Complex total(1.0, 0.0);
        for (int k = 0; k < dist.dim(); ++k) {
            const auto& c = dist.coordinates()[k];
            std::map<double, double> cur{{0.0, 1.0}};
            for (long step = 0; step < j; ++step) {
                std::map<double, double> next;
                for (auto [v, p] : cur)
                    for (std::size_t a = 0; a < c.values.size(); ++a) next[v + c.values[a]] += p * c.probs[a];
                if (next.size() > cap) throw BudgetError("coordinate convolution exceeds cap", static_cast<double>(next.size()));
                cur = std::move(next);
            }
            Complex s(0.0, 0.0);
            const double qk = q.entries()(k, k);
            for (auto [v, p] : cur) {
                const double phase = t * qk * v * v + x(k) * v;
                s += p * Complex(std::cos(phase), std::sin(phase));
            }
            total *= s;
        }
        return total;
    }

    const auto law = dist.atoms();
    model::DiscreteLaw sum = law;
    for (long step = 1; step < j; ++step) {
        if (static_cast<double>(sum.size()) * static_cast<double>(law.size()) > static_cast<double>(cap))
            throw BudgetError("convolution of Z_j exceeds cap", static_cast<double>(sum.size()) * law.size());
        sum = model::convolve(sum, law);
    }
    Complex s(0.0, 0.0);
    for (std::size_t i = 0; i < sum.size(); ++i) {
        const double phase = t * q(sum.atoms[i]) + x.dot(sum.atoms[i]);
        s += sum.probs[i] * Complex(std::cos(phase), std::sin(phase));
    }
    return s;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 3, "rate fit needs at least three points");
    const double n = static_cast<double>(points.size());
    double sx = 0.0, sy = 0.0;
    for (auto [x, y] : points) {
        require(x > 0.0, "N must be positive");
        require(y > 0.0, "rate fit needs positive values");
        sx += std::log(x);
        sy += std::log(y);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (auto [x, y] : points) {
        sxx += (std::log(x) - mx) * (std::log(x) - mx);
        sxy += (std::log(x) - mx) * (std::log(y) - my);
    }
    require(sxx > 0.0, "rate fit needs distinct N values");
    RateFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (auto [x, y] : points) {
        const double r = std::log(y) - (f.intercept + f.slope * std::log(x));
        f.residuals.push_back(r);
        rss += r * r;
    }
    f.slope_std_error = n > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    return f;
}

}  // namespace qfclt::empirics
