#pragma once

// Sampling, truncation, exact lattice convolution, Delta_N and concentration
// estimates, and log-log rate fitting.

#include "qfclt/common.hpp"
#include "qfclt/gaussianqf.hpp"
#include "qfclt/model.hpp"
#include "qfclt/random.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace qfclt::empirics {

struct TruncationReport {
    long n_samples = 1;
    double diamond_threshold = 0.0;  // sigma sqrt(N), Euclidean norm
    double box_threshold = 0.0;      // sqrt(dN), C^{-1/2} norm

    // Laws of X^<>, X_<>, X^[], X_[] (atoms where the indicator fails map to 0).
    model::DiscreteLaw diamond_upper, diamond_lower, box_upper, box_lower;

    double lambda4_diamond = 0.0;
    std::array<double, 3> pi_diamond{};  // q = 2, 3, 4
    double lambda4_box = 0.0;
    std::array<double, 3> pi_box{};

    Vector box_mean;   // E X^[]
    Matrix box_cov;    // cov X^[]
    Matrix lower_second_moment;  // E X_[] X_[]^T
    Matrix cov_w;      // C - cov X^[]

    // X' = X^[] - E X^[] + W with W ~ N(0, cov_w).
    model::DiscreteLaw prime_discrete;
    Matrix prime_gaussian_cov;

    double pi_diamond_at(int q) const { return pi_diamond.at(q - 2); }
    double pi_box_at(int q) const { return pi_box.at(q - 2); }
};

/// Exact atom-level truncation. Requires a discrete law.
TruncationReport truncate(const model::SourceDistribution& dist, long n);

/// Replicates of Q[S_N - a] with S_N = N^{-1/2}(X_1 + ... + X_N).
std::vector<double> sample_sn(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                              long n, long reps, const RandomStream& stream, int threads = 0);

/// Exact law of Q[Z_N - b] for a coordinate-product law on a lattice and a
/// diagonal Q. Values are key * unit; dividing by N gives Q[S_N - a].
struct ExactTable {
    long n_samples = 1;
    double unit = 1.0;
    std::vector<std::int64_t> keys;  // strictly increasing
    std::vector<double> probs;
    double pruned_mass = 0.0;

    std::size_t size() const { return keys.size(); }
    double sum_value(std::size_t i) const { return static_cast<double>(keys[i]) * unit; }
    double normalized_value(std::size_t i) const { return sum_value(i) / static_cast<double>(n_samples); }
    double total_mass() const;
    double max_prob() const;
};

struct ExactOptions {
    /// Masses below this are dropped during the convolutions (reported as pruned_mass).
    double prune = 1e-20;
    /// Maximum number of dense accumulator cells.
    std::size_t cap = 50'000'000;
};

/// b = sqrt(N) a must make every coordinate of Z_N - b a lattice of step h_j
/// with 2 (Z_j - b_j) / h_j integral.
ExactTable exact_cdf_product(const model::SourceDistribution& dist, const model::QuadraticForm& q, long n,
                             const Vector& b, const ExactOptions& opts = {});
ExactTable exact_cdf_product(const model::SourceDistribution& dist, const model::QuadraticForm& q, long n,
                             const ExactOptions& opts = {});
/// Whether sum shift b is admissible for exact_cdf_product.
bool lattice_compatible(const model::SourceDistribution& dist, long n, const Vector& b);

/// Reference distribution function for Delta estimates.
struct ReferenceCdf {
    std::function<double(double)> cdf;
    /// Left limits; equal to cdf for continuous references.
    std::function<double(double)> cdf_left;
    /// Jump points of a discrete reference (empty for continuous ones).
    std::vector<double> jumps;
    /// Certified evaluation error.
    double budget = 0.0;

    static ReferenceCdf continuous(std::function<double(double)> f, double budget);
    static ReferenceCdf from_table(const ExactTable& table);
};

/// H_a (+ E_a when the Edgeworth term does not vanish) for the law, at tolerance tol.
ReferenceCdf gaussian_reference(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                                long n, double tol, bool with_edgeworth = true);

enum class DeltaMode { monte_carlo, exact };
const char* to_string(DeltaMode mode);

struct DeltaEstimate {
    long n_samples = 1;
    Vector shift;
    double estimate = 0.0;
    double std_error = 0.0;
    double budget = 0.0;
    DeltaMode mode = DeltaMode::exact;
    long reps = 0;
    std::uint64_t seed = 0;
    double max_jump = 0.0;
};

/// sup_x |F(x) - R(x)| for a step distribution F given by sorted values and
/// masses, evaluated two-sidedly at every jump of F or R.
double sup_distance(const std::vector<double>& values, const std::vector<double>& probs, const ReferenceCdf& ref);

/// RMS of the Kolmogorov distribution: MC standard error is this over sqrt(reps).
inline constexpr double kKolmogorovRms = 0.9068996821171089;

struct DeltaOptions {
    DeltaMode mode = DeltaMode::exact;
    long reps = 20000;
    std::uint64_t seed = 1;
    double tol = 1e-6;  // reference evaluation budget
    bool with_edgeworth = true;
    int threads = 0;
    ExactOptions exact;
};

DeltaEstimate estimate_delta(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                             long n, const DeltaOptions& opts);
/// MC estimate against an arbitrary reference.
DeltaEstimate estimate_delta_mc(const model::SourceDistribution& dist, const model::QuadraticForm& q, const Vector& a,
                                long n, const ReferenceCdf& ref, long reps, const RandomStream& stream,
                                int threads = 0);
/// Exact-table estimate against an arbitrary reference.
DeltaEstimate estimate_delta_exact(const ExactTable& table, const ReferenceCdf& ref);

struct ConcentrationEstimate {
    double lambda = 0.0;
    double value = 0.0;
    Vector best_shift;        // sum-scale shift b
    double best_left = 0.0;   // window [x, x + lambda] on the Q[Z_N - b] scale
    int candidates = 0;
    DeltaMode mode = DeltaMode::exact;
    /// The sup over shifts is restricted to a candidate set, so this is a lower bound.
    bool lower_bound = true;
};

/// Largest mass of a closed window of length lambda over sorted (value, prob) pairs.
double sliding_window_max(const std::vector<double>& values, const std::vector<double>& probs, double lambda,
                          double* left = nullptr);

struct ConcentrationOptions {
    DeltaMode mode = DeltaMode::exact;
    long reps = 20000;
    std::uint64_t seed = 1;
    int random_shifts = 8;
    int threads = 0;
    ExactOptions exact;
};

/// Candidate shifts: 0, the unit vectors, the atoms of a coordinate-product law
/// (or the first few atoms otherwise), and random small integer vectors.
/// Exact mode keeps only lattice-compatible candidates.
std::vector<Vector> concentration_candidates(const model::SourceDistribution& dist, long n, int random_shifts,
                                             const RandomStream& stream, bool exact);

/// Q(Z_N; lambda) = sup_{b, x} P{x <= Q[Z_N - b] <= x + lambda} over the candidate set.
ConcentrationEstimate concentration(const model::SourceDistribution& dist, const model::QuadraticForm& q,
                                    double lambda, long n, const ConcentrationOptions& opts);

/// E exp{i (t Q[Z_j] + <x, Z_j>)} with Z_j the sum of j copies of X.
Complex charfn_qf_exact(double t, const Vector& x, const model::SourceDistribution& dist,
                        const model::QuadraticForm& q, long j, std::size_t cap = 4'000'000);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_std_error = 0.0;
    std::vector<double> residuals;
};

/// Ordinary least squares on (log N, log value).
RateFit rate_fit(const std::vector<std::pair<double, double>>& points);

}  // namespace qfclt::empirics
