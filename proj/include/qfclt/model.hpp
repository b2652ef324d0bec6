#pragma once

// Core domain types: quadratic forms, covariance models and mean-zero source
// laws, plus the exact moment and non-degeneracy checks built on them.

#include "qfclt/common.hpp"
#include "qfclt/random.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace qfclt::model {

/// Symmetric non-degenerate d x d form Q with Q[x] = <Qx, x>.
class QuadraticForm {
public:
    /// Validates symmetry (1e-12 relative) and non-degeneracy. The isometric
    /// flag records whether Q*Q = I within 1e-12.
    static QuadraticForm build(const Matrix& entries);
    static QuadraticForm identity(int dim) { return build(Matrix::Identity(dim, dim)); }

    int dim() const { return static_cast<int>(entries_.rows()); }
    const Matrix& entries() const { return entries_; }
    bool isometric() const { return isometric_; }
    bool is_diagonal() const { return diagonal_; }

    double operator()(const Vector& x) const { return x.dot(entries_ * x); }
    /// sum_ij q_ij x_i x_j, accumulated entry by entry.
    double bilinear_sum(const Vector& x) const;

private:
    Matrix entries_;
    bool isometric_ = false;
    bool diagonal_ = false;
};

/// Symmetric positive definite covariance with cached spectral data.
class CovarianceModel {
public:
    static CovarianceModel build(const Matrix& entries);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const Matrix& entries() const { return entries_; }
    /// sigma_1^2 >= ... >= sigma_d^2 > 0.
    const Vector& eigenvalues() const { return eigenvalues_; }
    /// Columns match eigenvalues().
    const Matrix& eigenvectors() const { return eigenvectors_; }
    double trace() const { return trace_; }
    double determinant() const { return determinant_; }
    const Matrix& half_power() const { return half_; }
    const Matrix& inv_half_power() const { return inv_half_; }
    const Matrix& inverse() const { return inverse_; }

private:
    Matrix entries_;
    Vector eigenvalues_;
    Matrix eigenvectors_;
    double trace_ = 0.0;
    double determinant_ = 0.0;
    Matrix half_;
    Matrix inv_half_;
    Matrix inverse_;
};

/// Symmetric eigendecomposition with eigenvalues sorted nonincreasing.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& m);

/// Raw finite law: atoms with positive probabilities summing to one. No
/// centering is applied; SourceDistribution adds that on top.
struct DiscreteLaw {
    std::vector<Vector> atoms;
    std::vector<double> probs;

    /// Validates, drops zero-probability atoms, merges identical atoms and
    /// renormalizes sums within 1e-12 of one.
    static DiscreteLaw make(std::vector<Vector> atoms, std::vector<double> probs);
    static DiscreteLaw point_mass(const Vector& at) { return make({at}, {1.0}); }

    int dim() const { return atoms.empty() ? 0 : static_cast<int>(atoms.front().size()); }
    std::size_t size() const { return atoms.size(); }
    Vector mean() const;
    Matrix second_moment() const;
};

/// Law of X1 - X2 for independent copies (exact atom convolution).
DiscreteLaw symmetrize(const DiscreteLaw& law);
/// Law of X + Y for independent X, Y.
DiscreteLaw convolve(const DiscreteLaw& x, const DiscreteLaw& y);

/// One-dimensional finite law used by coordinate-product sources.
struct CoordinateLaw {
    std::vector<double> values;
    std::vector<double> probs;
};

enum class DistKind { finite_discrete, coordinate_product, gaussian };

const char* to_string(DistKind kind);

/// Mean-zero law of X. User atoms are centered at construction and the
/// applied offset is kept in centering_offset().
class SourceDistribution {
public:
    static SourceDistribution finite_discrete(std::vector<Vector> atoms, std::vector<double> probs);
    static SourceDistribution coordinate_product(std::vector<CoordinateLaw> coordinates);
    static SourceDistribution gaussian(const Matrix& covariance);

    DistKind kind() const { return kind_; }
    int dim() const { return dim_; }
    const Vector& centering_offset() const { return offset_; }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    /// beta_q = E ||X||^q for q in {2, 3, 4}.
    double beta(int q) const;
    /// E X_i X_j X_k, row-major d^3 layout.
    const std::vector<double>& third_moments() const { return third_; }
    double third_moment(int i, int j, int k) const { return third_[(i * dim_ + j) * dim_ + k]; }
    bool third_moments_vanish() const;

    /// Full atom list; coordinate products are expanded (cap: 2^22 atoms).
    DiscreteLaw atoms() const;
    const std::vector<CoordinateLaw>& coordinates() const { return coordinates_; }

private:
    void compute_moments();

    DistKind kind_ = DistKind::finite_discrete;
    int dim_ = 0;
    DiscreteLaw law_;
    std::vector<CoordinateLaw> coordinates_;
    Vector offset_;
    Vector mean_;
    Matrix covariance_;
    std::array<double, 3> betas_{};
    std::vector<double> third_;
};

/// Symmetrization of a source law. Discrete kinds are convolved exactly; the
/// gaussian kind maps to covariance 2C.
SourceDistribution symmetrize(const SourceDistribution& dist);

/// Result of the non-degeneracy condition P{||Y - e|| <= delta} >= p.
struct ConditionReport {
    bool holds = true;
    std::vector<double> probabilities;
    /// Zero for exact (discrete) evaluation; Monte Carlo standard error otherwise.
    std::vector<double> std_errors;
};

ConditionReport check_condition_N(const SourceDistribution& law, double p, double delta,
                                  const std::vector<Vector>& points, std::uint64_t seed = 1,
                                  long mc_draws = 1'000'000);

/// Both N(p, delta, S, Y) and N(p, delta, QS, Y) must hold.
ConditionReport check_condition_NQ(const SourceDistribution& law, const QuadraticForm& q, double p,
                                   double delta, const std::vector<Vector>& points,
                                   std::uint64_t seed = 1, long mc_draws = 1'000'000);

/// Shift a of the limit law and its sum-scale counterpart b = sqrt(N) a.
struct ShiftedInstance {
    Vector shift_a;
    long n_samples = 1;
    Vector shift_b;

    static ShiftedInstance make(const Vector& a, long n);
};

}  // namespace qfclt::model
