#pragma once

// Lattices, LLL reduction, successive minima, alpha-characteristics, point
// counting in norm balls and ellipsoids, and the SL(2)-flow matrices.

#include "qfclt/common.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace qfclt::lattice {

using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Lattice generated by the columns of an ambient_dim x rank basis matrix.
class Lattice {
public:
    static Lattice make(const Matrix& basis);
    static Lattice integer(int m) { return make(Matrix::Identity(m, m)); }

    const Matrix& basis() const { return basis_; }
    int rank() const { return static_cast<int>(basis_.cols()); }
    int ambient_dim() const { return static_cast<int>(basis_.rows()); }
    Matrix gram() const { return basis_.transpose() * basis_; }
    /// Gram determinant to the power 1/2.
    double det() const;
    Vector point(const IntVector& coeffs) const { return basis_ * coeffs.cast<double>(); }
    /// A * Lattice: basis A * B.
    Lattice transformed(const Matrix& a) const { return make(a * basis_); }

private:
    Matrix basis_;
};

/// Norms on the ambient space.
class NormSpec {
public:
    enum class Kind { euclidean, sup, weighted_sup, quadratic };

    static NormSpec euclidean() { return NormSpec(Kind::euclidean); }
    static NormSpec sup() { return NormSpec(Kind::sup); }
    /// F*((m, mbar)) = max{ |m|_inf, sigma1^2 |V^{-1} mbar|_inf } on R^{2s}.
    static NormSpec weighted_sup(double sigma1_sq, const Matrix& v);
    /// sqrt(x^T A x) for positive definite A.
    static NormSpec quadratic(const Matrix& a);

    Kind kind() const { return kind_; }
    double operator()(const Vector& x) const;
    /// c > 0 with F(x) >= c |x| for every x in R^dim.
    double lower_constant(int dim) const;
    /// c with F(x) <= c |x|.
    double upper_constant(int dim) const;

private:
    explicit NormSpec(Kind k) : kind_(k) {}
    Kind kind_;
    double sigma1_sq_ = 1.0;
    Matrix v_inv_;
    Matrix form_;
    double form_min_ = 1.0, form_max_ = 1.0;
};

struct LllResult {
    Lattice reduced;
    IntMatrix transform;  // reduced.basis() == input.basis() * transform
};

/// LLL reduction with Lovasz parameter delta in (1/4, 1).
LllResult lll_reduce(const Lattice& lat, double delta = 0.75);
/// LLL on a raw basis whose skew may fail the Lattice::make independence
/// check; the reduced basis is validated instead.
LllResult lll_reduce_basis(const Matrix& basis, double delta = 0.75);
/// Size reduction and Lovasz conditions on a basis, with slack tol.
bool is_lll_reduced(const Lattice& lat, double delta = 0.75, double tol = 1e-9);

/// Calls visit(coeffs, |B coeffs - center|^2) for every coefficient vector with
/// squared distance <= radius_sq. Returns the number of visits; throws
/// BudgetError once the count exceeds cap.
std::int64_t enumerate_ball(const Lattice& lat, const Vector& center, double radius_sq,
                            const std::function<void(const IntVector&, double)>& visit,
                            std::int64_t cap = 50'000'000);

enum class MinimaMethod { exact_enumeration, lll_approx };
const char* to_string(MinimaMethod m);

struct SuccessiveMinima {
    Vector values;                // M_1 <= ... <= M_m
    std::vector<Vector> witnesses;
    MinimaMethod method = MinimaMethod::exact_enumeration;
    /// Exact mode was requested but the enumeration cap forced the approximation.
    bool fell_back = false;
};

SuccessiveMinima successive_minima(const Lattice& lat, const NormSpec& norm = NormSpec::euclidean(),
                                   MinimaMethod mode = MinimaMethod::exact_enumeration,
                                   std::int64_t cap = 2'000'000);

struct AlphaProfile {
    Vector alpha_l;  // l = 1..m
    double alpha = 0.0;
    MinimaMethod method = MinimaMethod::lll_approx;
    bool exact_sup = false;
};

/// alpha_l = (M_1 ... M_l)^{-1} for l < m and alpha_m = 1 / det. With
/// exact_sup (Euclidean, rank <= 3) the sup over sublattices is computed by
/// enumerating short vectors.
AlphaProfile alpha_characteristic(const Lattice& lat, MinimaMethod mode = MinimaMethod::lll_approx,
                                  bool exact_sup = false);

/// #{v in lat : F(v) < b}, origin included.
std::int64_t count_norm_ball(const Lattice& lat, const NormSpec& norm, double b, std::int64_t cap = 10'000'000);

struct EllipsoidCount {
    std::int64_t count = 0;
    double volume = 0.0;
    double relative_error = 0.0;
};

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

/// #{m in Z^d : Q[m - a] <= r^2}, with the ellipsoid volume and relative error.
EllipsoidCount count_ellipsoid(const Matrix& q, double r, const Vector& a, int threads = 0,
                               std::int64_t cap = 2'000'000'000);

/// First n points of the Halton sequence in [0, 1)^d (starting at the origin).
std::vector<Vector> halton_points(int d, int n);

struct EllipsoidSweepRow {
    double r = 0.0;
    double sup_relative_error = 0.0;
    Vector worst_shift;
};

/// sup over the shift set of |count - vol| / vol for each radius.
std::vector<EllipsoidSweepRow> ellipsoid_sweep(const Matrix& q, const std::vector<double>& radii,
                                               const std::vector<Vector>& shifts, int threads = 0);

/// Dilations, shears and rotations acting on R^{2s} = (m, mbar).
struct FlowMatrices {
    int s = 1;
    double r = 1.0;
    double t = 0.0;
    double sigma1_sq = 1.0;
    Matrix v;  // s x s

    static FlowMatrices build(int s, double r, double t, double sigma1_sq, const Matrix& v);

    double u() const { return sigma1_sq * t; }
    /// theta = arcsin(t (1 + t^2)^{-1/2}).
    double theta() const;

    Matrix d(double a) const;       // diag(a I_s, a^{-1} I_s)
    Matrix u_shear(double a) const; // [[I, -a I], [0, I]]
    Matrix k(double a) const;       // [[I, -a I], [a I, I]]
    Matrix perm() const;            // rows reordered 1, s+1, 2, s+2, ...
    Matrix v0() const { return v / sigma1_sq; }

    Lattice base_lattice() const;    // [[I, 0], [0, V0]] Z^{2s}
    Lattice lambda_j(int j) const;   // D_j U_{1/j} base
    Matrix lambda_j_block(int j) const;  // [[j I, -V0], [0, j^{-1} V0]]

    static Matrix dbar(double a);           // diag(a, 1/a)
    static Matrix kbar(double theta);       // rotation by theta
    static Matrix g(double r, double t);    // [[r, -r t], [t / r, 1 / r]]
    /// Block diagonal with n copies of the 2 x 2 block.
    static Matrix block_diag(const Matrix& block, int n);
};

struct GmProbe {
    double integral = 0.0;
    double alpha_base = 0.0;
    double h_norm = 0.0;
    double ratio = 0.0;
    int grid = 0;
    double min_integrand = 0.0;
};

/// Trapezoid rule for the integral over [0, 2 pi] of alpha(H~ K~_theta Delta)^beta.
GmProbe gm_integral_probe(const Matrix& hbar, const Lattice& delta, double beta, int grid, int threads = 0);

struct DavenportBracket {
    double epsilon = 0.0;
    double sum = 0.0;
    double tail_bound = 0.0;
    std::int64_t count_h = 0;
    bool lower_holds = false;
    /// sum * epsilon^{d/2} / #H, the empirical constant of the upper bracket.
    double upper_ratio = 0.0;
};

/// Gaussian lattice sum against #{v : |v|_inf < 1}, with a certified tail.
DavenportBracket davenport_bracket(const Lattice& lat, double epsilon, double tail_tol = 1e-12);

}  // namespace qfclt::lattice
