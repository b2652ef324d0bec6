#pragma once

// Theta series and Poisson summation, lattice Gaussian and binomial weights,
// and exact checks of the symmetrization inequalities.

#include "qfclt/common.hpp"
#include "qfclt/model.hpp"

#include <cstdint>

namespace qfclt::theta {

/// Data of sum_m exp{-z S[m + a] + 2 pi i <m, b>}.
struct ThetaParams {
    Matrix s_form;
    Complex z;
    Vector a, b;

    static ThetaParams make(const Matrix& s_form, Complex z, const Vector& a, const Vector& b);
    int dim() const { return static_cast<int>(s_form.rows()); }
};

struct ThetaValue {
    Complex value;
    double tail_bound = 0.0;
    std::int64_t terms = 0;
};

/// Truncated to the ellipsoid S[m + a] <= R^2 with R chosen so the tail is <= tol.
ThetaValue theta_series(const ThetaParams& params, double tol, std::int64_t cap = 20'000'000);

struct PoissonCheck {
    Complex lhs, rhs;
    double diff = 0.0;
    double lhs_tail = 0.0, rhs_tail = 0.0;
};

/// Both sides of the Poisson summation identity, each truncated independently.
PoissonCheck poisson_check(const ThetaParams& params, double tol = 1e-13);

/// One-dimensional weights: binomial p1(m) = 4^{-n} C(2n, m + n) and the
/// lattice Gaussian q1(m) = A_n n^{-1/2} exp{-m^2 / 2n}.
struct WeightTable {
    long n = 1;
    int s = 1;
    double a_n = 0.0;
    long range = 0;          // |m| <= range for q1
    double tail_bound = 0.0; // q1 mass outside the range

    static WeightTable make(long n, int s, double tail_tol = 1e-15);

    double p1(long m) const;
    double q1(long m) const;
    double p(const Eigen::VectorXi& m) const;
    double q(const Eigen::VectorXi& m) const;
    /// E exp{i theta R_1} = cos(theta / 2)^{2n}.
    double p1_charfn(double theta) const;
    /// sum_m q1(m) cos(m theta), truncated to the range.
    double q1_charfn(double theta) const;
};

struct DominationCheck {
    double sup_ratio = 0.0;
    long argmax = 0;
    double tail_mass = 0.0;
};

/// sup_{|m| <= c2 n} p1(m) sqrt(n) exp{m^2 / 2n} and P{|R_1| >= c2 n}.
DominationCheck weight_domination_check(long n, double c2);

struct SymmetrizationCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double lhs_imag = 0.0;
    double rhs_imag = 0.0;
    bool holds = false;
};

/// 2 |E e{t P(Z + U + V + W)}|^2 against E e{2t <Q Z~, U~>} + E e{2t <Q Z~, V~>}
/// with P(x) = Q[x] + <L, x> + c, by full enumeration.
SymmetrizationCheck symmetrization_check(double t, const model::DiscreteLaw& z, const model::DiscreteLaw& u,
                                         const model::DiscreteLaw& v, const model::DiscreteLaw& w, const Matrix& q,
                                         const Vector& l, double c, std::int64_t cap = 1'000'000);

/// Vectors z_1..z_s, z'_1..z'_s (columns), the form Q and covariance C.
struct SymmetrizationInstance {
    Matrix q;
    Matrix z, zp;  // d x s
    Matrix cov;

    static SymmetrizationInstance make(const Matrix& q, const Matrix& z, const Matrix& zp, const Matrix& cov);
    int s() const { return static_cast<int>(z.cols()); }
    int d() const { return static_cast<int>(z.rows()); }
    /// B_t with entries t <Q z_i, z'_j>.
    Matrix b(double t) const;
    Matrix v() const { return b(1.0) / (2.0 * kPi); }
    double sigma1_sq() const;
    Matrix v0() const { return v() / sigma1_sq(); }
    /// |D z_j - e_j| <= delta and |D z'_j - e_j| <= delta for D = C^{-1/2}.
    bool in_class(double delta) const;
};

struct Lemma75Probe {
    double lhs = 0.0;
    double gaussian_term = 0.0;   // E e{<B_t zeta_n, zeta'_n>}
    double additive_proxy = 0.0;  // P{max_j |R_j| >= n / 4}, standing in for e^{-c n}
    double theta_bound = 0.0;     // r^{-s} sum exp{-r^2 |m - t V mbar|^2 - |mbar|^2 / r^2}
    double r = 0.0;
};

/// lhs = E e{t <Q W~, W~'> / 4} exactly, with the Gaussian and theta-series sides.
Lemma75Probe lemma75_probe(double t, const SymmetrizationInstance& inst, long n);

}  // namespace qfclt::theta
