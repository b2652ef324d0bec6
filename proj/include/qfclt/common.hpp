#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <complex>
#include <stdexcept>
#include <string>

namespace qfclt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

inline constexpr const char* kVersion = "0.3.1";

/// Invalid input: malformed shapes, asymmetric forms, bad probabilities.
/// The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical budget (tolerance, enumeration cap, iteration cap) could not be
/// met. Carries the best bound reached so callers can report it. Exit code 3.
class BudgetError : public std::runtime_error {
public:
    BudgetError(const std::string& what, double best_bound)
        : std::runtime_error(what), best_bound_(best_bound) {}

    double best_bound() const noexcept { return best_bound_; }

private:
    double best_bound_;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

}  // namespace qfclt
