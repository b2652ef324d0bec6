#include "qfclt/acceptance.hpp"
#include "qfclt/empirics.hpp"
#include "qfclt/gaussianqf.hpp"
#include "qfclt/lattice.hpp"
#include "qfclt/runner.hpp"
#include "qfclt/theta.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace qfclt;

namespace {

// Basis vectors arrive one per row, as in the JSON config.
lattice::Lattice lattice_from_rows(const Matrix& rows) { return lattice::Lattice::make(rows.transpose()); }

lattice::NormSpec norm_from(const std::string& kind) { return runner::parse_norm(kind); }

}  // namespace

PYBIND11_MODULE(_qfclt, m) {
    m.doc() = "Limit laws of quadratic forms, convergence-rate experiments, lattices and theta series";
    m.attr("__version__") = kVersion;

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<BudgetError>(m, "BudgetError", PyExc_RuntimeError);

    m.def(
        "gauss_cdf",
        [](const std::vector<double>& xs, const Matrix& q, const Matrix& c, std::optional<Vector> shift, double tol,
           const std::string& method) {
            require(method == "auto" || method == "prawitz", "method must be 'auto' or 'prawitz'");
            const auto form = model::QuadraticForm::build(q);
            const auto cov = model::CovarianceModel::build(c);
            const Vector a = shift ? *shift : Vector::Zero(form.dim());
            const gaussianqf::GaussianQfCdf cdf(gaussianqf::SpectralQF::build(form, cov, a), tol,
                                                method == "auto" ? gaussianqf::GaussianQfCdf::Method::automatic
                                                                 : gaussianqf::GaussianQfCdf::Method::prawitz);
            std::vector<double> values, errors;
            for (double x : xs) {
                const auto r = cdf.evaluate(x);
                values.push_back(r.value);
                errors.push_back(r.total_error());
            }
            return py::make_tuple(values, errors);
        },
        py::arg("x"), py::arg("q"), py::arg("c"), py::arg("shift") = py::none(), py::arg("tol") = 1e-6,
        py::arg("method") = "auto", "CDF of Q[G - a], G ~ N(0, C), with per-point error bounds.");

    m.def(
        "theta_series",
        [](const Matrix& s, Complex z, const Vector& a, const Vector& b, double tol) {
            return theta::theta_series(theta::ThetaParams::make(s, z, a, b), tol).value;
        },
        py::arg("s"), py::arg("z"), py::arg("a"), py::arg("b"), py::arg("tol") = 1e-13);

    m.def(
        "poisson_check",
        [](const Matrix& s, Complex z, const Vector& a, const Vector& b, double tol) {
            const auto c = theta::poisson_check(theta::ThetaParams::make(s, z, a, b), tol);
            py::dict d;
            d["lhs"] = c.lhs;
            d["rhs"] = c.rhs;
            d["diff"] = c.diff;
            return d;
        },
        py::arg("s"), py::arg("z"), py::arg("a"), py::arg("b"), py::arg("tol") = 1e-13);

    m.def(
        "weight_domination",
        [](long n, double c2) {
            const auto c = theta::weight_domination_check(n, c2);
            return py::make_tuple(c.sup_ratio, c.tail_mass);
        },
        py::arg("n"), py::arg("c2") = 0.25, "(sup ratio, tail mass) of the binomial weights.");

    m.def(
        "lll_reduce",
        [](const Matrix& rows, double delta) {
            return Matrix(lattice::lll_reduce(lattice_from_rows(rows), delta).reduced.basis().transpose());
        },
        py::arg("basis"), py::arg("delta") = 0.75, "LLL-reduced basis, vectors as rows.");

    m.def(
        "successive_minima",
        [](const Matrix& rows, const std::string& norm, bool exact) {
            return lattice::successive_minima(lattice_from_rows(rows), norm_from(norm),
                                              exact ? lattice::MinimaMethod::exact_enumeration
                                                    : lattice::MinimaMethod::lll_approx)
                .values;
        },
        py::arg("basis"), py::arg("norm") = "euclidean", py::arg("exact") = true);

    m.def(
        "count_ellipsoid",
        [](const Matrix& q, double r, std::optional<Vector> shift, int threads) {
            const auto c = lattice::count_ellipsoid(q, r, shift ? *shift : Vector::Zero(q.rows()), threads);
            return py::make_tuple(c.count, c.volume);
        },
        py::arg("q"), py::arg("r"), py::arg("shift") = py::none(), py::arg("threads") = 0,
        "(#{m : Q[m - a] <= r^2}, ellipsoid volume).");

    m.def(
        "rate_fit",
        [](const std::vector<double>& n, const std::vector<double>& values) {
            require(n.size() == values.size(), "n and values differ in length");
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < n.size(); ++i) pts.emplace_back(n[i], values[i]);
            const auto f = empirics::rate_fit(pts);
            return py::make_tuple(f.slope, f.intercept, f.slope_std_error);
        },
        py::arg("n"), py::arg("values"));

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_json, int threads) {
            const auto resolved = runner::resolve_config(command, runner::Json::parse(config_json), {});
            runner::RunResult res;
            {
                py::gil_scoped_release release;
                res = runner::execute(command, resolved, threads);
            }
            return py::make_tuple(res.table.columns, res.table.rows);
        },
        py::arg("command"), py::arg("config_json"), py::arg("threads") = 0,
        "Runs a CLI subcommand on a JSON config and returns (columns, rows).");

    m.def(
        "run_criterion",
        [](int id, std::uint64_t seed, bool reduced) {
            acceptance::SuiteOptions opts;
            opts.seed = seed;
            opts.reduced = reduced;
            acceptance::CriterionResult r;
            {
                py::gil_scoped_release release;
                r = acceptance::run_criterion(id, opts);
            }
            py::dict d;
            d["id"] = r.id;
            d["name"] = r.name;
            d["pass"] = r.pass;
            d["exploratory"] = r.exploratory;
            d["metric"] = r.metric;
            d["detail"] = r.detail;
            return d;
        },
        py::arg("id"), py::arg("seed") = 1, py::arg("reduced") = true);
}
