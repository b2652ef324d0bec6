#pragma once

// Configuration-driven experiment runner behind the qfclt tool: JSON config
// parsing, subcommand dispatch, CSV and plot-data emission.

#include "qfclt/common.hpp"
#include "qfclt/lattice.hpp"
#include "qfclt/model.hpp"
#include "qfclt/random.hpp"
#include "qfclt/theta.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qfclt::runner {

using Json = nlohmann::json;

/// Command-line overrides applied on top of the config file.
struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    int threads = 0;
    std::optional<double> tol;
    std::optional<long> random;  // instance count for theta-check and sym-check
    std::string input;           // CSV consumed by rate-fit
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    std::string to_csv() const;
};

struct PlotPoint {
    double x = 0.0, y = 0.0, err = 0.0;
    std::string series;
};

struct RunResult {
    Table table;
    std::vector<PlotPoint> plot;
    std::string summary;  // one line per notable quantity, printed to stdout
    bool failed = false;  // a check inside the command did not pass
};

const std::vector<std::string>& subcommands();

/// Shortest round-trip-stable decimal rendering used in every table.
std::string fmt(double v);
std::uint64_t fnv1a64(const std::string& bytes);

Json load_config(const std::string& path);
/// Applies seed/tol/random/input overrides and fills defaults (seed = 1).
Json resolve_config(const std::string& command, Json config, const RunOptions& opts);
/// Comment block: version, command, config hash, seed and the resolved config.
std::string output_header(const std::string& command, const Json& resolved);

/// Runs a subcommand on a resolved config. Throws ValidationError or BudgetError.
RunResult execute(const std::string& command, const Json& resolved, int threads);

/// Full pipeline: resolve, execute, write <out>/<command>.csv and
/// <out>/<command>.plot.csv. Returns 0, 2 (validation) or 3 (budget); a
/// failed suite returns 1.
int run(const std::string& command, const Json& config, const RunOptions& opts, std::ostream& out, std::ostream& err);

// Config fragments.
Matrix parse_matrix(const Json& spec, int dim_hint = 0);
Vector parse_vector(const Json& spec);
model::SourceDistribution parse_distribution(const Json& spec);
lattice::NormSpec parse_norm(const Json& spec);
/// Basis vectors listed one per row; returns the matrix with them as columns.
lattice::Lattice parse_basis(const Json& spec);
std::vector<double> parse_grid(const Json& spec);

/// Reproducible random inputs shared by the CLI checks and the acceptance suite.
theta::ThetaParams random_theta_instance(RandomStream& rng, int s, Complex z);
struct SymInstance {
    model::DiscreteLaw z, u, v, w;
    Matrix q;
    Vector l;
    double c = 0.0;
};
SymInstance random_sym_instance(RandomStream& rng);
/// Orthogonal conjugate of diag(eigenvalues) with a rotation drawn from seed.
Matrix rotated_diagonal(const Vector& eigenvalues, std::uint64_t seed);

}  // namespace qfclt::runner
