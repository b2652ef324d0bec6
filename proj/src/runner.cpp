#include "qfclt/runner.hpp"

#include "qfclt/acceptance.hpp"
#include "qfclt/edgeworth.hpp"
#include "qfclt/empirics.hpp"
#include "qfclt/gaussianqf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace qfclt::runner {

namespace {

const Json& need(const Json& cfg, const char* key) {
    if (!cfg.is_object() || !cfg.contains(key)) throw ValidationError(std::string("missing required key '") + key + "'");
    return cfg.at(key);
}

template <class T>
T get_or(const Json& cfg, const char* key, T fallback) {
    if (!cfg.contains(key)) return fallback;
    try {
        return cfg.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(std::string("key '") + key + "' has the wrong type");
    }
}

std::vector<long> parse_n_list(const Json& spec) {
    std::vector<long> out;
    for (double v : parse_grid(spec)) {
        require(v >= 1.0 && v == std::floor(v), "sample sizes must be positive integers");
        out.push_back(static_cast<long>(v));
    }
    return out;
}

Vector shift_or_zero(const Json& cfg, int d) {
    if (!cfg.contains("shift")) return Vector::Zero(d);
    Vector a = parse_vector(cfg.at("shift"));
    require(a.size() == d, "shift dimension does not match");
    return a;
}

empirics::DeltaMode parse_mode(const Json& cfg) {
    const auto m = get_or<std::string>(cfg, "mode", "exact");
    if (m == "exact") return empirics::DeltaMode::exact;
    if (m == "monte_carlo") return empirics::DeltaMode::monte_carlo;
    throw ValidationError("mode must be 'exact' or 'monte_carlo'");
}

std::string str(std::int64_t v) { return std::to_string(v); }

void fit_summary(RunResult& res, const std::vector<std::pair<double, double>>& pts, const std::string& label) {
    std::vector<std::pair<double, double>> pos;
    for (auto p : pts)
        if (p.second > 0.0) pos.push_back(p);
    if (pos.size() < 3) return;
    const auto f = empirics::rate_fit(pos);
    res.summary += label + " slope " + fmt(f.slope) + " +- " + fmt(f.slope_std_error) + "\n";
}

RunResult cmd_gauss_cdf(const Json& cfg, int) {
    const Matrix q = parse_matrix(need(cfg, "q"));
    const auto form = model::QuadraticForm::build(q);
    const auto cov = model::CovarianceModel::build(parse_matrix(need(cfg, "c"), form.dim()));
    require(cov.dim() == form.dim(), "q and c dimensions differ");
    const Vector a = shift_or_zero(cfg, form.dim());
    const auto xs = parse_grid(need(cfg, "x"));
    const auto method = get_or<std::string>(cfg, "method", "auto");
    require(method == "auto" || method == "prawitz", "method must be 'auto' or 'prawitz'");
    const gaussianqf::GaussianQfCdf cdf(gaussianqf::SpectralQF::build(form, cov, a), cfg.at("tol").get<double>(),
                                        method == "auto" ? gaussianqf::GaussianQfCdf::Method::automatic
                                                         : gaussianqf::GaussianQfCdf::Method::prawitz);
    RunResult res;
    res.table.columns = {"x", "cdf", "error_bound", "method"};
    const std::string label = cdf.closed_form() ? "closed_form" : "prawitz";
    for (double x : xs) {
        const auto r = cdf.evaluate(x);
        res.table.add({fmt(x), fmt(r.value), fmt(r.total_error()), label});
        res.plot.push_back({x, r.value, r.total_error(), "cdf"});
    }
    res.summary = "points " + str(static_cast<std::int64_t>(xs.size())) + ", method " + label + "\n";
    return res;
}

RunResult cmd_edgeworth(const Json& cfg, int threads) {
    const auto law = parse_distribution(need(cfg, "distribution"));
    const auto form = model::QuadraticForm::build(parse_matrix(need(cfg, "q"), law.dim()));
    const long n = need(cfg, "n").get<long>();
    const auto spec = edgeworth::EdgeworthSpec::build(form, law, shift_or_zero(cfg, law.dim()), n);
    const auto xs = parse_grid(need(cfg, "x"));
    const long draws = get_or<long>(cfg, "draws", 1'000'000);
    const RandomStream stream = RandomStream(cfg.at("seed").get<std::uint64_t>()).child(StreamKind::edgeworth_measure, 0);
    const auto cv = edgeworth::cross_validate_edgeworth(spec, xs, draws, stream, get_or<double>(cfg, "tail_tol", 1e-4),
                                                        threads);
    RunResult res;
    res.table.columns = {"x", "measure", "measure_se", "fourier", "fourier_error", "budget"};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        res.table.add({fmt(xs[i]), fmt(cv.measure[i]), fmt(cv.measure_se[i]), fmt(cv.fourier[i]), fmt(cv.fourier_error[i]),
                       fmt(cv.budget[i])});
        res.plot.push_back({xs[i], cv.measure[i], cv.measure_se[i], "measure"});
        res.plot.push_back({xs[i], cv.fourier[i], cv.fourier_error[i], "fourier"});
    }
    res.summary = "max discrepancy " + fmt(cv.max_discrepancy) + ", max budget " + fmt(cv.max_budget) +
                  (cv.within_budget ? ", within budget\n" : ", OUTSIDE budget\n");
    res.failed = !cv.within_budget;
    return res;
}

model::SourceDistribution law_with_declared_covariance(const Json& cfg) {
    const auto law = parse_distribution(need(cfg, "distribution"));
    const Json& c = need(cfg, "c");
    if (!(c.is_string() && c.get<std::string>() == "distribution")) {
        const Matrix declared = parse_matrix(c, law.dim());
        require(declared.rows() == law.dim() && declared.cols() == law.dim(), "c dimension does not match the law");
        const double scale = std::max(1.0, law.covariance().cwiseAbs().maxCoeff());
        require((declared - law.covariance()).cwiseAbs().maxCoeff() <= 1e-9 * scale,
                "c does not match the covariance of the distribution");
    }
    return law;
}

RunResult cmd_deltan(const Json& cfg, int threads) {
    const auto law = law_with_declared_covariance(cfg);
    const auto form = model::QuadraticForm::build(parse_matrix(need(cfg, "q"), law.dim()));
    const Vector a = shift_or_zero(cfg, law.dim());
    empirics::DeltaOptions opts;
    opts.mode = parse_mode(cfg);
    opts.reps = get_or<long>(cfg, "reps", opts.reps);
    opts.seed = cfg.at("seed").get<std::uint64_t>();
    opts.tol = cfg.at("tol").get<double>();
    opts.with_edgeworth = get_or<bool>(cfg, "edgeworth", true);
    opts.threads = threads;
    RunResult res;
    res.table.columns = {"N", "estimate", "std_error", "budget", "mode", "seed", "max_jump"};
    std::vector<std::pair<double, double>> pts;
    for (long n : parse_n_list(need(cfg, "n"))) {
        const auto e = empirics::estimate_delta(law, form, a, n, opts);
        res.table.add({str(n), fmt(e.estimate), fmt(e.std_error), fmt(e.budget), empirics::to_string(e.mode),
                       std::to_string(e.seed), fmt(e.max_jump)});
        res.plot.push_back({static_cast<double>(n), e.estimate, e.std_error, "delta"});
        pts.emplace_back(static_cast<double>(n), e.estimate);
    }
    fit_summary(res, pts, "Delta_N");
    return res;
}

RunResult cmd_conc(const Json& cfg, int threads) {
    const auto law = parse_distribution(need(cfg, "distribution"));
    const auto form = model::QuadraticForm::build(parse_matrix(need(cfg, "q"), law.dim()));
    empirics::ConcentrationOptions opts;
    opts.mode = parse_mode(cfg);
    opts.reps = get_or<long>(cfg, "reps", opts.reps);
    opts.seed = cfg.at("seed").get<std::uint64_t>();
    opts.random_shifts = get_or<int>(cfg, "random_shifts", opts.random_shifts);
    opts.threads = threads;
    const std::vector<double> lambdas = cfg.contains("lambda") ? parse_grid(cfg.at("lambda")) : std::vector<double>{0.0, 1.0};
    const auto ns = parse_n_list(need(cfg, "n"));
    RunResult res;
    res.table.columns = {"N", "lambda", "estimate", "std_error", "budget", "mode", "seed"};
    for (double lambda : lambdas) {
        std::vector<std::pair<double, double>> pts;
        for (long n : ns) {
            const auto c = empirics::concentration(law, form, lambda, n, opts);
            const double se = c.mode == empirics::DeltaMode::exact
                                  ? 0.0
                                  : std::sqrt(c.value * (1.0 - c.value) / static_cast<double>(opts.reps));
            res.table.add({str(n), fmt(lambda), fmt(c.value), fmt(se), "0", empirics::to_string(c.mode),
                           std::to_string(opts.seed)});
            res.plot.push_back({static_cast<double>(n), c.value, se, "lambda=" + fmt(lambda)});
            pts.emplace_back(static_cast<double>(n), c.value);
        }
        fit_summary(res, pts, "Q(Z_N; " + fmt(lambda) + ")");
    }
    return res;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        out.push_back(cell);
    }
    return out;
}

RunResult cmd_rate_fit(const Json& cfg, int) {
    const std::string path = need(cfg, "input").get<std::string>();
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open input CSV '" + path + "'");
    std::string line;
    std::vector<std::string> header;
    std::vector<std::pair<double, double>> pts;
    int nx = 0, ny = 1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv(line);
        if (header.empty()) {
            header = cells;
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (header[i] == "N" || header[i] == "r") nx = static_cast<int>(i);
                if (header[i] == "estimate" || header[i] == "value" || header[i] == "sup_relative_error")
                    ny = static_cast<int>(i);
            }
            require(nx != ny && static_cast<int>(header.size()) > std::max(nx, ny), "input CSV needs two columns");
            continue;
        }
        require(static_cast<int>(cells.size()) > std::max(nx, ny), "short row in input CSV");
        try {
            pts.emplace_back(std::stod(cells[nx]), std::stod(cells[ny]));
        } catch (const std::exception&) {
            throw ValidationError("non-numeric cell in input CSV");
        }
    }
    const auto f = empirics::rate_fit(pts);
    RunResult res;
    res.table.columns = {"slope", "intercept", "slope_std_error", "points"};
    res.table.add({fmt(f.slope), fmt(f.intercept), fmt(f.slope_std_error), str(static_cast<std::int64_t>(pts.size()))});
    for (std::size_t i = 0; i < pts.size(); ++i) {
        res.plot.push_back({pts[i].first, pts[i].second, 0.0, "data"});
        res.plot.push_back({pts[i].first, std::exp(f.intercept + f.slope * std::log(pts[i].first)), 0.0, "fit"});
    }
    res.summary = "slope " + fmt(f.slope) + " +- " + fmt(f.slope_std_error) + "\n";
    return res;
}

RunResult cmd_lattice_count(const Json& cfg, int threads) {
    const auto mode = get_or<std::string>(cfg, "mode", "norm_ball");
    const auto radii = parse_grid(need(cfg, "radii"));
    RunResult res;
    if (mode == "ellipsoid") {
        const Matrix q = parse_matrix(need(cfg, "q"));
        const int nshift = get_or<int>(cfg, "shifts", 64);
        require(nshift >= 1, "shifts must be positive");
        const auto rows = lattice::ellipsoid_sweep(q, radii, lattice::halton_points(static_cast<int>(q.rows()), nshift), threads);
        res.table.columns = {"r", "sup_relative_error", "worst_shift"};
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rows) {
            std::ostringstream shift;
            for (int i = 0; i < r.worst_shift.size(); ++i) shift << (i ? " " : "") << fmt(r.worst_shift(i));
            res.table.add({fmt(r.r), fmt(r.sup_relative_error), shift.str()});
            res.plot.push_back({r.r, r.sup_relative_error, 0.0, "sup_relative_error"});
            pts.emplace_back(r.r, r.sup_relative_error);
        }
        fit_summary(res, pts, "ellipsoid error");
        return res;
    }
    require(mode == "norm_ball", "mode must be 'norm_ball' or 'ellipsoid'");
    const auto lat = parse_basis(need(cfg, "basis"));
    const auto norm = cfg.contains("norm") ? parse_norm(cfg.at("norm")) : lattice::NormSpec::euclidean();
    const auto minima = lattice::successive_minima(lat, norm);
    res.table.columns = {"b", "count", "j", "davenport_ratio"};
    for (double b : radii) {
        const auto count = lattice::count_norm_ball(lat, norm, b);
        int j = 0;
        double prod = 1.0;
        while (j < lat.rank() && minima.values(j) <= b) prod *= b / minima.values(j++);
        res.table.add({fmt(b), str(count), std::to_string(j), fmt(static_cast<double>(count) / prod)});
        res.plot.push_back({b, static_cast<double>(count), 0.0, "count"});
    }
    res.summary = "minima method " + std::string(lattice::to_string(minima.method)) + "\n";
    return res;
}

RunResult cmd_minima(const Json& cfg, int) {
    const auto lat = parse_basis(need(cfg, "basis"));
    const auto norm = cfg.contains("norm") ? parse_norm(cfg.at("norm")) : lattice::NormSpec::euclidean();
    const auto method = get_or<std::string>(cfg, "method", "exact");
    require(method == "exact" || method == "lll", "method must be 'exact' or 'lll'");
    const auto m = lattice::successive_minima(lat, norm,
                                              method == "exact" ? lattice::MinimaMethod::exact_enumeration
                                                                : lattice::MinimaMethod::lll_approx);
    const bool euclid = norm.kind() == lattice::NormSpec::Kind::euclidean;
    const auto alpha = lattice::alpha_characteristic(lat, m.method, euclid && get_or<bool>(cfg, "exact_sup", false));
    RunResult res;
    res.table.columns = {"j", "minimum", "alpha_j", "method", "witness"};
    for (int j = 0; j < lat.rank(); ++j) {
        std::ostringstream w;
        for (int i = 0; i < m.witnesses[j].size(); ++i) w << (i ? " " : "") << fmt(m.witnesses[j](i));
        res.table.add({std::to_string(j + 1), fmt(m.values(j)), euclid ? fmt(alpha.alpha_l(j)) : "", lattice::to_string(m.method),
                       w.str()});
        res.plot.push_back({static_cast<double>(j + 1), m.values(j), 0.0, "minimum"});
    }
    res.summary = "det " + fmt(lat.det()) + (euclid ? ", alpha " + fmt(alpha.alpha) : "") +
                  (m.fell_back ? ", exact enumeration fell back to LLL" : "") + "\n";
    return res;
}

RunResult cmd_gm_probe(const Json& cfg, int threads) {
    const int dim = get_or<int>(cfg, "dim", 10);
    const auto base = cfg.contains("basis") ? parse_basis(cfg.at("basis")) : lattice::Lattice::integer(dim);
    const double beta = get_or<double>(cfg, "beta", 0.5);
    const int grid = get_or<int>(cfg, "grid", 4096);
    const std::vector<double> hs = cfg.contains("h") ? parse_grid(cfg.at("h")) : std::vector<double>{2.0, 4.0, 8.0};
    RunResult res;
    res.table.columns = {"a", "h_norm", "integral", "alpha_base", "ratio", "min_integrand"};
    std::vector<std::pair<double, double>> pts;
    for (double a : hs) {
        const auto p = lattice::gm_integral_probe(lattice::FlowMatrices::dbar(a), base, beta, grid, threads);
        res.table.add({fmt(a), fmt(p.h_norm), fmt(p.integral), fmt(p.alpha_base), fmt(p.ratio), fmt(p.min_integrand)});
        res.plot.push_back({p.h_norm, p.integral, 0.0, "integral"});
        pts.emplace_back(p.h_norm, p.integral);
    }
    fit_summary(res, pts, "theta-integral growth");
    return res;
}

RunResult cmd_theta_check(const Json& cfg, int) {
    const double tol = cfg.at("tol").get<double>();
    const double max_diff = get_or<double>(cfg, "max_diff", 1e-9);
    std::vector<theta::ThetaParams> instances;
    if (cfg.contains("instances")) {
        for (const auto& inst : cfg.at("instances")) {
            const Json& z = need(inst, "z");
            const Complex zc = z.is_array() ? Complex(z.at(0).get<double>(), z.at(1).get<double>()) : Complex(z.get<double>(), 0.0);
            const Matrix s = parse_matrix(need(inst, "s"));
            instances.push_back(theta::ThetaParams::make(
                s, zc, inst.contains("a") ? parse_vector(inst.at("a")) : Vector::Zero(s.rows()),
                inst.contains("b") ? parse_vector(inst.at("b")) : Vector::Zero(s.rows())));
        }
    }
    const long count = cfg.at("random").get<long>();
    require(count >= 0, "random must be nonnegative");
    const RandomStream master(cfg.at("seed").get<std::uint64_t>());
    for (long i = 0; i < count; ++i) {
        RandomStream rng = master.child(StreamKind::random_instance, static_cast<std::uint64_t>(i));
        instances.push_back(random_theta_instance(rng, 1 + static_cast<int>(i % 3), i % 2 ? Complex(0.7, 0.4) : Complex(1.0, 0.0)));
    }
    RunResult res;
    res.table.columns = {"id", "dim", "z_re", "z_im", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "diff"};
    double worst = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto c = theta::poisson_check(instances[i], tol);
        res.table.add({str(static_cast<std::int64_t>(i)), std::to_string(instances[i].dim()), fmt(instances[i].z.real()),
                       fmt(instances[i].z.imag()), fmt(c.lhs.real()), fmt(c.lhs.imag()), fmt(c.rhs.real()), fmt(c.rhs.imag()),
                       fmt(c.diff)});
        res.plot.push_back({static_cast<double>(i), c.diff, c.lhs_tail + c.rhs_tail, "diff"});
        worst = std::max(worst, c.diff);
    }
    res.failed = worst > max_diff;
    res.summary = "instances " + str(static_cast<std::int64_t>(instances.size())) + ", max diff " + fmt(worst) + "\n";
    return res;
}

RunResult cmd_sym_check(const Json& cfg, int) {
    const long count = cfg.at("random").get<long>();
    require(count >= 0, "random must be nonnegative");
    std::vector<double> ts;
    if (cfg.contains("t")) {
        ts = parse_grid(cfg.at("t"));
    } else {
        for (int k = 0; k < 16; ++k) ts.push_back(0.1 + 0.35 * k);
    }
    const RandomStream master(cfg.at("seed").get<std::uint64_t>());
    RunResult res;
    res.table.columns = {"id", "t", "lhs", "rhs", "diff", "holds"};
    long violations = 0;
    for (long i = 0; i < count; ++i) {
        RandomStream rng = master.child(StreamKind::random_instance, static_cast<std::uint64_t>(i));
        const auto inst = random_sym_instance(rng);
        for (double t : ts) {
            const auto c = theta::symmetrization_check(t, inst.z, inst.u, inst.v, inst.w, inst.q, inst.l, inst.c);
            res.table.add({str(i), fmt(t), fmt(c.lhs), fmt(c.rhs), fmt(c.rhs - c.lhs), c.holds ? "1" : "0"});
            res.plot.push_back({t, c.rhs - c.lhs, 0.0, "instance " + str(i)});
            violations += c.holds ? 0 : 1;
        }
    }
    res.failed = violations > 0;
    res.summary = "cases " + str(count * static_cast<long>(ts.size())) + ", violations " + str(violations) + "\n";
    return res;
}

RunResult cmd_suite(const Json& cfg, int threads) {
    acceptance::SuiteOptions opts;
    opts.seed = cfg.at("seed").get<std::uint64_t>();
    opts.threads = threads;
    opts.reduced = get_or<bool>(cfg, "reduced", false);
    const auto results = acceptance::run_suite(need(cfg, "name").get<std::string>(), opts);
    RunResult res;
    res.table = acceptance::summary_table(results);
    for (const auto& r : results) {
        res.plot.push_back({static_cast<double>(r.id), r.metric, 0.0, r.name});
        res.summary += (r.pass ? "PASS " : (r.exploratory ? "WARN " : "FAIL ")) + std::to_string(r.id) + " " + r.name + ": " +
                       r.detail + "\n";
    }
    res.failed = !acceptance::suite_passed(results);
    return res;
}

std::string plot_csv(const std::vector<PlotPoint>& pts) {
    std::string out = "series,x,y,err\n";
    for (const auto& p : pts) out += p.series + "," + fmt(p.x) + "," + fmt(p.y) + "," + fmt(p.err) + "\n";
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + path.string() + "'");
    f << content;
}

}  // namespace

std::string Table::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
        out += "\n";
    }
    return out;
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"gauss-cdf", "edgeworth",     "deltan", "conc",        "rate-fit", "lattice-count",
                                                   "minima",    "gm-probe",      "theta-check", "sym-check", "suite"};
    return names;
}

std::string fmt(double v) {
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Json load_config(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot open config '" + path + "'");
    try {
        Json cfg = Json::parse(in);
        require(cfg.is_object(), "config must be a JSON object");
        return cfg;
    } catch (const Json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
}

Json resolve_config(const std::string& command, Json config, const RunOptions& opts) {
    if (config.is_null()) config = Json::object();
    require(config.is_object(), "config must be a JSON object");
    require(std::find(subcommands().begin(), subcommands().end(), command) != subcommands().end(),
            "unknown subcommand '" + command + "'");
    if (opts.seed) config["seed"] = *opts.seed;
    if (!config.contains("seed")) config["seed"] = 1;
    require(config.at("seed").is_number_unsigned() || (config.at("seed").is_number_integer() && config.at("seed").get<long long>() >= 0),
            "seed must be a nonnegative integer");
    if (opts.tol) config["tol"] = *opts.tol;
    if (!config.contains("tol")) config["tol"] = command == "theta-check" ? 1e-13 : 1e-6;
    require(config.at("tol").is_number() && config.at("tol").get<double>() > 0.0, "tol must be positive");
    if (opts.random) config["random"] = *opts.random;
    if (!config.contains("random")) {
        if (command == "theta-check") config["random"] = config.contains("instances") ? 0 : 50;
        if (command == "sym-check") config["random"] = 200;
    }
    if (!opts.input.empty()) config["input"] = opts.input;
    return config;
}

std::string output_header(const std::string& command, const Json& resolved) {
    const std::string dump = resolved.dump();
    std::ostringstream h;
    h << "# qfclt " << kVersion << "\n";
    h << "# command: " << command << "\n";
    h << "# config_hash: fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(dump) << std::dec << "\n";
    h << "# seed: " << resolved.at("seed").get<std::uint64_t>() << "\n";
    h << "# config: " << dump << "\n";
    return h.str();
}

RunResult execute(const std::string& command, const Json& cfg, int threads) {
    try {
        if (command == "gauss-cdf") return cmd_gauss_cdf(cfg, threads);
        if (command == "edgeworth") return cmd_edgeworth(cfg, threads);
        if (command == "deltan") return cmd_deltan(cfg, threads);
        if (command == "conc") return cmd_conc(cfg, threads);
        if (command == "rate-fit") return cmd_rate_fit(cfg, threads);
        if (command == "lattice-count") return cmd_lattice_count(cfg, threads);
        if (command == "minima") return cmd_minima(cfg, threads);
        if (command == "gm-probe") return cmd_gm_probe(cfg, threads);
        if (command == "theta-check") return cmd_theta_check(cfg, threads);
        if (command == "sym-check") return cmd_sym_check(cfg, threads);
        if (command == "suite") return cmd_suite(cfg, threads);
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    throw ValidationError("unknown subcommand '" + command + "'");
}

int run(const std::string& command, const Json& config, const RunOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const Json resolved = resolve_config(command, config, opts);
        const RunResult res = execute(command, resolved, opts.threads);
        const std::string header = output_header(command, resolved);
        std::string stem = command;
        if (command == "suite") stem += "_" + resolved.at("name").get<std::string>();
        const std::filesystem::path dir(opts.out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw ValidationError("cannot create output directory '" + opts.out_dir + "'");
        write_file(dir / (stem + ".csv"), header + res.table.to_csv());
        write_file(dir / (stem + ".plot.csv"), header + plot_csv(res.plot));
        out << res.summary << "wrote " << (dir / (stem + ".csv")).string() << "\n";
        return res.failed ? 1 : 0;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const BudgetError& e) {
        err << "budget error: " << e.what() << " (best bound " << fmt(e.best_bound()) << ")\n";
        return 3;
    }
}

Matrix parse_matrix(const Json& spec, int dim_hint) {
    if (spec.is_string()) {
        require(spec.get<std::string>() == "identity", "matrix string must be 'identity'");
        require(dim_hint > 0, "'identity' needs a known dimension");
        return Matrix::Identity(dim_hint, dim_hint);
    }
    if (spec.is_object()) {
        if (spec.contains("identity")) {
            const int d = spec.at("identity").get<int>();
            require(d >= 1, "identity dimension must be positive");
            return Matrix::Identity(d, d);
        }
        if (spec.contains("diagonal")) return parse_vector(spec.at("diagonal")).asDiagonal();
        if (spec.contains("eigenvalues"))
            return rotated_diagonal(parse_vector(spec.at("eigenvalues")), get_or<std::uint64_t>(spec, "rotation_seed", 1));
        if (spec.contains("rows")) return parse_matrix(spec.at("rows"), dim_hint);
        throw ValidationError("matrix object needs 'identity', 'diagonal', 'eigenvalues' or 'rows'");
    }
    require(spec.is_array() && !spec.empty(), "matrix must be a nonempty list of rows");
    const std::size_t rows = spec.size(), cols = spec.at(0).size();
    require(cols > 0, "matrix rows must be nonempty");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        require(spec.at(i).is_array() && spec.at(i).size() == cols, "matrix rows must have equal length");
        for (std::size_t j = 0; j < cols; ++j) {
            require(spec.at(i).at(j).is_number(), "matrix entries must be numbers");
            m(i, j) = spec.at(i).at(j).get<double>();
        }
    }
    return m;
}

Vector parse_vector(const Json& spec) {
    require(spec.is_array() && !spec.empty(), "vector must be a nonempty list of numbers");
    Vector v(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        require(spec.at(i).is_number(), "vector entries must be numbers");
        v(i) = spec.at(i).get<double>();
    }
    return v;
}

std::vector<double> parse_grid(const Json& spec) {
    if (spec.is_number()) return {spec.get<double>()};
    if (spec.is_array()) {
        const Vector v = parse_vector(spec);
        return {v.data(), v.data() + v.size()};
    }
    require(spec.is_object(), "grid must be a number, a list or {from, to, count}");
    if (spec.contains("doubling")) {
        const double from = need(spec, "from").get<double>();
        const int count = spec.at("doubling").get<int>();
        require(count >= 1 && from > 0.0, "doubling grid needs from > 0 and count >= 1");
        std::vector<double> out;
        for (int i = 0; i < count; ++i) out.push_back(from * std::ldexp(1.0, i));
        return out;
    }
    const double from = need(spec, "from").get<double>(), to = need(spec, "to").get<double>();
    const int count = need(spec, "count").get<int>();
    require(count >= 1, "grid count must be positive");
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(count == 1 ? from : from + (to - from) * i / (count - 1));
    return out;
}

model::SourceDistribution parse_distribution(const Json& spec) {
    if (spec.is_object() && spec.contains("file")) return parse_distribution(load_config(spec.at("file").get<std::string>()));
    const std::string kind = need(spec, "kind").get<std::string>();
    auto coordinate = [](const Json& c) {
        model::CoordinateLaw law;
        const Vector v = parse_vector(need(c, "values")), p = parse_vector(need(c, "probs"));
        require(v.size() == p.size(), "coordinate values and probs differ in length");
        law.values.assign(v.data(), v.data() + v.size());
        law.probs.assign(p.data(), p.data() + p.size());
        return law;
    };
    if (kind == "coordinate_product") {
        std::vector<model::CoordinateLaw> coords;
        if (spec.contains("coordinates")) {
            for (const auto& c : spec.at("coordinates")) coords.push_back(coordinate(c));
        } else {
            const int d = need(spec, "dimension").get<int>();
            require(d >= 1, "dimension must be positive");
            coords.assign(d, coordinate(need(spec, "coordinate")));
        }
        if (spec.contains("dimension")) require(static_cast<int>(coords.size()) == spec.at("dimension").get<int>(), "dimension mismatch");
        return model::SourceDistribution::coordinate_product(coords);
    }
    if (kind == "finite_discrete") {
        const Json& atoms = need(spec, "atoms");
        require(atoms.is_array() && !atoms.empty(), "atoms must be a nonempty list");
        std::vector<Vector> xs;
        for (const auto& a : atoms) xs.push_back(parse_vector(a));
        const Vector p = parse_vector(need(spec, "probs"));
        if (spec.contains("dimension")) require(xs.front().size() == spec.at("dimension").get<int>(), "dimension mismatch");
        return model::SourceDistribution::finite_discrete(xs, {p.data(), p.data() + p.size()});
    }
    if (kind == "gaussian") {
        const int d = get_or<int>(spec, "dimension", 0);
        return model::SourceDistribution::gaussian(parse_matrix(need(spec, "covariance"), d));
    }
    throw ValidationError("unknown distribution kind '" + kind + "'");
}

lattice::NormSpec parse_norm(const Json& spec) {
    const std::string kind = spec.is_string() ? spec.get<std::string>() : need(spec, "kind").get<std::string>();
    if (kind == "euclidean") return lattice::NormSpec::euclidean();
    if (kind == "sup") return lattice::NormSpec::sup();
    if (kind == "weighted_sup") return lattice::NormSpec::weighted_sup(need(spec, "sigma1_sq").get<double>(), parse_matrix(need(spec, "v")));
    if (kind == "quadratic") return lattice::NormSpec::quadratic(parse_matrix(need(spec, "a")));
    throw ValidationError("unknown norm kind '" + kind + "'");
}

lattice::Lattice parse_basis(const Json& spec) { return lattice::Lattice::make(parse_matrix(spec).transpose()); }

theta::ThetaParams random_theta_instance(RandomStream& rng, int s, Complex z) {
    Matrix g(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) g(i, j) = rng.normal();
    Matrix form = g * g.transpose() / s + 0.3 * Matrix::Identity(s, s);
    form = 0.5 * (form + form.transpose());
    Vector a(s), b(s);
    for (int i = 0; i < s; ++i) a(i) = rng.uniform();
    for (int i = 0; i < s; ++i) b(i) = rng.uniform();
    return theta::ThetaParams::make(form, z, a, b);
}

SymInstance random_sym_instance(RandomStream& rng) {
    const int d = 2;
    auto law = [&](int atoms) {
        std::vector<Vector> xs;
        std::vector<double> ps;
        double total = 0.0;
        for (int i = 0; i < atoms; ++i) {
            Vector x(d);
            for (int j = 0; j < d; ++j) x(j) = rng.uniform(-2.0, 2.0);
            xs.push_back(x);
            ps.push_back(rng.uniform(0.1, 1.0));
            total += ps.back();
        }
        for (double& p : ps) p /= total;
        return model::DiscreteLaw::make(xs, ps);
    };
    SymInstance inst;
    inst.z = law(2 + static_cast<int>(rng.integer(0, 1)));
    inst.u = law(2 + static_cast<int>(rng.integer(0, 1)));
    inst.v = law(2 + static_cast<int>(rng.integer(0, 1)));
    inst.w = law(2 + static_cast<int>(rng.integer(0, 1)));
    inst.q = Matrix(d, d);
    inst.q(0, 0) = rng.normal();
    inst.q(0, 1) = inst.q(1, 0) = rng.normal();
    inst.q(1, 1) = rng.normal();
    inst.l = Vector(d);
    for (int j = 0; j < d; ++j) inst.l(j) = rng.uniform(-1.0, 1.0);
    inst.c = rng.uniform(-1.0, 1.0);
    return inst;
}

Matrix rotated_diagonal(const Vector& eigenvalues, std::uint64_t seed) {
    const long d = eigenvalues.size();
    RandomStream rng(seed);
    Matrix g(d, d);
    for (long i = 0; i < d; ++i)
        for (long j = 0; j < d; ++j) g(i, j) = rng.normal();
    const Matrix o = Eigen::HouseholderQR<Matrix>(g).householderQ();
    const Matrix m = o * eigenvalues.asDiagonal() * o.transpose();
    return 0.5 * (m + m.transpose());
}

}  // namespace qfclt::runner
