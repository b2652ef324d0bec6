#include "qfclt/runner.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <string>

namespace {

struct Flags {
    std::string config;
    std::uint64_t seed = 0;
    std::string out = ".";
    int threads = 0;
    double tol = 0.0;
    long random = 0;
    std::string input;
    std::string suite;
};

}  // namespace

int main(int argc, char** argv) {
    using namespace qfclt;
    CLI::App app{"Quadratic-form CLT experiments: limit laws, rates, lattices and theta series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    const std::map<std::string, std::string> help = {
        {"gauss-cdf", "CDF of Q[G - a] with its error budget"},
        {"edgeworth", "Edgeworth correction in both forms"},
        {"deltan", "Delta_N against the Gaussian limit over an N grid"},
        {"conc", "concentration function over an N grid"},
        {"rate-fit", "log-log slope of a CSV of (N, value)"},
        {"lattice-count", "lattice points in norm balls or shifted ellipsoids"},
        {"minima", "successive minima and alpha-characteristics"},
        {"gm-probe", "theta-integral of alpha over the rotation circle"},
        {"theta-check", "Poisson summation on theta series"},
        {"sym-check", "symmetrization inequality by exact enumeration"},
        {"suite", "acceptance bundles: identities, rates, lattice, all"},
    };

    Flags f;
    std::map<std::string, CLI::App*> subs;
    std::map<std::string, CLI::Option*> seed_opt, tol_opt, random_opt;
    for (const auto& name : runner::subcommands()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
        seed_opt[name] = sub->add_option("--seed", f.seed, "master seed");
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--threads", f.threads, "worker threads (default: QFCLT_THREADS or 1)")->check(CLI::NonNegativeNumber);
        tol_opt[name] = sub->add_option("--tol", f.tol, "numerical tolerance")->check(CLI::PositiveNumber);
        if (name == "theta-check" || name == "sym-check")
            random_opt[name] = sub->add_option("--random", f.random, "number of random instances")->check(CLI::NonNegativeNumber);
        if (name == "rate-fit") sub->add_option("--input", f.input, "CSV with N and estimate columns");
        if (name == "suite") sub->add_option("name", f.suite, "identities, rates, lattice or all")->required();
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (const auto& [name, sub] : subs) {
        if (!sub->parsed()) continue;
        runner::RunOptions opts;
        opts.out_dir = f.out;
        opts.threads = f.threads;
        opts.input = f.input;
        if (seed_opt[name]->count()) opts.seed = f.seed;
        if (tol_opt[name]->count()) opts.tol = f.tol;
        if (random_opt.count(name) && random_opt[name]->count()) opts.random = f.random;
        runner::Json config = runner::Json::object();
        try {
            if (!f.config.empty()) config = runner::load_config(f.config);
        } catch (const ValidationError& e) {
            std::cerr << "validation error: " << e.what() << "\n";
            return 2;
        }
        if (name == "suite") config["name"] = f.suite;
        return runner::run(name, config, opts, std::cout, std::cerr);
    }
    return 2;
}
