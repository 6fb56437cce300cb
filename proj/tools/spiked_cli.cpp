// spiked: theory tables, simulations, Monte Carlo verification and the
// perturbation fuzzer from the command line.
//
// Exit codes: 0 pass, 1 verification failure, 2 usage or config error.

#include "spiked/config_io.hpp"
#include "spiked/cumulants.hpp"
#include "spiked/mc_harness.hpp"
#include "spiked/mp_law.hpp"
#include "spiked/perturbation.hpp"
#include "spiked/spike_theory.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace spiked;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct Options {
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "both";
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> reps;
    std::optional<int> workers;

    std::vector<double> ells;
    std::optional<double> gamma;

    std::int64_t trials = 10000;
    Index dim = 5;
    std::optional<Index> dim_max;
    double gap_ratio = 0.25;
    std::uint64_t fuzz_seed = 1;
};

json overrides_json(const Options& o) {
    json j = json::object();
    if (o.seed)
        j["seed"] = *o.seed;
    if (o.reps)
        j["reps"] = *o.reps;
    if (o.workers)
        j["workers"] = *o.workers;
    return j;
}

json provenance(const std::string& command, const Options& o) {
    return json{{"command", command}, {"config_path", o.config_path}, {"overrides", overrides_json(o)}};
}

ExperimentConfig load_config(const Options& o) {
    ExperimentConfig c = experiment_from_json(read_json_file(o.config_path));
    if (o.seed)
        c.model.seed = *o.seed;
    if (o.reps)
        c.reps = *o.reps;
    if (o.workers)
        c.workers = *o.workers;
    c.validate();
    return c;
}

fs::path prepare_out_dir(const Options& o) {
    const fs::path dir(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

std::string cell(double x) { return std::isfinite(x) ? format_double(x) : ""; }

int cmd_theory(const Options& o) {
    SpikedModelSpec model;
    double gamma = 0.0;
    json config = json::object();
    if (!o.config_path.empty()) {
        model = model_from_json(read_json_file(o.config_path).at("model"));
        gamma = model.gamma_n();
    }
    if (!o.ells.empty()) {
        model.ells = o.ells;
        model.m = static_cast<Index>(o.ells.size());
        model.p = 0;
        model.n = 1;
    }
    if (o.gamma)
        gamma = *o.gamma;
    if (model.ells.empty())
        throw CLI::ValidationError("theory", "no spikes given (use --ells or a config with model.ells)");
    if (!(gamma > 0.0))
        throw CLI::ValidationError("theory", "gamma must be positive (use --gamma or a config with p > 0)");
    for (std::size_t i = 1; i < model.ells.size(); ++i)
        if (!(model.ells[i] < model.ells[i - 1]))
            throw ConfigError("spikes must be strictly decreasing");

    const PopulationAxes axes = population_axes(model);
    const CumulantTensor kappa = exact_tensor(model.signal_dist, axes.P, axes.ells);
    const SpikeSpectrum spectrum(model.ells, gamma);
    const double edge = MpParams<double>(gamma).upper_edge();
    config = {{"ells", model.ells}, {"gamma", gamma}, {"signal_dist", to_json(model).at("signal_dist")}};

    std::ostringstream csv;
    csv << csv_comment_header("theory-v1", config, provenance("theory", o));
    csv << "nu,ell,gamma,supercritical,rho,rho_dot,sigma2,cos2_limit,theta,omega,c_rho,slutsky,"
           "quartic_contraction,evec_cov\n";
    json rows = json::array();
    for (Index nu = 0; nu < spectrum.m(); ++nu) {
        const double ell = model.ells[static_cast<std::size_t>(nu)];
        csv << nu + 1 << ',' << cell(ell) << ',' << cell(gamma) << ',';
        if (!is_supercritical(ell, gamma)) {
            // outlier absorbed at the bulk edge, eigenvector asymptotically orthogonal
            csv << "0," << cell(edge) << ",,,0,,,,,,\n";
            rows.push_back({{"nu", nu + 1}, {"ell", ell}, {"gamma", gamma}, {"supercritical", false},
                            {"rho", edge}, {"cos2_limit", 0.0}});
            continue;
        }
        const TheoryPrediction t = predict(spectrum, nu, gamma, kappa, axes.P);
        std::string cov;
        for (Index i = 0; i < t.evec_cov.rows(); ++i)
            for (Index k = 0; k < t.evec_cov.cols(); ++k) cov += (cov.empty() ? "" : ";") + cell(t.evec_cov(i, k));
        csv << "1," << cell(t.rho) << ',' << cell(t.rho_dot) << ',' << cell(t.sigma2) << ',' << cell(t.cos2_limit)
            << ',' << cell(t.theta) << ',' << cell(t.omega) << ',' << cell(t.c_rho) << ',' << cell(t.slutsky) << ','
            << cell(t.quartic_contraction) << ',' << cov << '\n';
        json evec = json::array();
        for (Index i = 0; i < t.evec_cov.rows(); ++i) {
            json row = json::array();
            for (Index k = 0; k < t.evec_cov.cols(); ++k) row.push_back(t.evec_cov(i, k));
            evec.push_back(row);
        }
        rows.push_back({{"nu", nu + 1},        {"ell", ell},           {"gamma", gamma},
                        {"supercritical", true}, {"rho", t.rho},        {"rho_dot", t.rho_dot},
                        {"sigma2", t.sigma2},  {"cos2_limit", t.cos2_limit}, {"theta", t.theta},
                        {"omega", t.omega},    {"c_rho", t.c_rho},     {"slutsky", t.slutsky},
                        {"quartic_contraction", t.quartic_contraction}, {"evec_cov", evec}});
    }
    const json doc = {{"version", kVersion}, {"config", config}, {"provenance", provenance("theory", o)},
                      {"rows", rows}};
    if (o.format == "json")
        std::cout << doc.dump(2) << '\n';
    else
        std::cout << csv.str();
    if (o.format != "json") {
        const fs::path path = prepare_out_dir(o) / "theory.csv";
        open_output(path) << csv.str();
    }
    if (o.format != "csv")
        open_output(prepare_out_dir(o) / "theory.json") << doc.dump(2) << '\n';
    return kExitPass;
}

int cmd_simulate(const Options& o) {
    ExperimentConfig c = load_config(o);
    c.targets = {Target::cosine(0)};
    c.tolerances.clear();
    const auto records = run_replicates(c);
    const fs::path path = prepare_out_dir(o) / "simulate.csv";
    auto out = open_output(path);
    out << csv_comment_header("simulate-v1", to_json(c), provenance("simulate", o));
    out << "replicate,nu,ell_hat,cos2,u_norm2,mu1\n";
    for (const auto& r : records)
        for (Index nu = 0; nu < r.ell_hats.size(); ++nu)
            out << r.replicate << ',' << nu + 1 << ',' << cell(r.ell_hats(nu)) << ',' << cell(r.cos2(nu)) << ','
                << cell(r.u_norm2(nu)) << ',' << cell(r.mu1) << '\n';
    if (!out)
        throw std::runtime_error("write failed for '" + path.string() + "'");
    std::cerr << "wrote " << records.size() << " replicates to " << path.string() << '\n';
    return kExitPass;
}

int cmd_verify(const Options& o) {
    const ExperimentConfig c = load_config(o);
    const McReport report = run_experiment(c);
    const json prov = provenance("verify", o);
    const fs::path dir = prepare_out_dir(o);
    if (o.format != "csv")
        write_report_json(dir / "report.json", report, prov);
    if (o.format != "json")
        write_replicates_csv(dir / "replicates.csv", report, prov);

    for (const auto& s : report.sections) {
        std::cerr << (s.pass ? "PASS " : "FAIL ") << s.label << " (used " << s.used << ", rejected " << s.rejected
                  << ")\n";
        if (!s.pass)
            for (const auto& ch : s.checks)
                if (!ch.pass)
                    std::cerr << "    " << ch.name << ": " << ch.value << " not " << ch.relation << ' ' << ch.bound
                              << '\n';
    }
    std::cerr << (report.pass ? "overall PASS" : "overall FAIL") << '\n';
    return report.pass ? kExitPass : kExitFail;
}

int cmd_perturb_check(const Options& o) {
    const Index dim_max = o.dim_max.value_or(o.dim);
    const auto s = fuzz_perturbation(o.trials, o.dim, dim_max, o.gap_ratio, o.fuzz_seed);
    const json j{{"version", kVersion},
                 {"trials", s.trials},
                 {"dim_min", o.dim},
                 {"dim_max", dim_max},
                 {"gap_ratio", o.gap_ratio},
                 {"seed", o.fuzz_seed},
                 {"applicable", s.applicable},
                 {"violations", s.violations},
                 {"max_constant", s.max_constant},
                 {"median_remainder", s.median_remainder},
                 {"median_remainder_half", s.median_remainder_half},
                 {"median_shrink", s.median_shrink}};
    std::cout << j.dump(2) << '\n';
    if (o.format != "csv") {
        const fs::path path = prepare_out_dir(o) / "perturb.json";
        open_output(path) << j.dump(2) << '\n';
    }
    return s.violations == 0 ? kExitPass : kExitFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiked covariance asymptotics: theory, simulation and Monte Carlo verification"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", o.out_dir, "Output directory (created if absent)");
        sub->add_option("--format", o.format, "Output files")->check(CLI::IsMember({"json", "csv", "both"}));
    };
    auto add_experiment = [&](CLI::App* sub) {
        sub->add_option("config", o.config_path, "Experiment config (JSON)")->required();
        sub->add_option("--seed", o.seed, "Override model.seed");
        sub->add_option("--reps", o.reps, "Override reps");
        sub->add_option("--workers", o.workers, "Override workers");
        add_common(sub);
    };

    auto* theory = app.add_subcommand("theory", "Closed-form predictions per spike");
    theory->add_option("config", o.config_path, "Config supplying model (gamma = p / n)");
    theory->add_option("--ells", o.ells, "Spikes, overriding the config")->delimiter(',');
    theory->add_option("--gamma", o.gamma, "Aspect ratio, overriding p / n");
    add_common(theory);

    auto* simulate = app.add_subcommand("simulate", "Per-replicate sample eigenvalues and cosines");
    add_experiment(simulate);

    auto* verify = app.add_subcommand("verify", "Run the Monte Carlo targets of a config");
    add_experiment(verify);

    auto* perturb = app.add_subcommand("perturb-check", "Fuzz the first-order eigenvector perturbation bound");
    perturb->add_option("--trials", o.trials, "Number of random (A, B) pairs")->check(CLI::NonNegativeNumber);
    perturb->add_option("--dim", o.dim, "Matrix dimension (minimum when --dim-max is given)")
        ->check(CLI::Range(Index{2}, Index{1000}));
    perturb->add_option("--dim-max", o.dim_max, "Largest dimension; dimensions cycle over [dim, dim-max]");
    perturb->add_option("--gap-ratio", o.gap_ratio, "||B|| as a multiple of the eigengap")
        ->check(CLI::NonNegativeNumber);
    perturb->add_option("--seed", o.fuzz_seed, "Fuzzer seed");
    add_common(perturb);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*theory)
            return cmd_theory(o);
        if (*simulate)
            return cmd_simulate(o);
        if (*verify)
            return cmd_verify(o);
        if (*perturb)
            return cmd_perturb_check(o);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
