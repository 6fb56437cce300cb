#include "spiked/mc_harness.hpp"

#include "spiked/cumulants.hpp"
#include "spiked/spike_theory.hpp"
#include "spiked/stats.hpp"
#include "spiked/symmetric_topk.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace spiked {

namespace {

constexpr double kGuard = 1e-8;
constexpr const char* kIdentityLabel = "schur_identities";

bool guard_ok(double t, double mu1) { return t - mu1 > kGuard * t; }

double rel_err(double value, double reference) { return std::abs(value / reference - 1.0); }

Check make_check(const std::string& name, double value, double bound, const std::string& relation) {
    bool pass = false;
    if (relation == "<=")
        pass = value <= bound;
    else if (relation == ">=")
        pass = value >= bound;
    else
        pass = value > bound;
    return {name, value, bound, relation, pass};
}

std::vector<double> column(const std::vector<Vec>& rows, Index j) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r(j));
    return out;
}

Mat stack_rows(const std::vector<Vec>& rows, Index d) {
    Mat out(static_cast<Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i].transpose();
    return out;
}

std::string one_based(Index i) { return std::to_string(i + 1); }

// The block for this target, falling back to defaults; the exclusion bound is always present.
Tolerances resolve_tolerances(const ExperimentConfig& config, const Target& target) {
    Tolerances tol;
    const auto it = config.tolerances.find(target.resolved_label());
    if (it != config.tolerances.end())
        tol = it->second;
    else
        tol = default_tolerances(target, config.model, config.reps);
    tol.emplace("max_exclusion_rate", 0.01);
    return tol;
}

struct Context {
    PopulationAxes axes;
    CumulantTensor kappa;
    double gamma_n = 0.0;
    double root_n = 0.0;

    explicit Context(const ExperimentConfig& config)
        : axes(population_axes(config.model)),
          kappa(exact_tensor(config.model.signal_dist, axes.P, axes.ells)),
          gamma_n(config.model.gamma_n()),
          root_n(std::sqrt(static_cast<double>(config.model.n))) {}

    TheoryPrediction predict_at(const ExperimentConfig& config, Index nu, double gamma) const {
        return predict(SpikeSpectrum(config.model.ells, gamma), nu, gamma, kappa, axes.P);
    }
};

void finish(TargetReport& rep, const Tolerances& tol, std::int64_t reps) {
    rep.tolerances = tol;
    const double rate = reps > 0 ? static_cast<double>(rep.rejected) / static_cast<double>(reps) : 0.0;
    rep.metrics["exclusion_rate"] = rate;
    rep.checks.push_back(make_check("max_exclusion_rate", rate, tol.at("max_exclusion_rate"), "<="));
    rep.checks.push_back(make_check("min_used", static_cast<double>(rep.used), 2.0, ">="));
    rep.pass = std::all_of(rep.checks.begin(), rep.checks.end(), [](const Check& c) { return c.pass; });
}

std::vector<std::size_t> quadform_slots(const ExperimentConfig& config) {
    std::vector<std::size_t> slots(config.targets.size(), 0);
    std::size_t next = 0;
    for (std::size_t i = 0; i < config.targets.size(); ++i)
        if (config.targets[i].kind == Target::Kind::quadform)
            slots[i] = next++;
    return slots;
}

bool needs_spectrum(const ExperimentConfig& config) {
    return std::any_of(config.targets.begin(), config.targets.end(),
                       [](const Target& t) { return t.kind != Target::Kind::quadform; });
}

Vec vech(const Mat& R) {
    const auto pairs = upper_pairs(R.rows());
    Vec out(static_cast<Index>(pairs.size()));
    for (std::size_t l = 0; l < pairs.size(); ++l) out(static_cast<Index>(l)) = R(pairs[l][0], pairs[l][1]);
    return out;
}

ReplicateRecord reduce(const ExperimentConfig& config, const PopulationAxes& axes, const Mat& sigma,
                       std::int64_t replicate) {
    const SpikedModelSpec& spec = config.model;
    const Dataset data = generate(spec, axes, replicate);
    const double gamma_n = spec.gamma_n();
    const double n = static_cast<double>(spec.n);
    const double root_n = std::sqrt(n);

    ReplicateRecord rec;
    rec.replicate = replicate;

    std::optional<NoiseBlocks> blocks;
    if (needs_spectrum(config)) {
        NoiseBlocks nb;
        const SampleSpectrum s = decompose(data, axes, EigenRoute::automatic, &nb);
        rec.has_spectrum = true;
        rec.ell_hats = s.ell_hats;
        rec.cos2 = s.cosines2;
        rec.u_norm2 = s.u_vecs.colwise().squaredNorm().transpose();
        rec.PtA = axes.P.transpose() * s.a_vecs;
        rec.mu1 = s.mu1;
        for (Index nu = 0; nu < spec.m; ++nu) {
            if (!is_supercritical(spec.ells[static_cast<std::size_t>(nu)], gamma_n) ||
                !guard_ok(s.ell_hats(nu), s.mu1))
                continue;
            rec.identity_nu.push_back(nu);
            rec.identities.push_back(check_schur_identities(nb, s, nu));
        }
        blocks = std::move(nb);
    }

    for (const Target& t : config.targets) {
        if (t.kind != Target::Kind::quadform)
            continue;
        Mat R;
        switch (t.b.kind) {
        case QuadformB::Kind::identity: {
            Mat S11 = Mat::Zero(spec.m, spec.m);
            S11.selfadjointView<Eigen::Lower>().rankUpdate(data.X1, 1.0 / n);
            R = root_n * (Mat(S11.selfadjointView<Eigen::Lower>()) - sigma);
            break;
        }
        case QuadformB::Kind::onatski_counterexample: {
            // B_n = sqrt(n) e e^T with e = n^{-1/2} 1, so tr B_n = sqrt(n)
            const Vec s = data.X1.rowwise().sum() / root_n;
            R = s * s.transpose() - sigma;
            break;
        }
        case QuadformB::Kind::resolvent: {
            if (!blocks)
                blocks = NoiseBlocks::from(data);
            if (!rec.has_spectrum && spec.p > 0)
                rec.mu1 = symmetric_eigenvalues(blocks->gram)(0);
            const double rho = spike_forward(spec.ells[static_cast<std::size_t>(t.b.nu)], gamma_n);
            if (!guard_ok(rho, rec.mu1)) {
                rec.quadforms.emplace_back();
                continue;
            }
            const SchurResolvent sr(*blocks, rho, rec.mu1);
            R = root_n * (sr.K() - sr.trace_B() / n * sigma);
            break;
        }
        }
        rec.quadforms.push_back(vech(R));
    }
    return rec;
}

TargetReport single(ExperimentConfig config, const Target& target) {
    const std::string label = target.resolved_label();
    config.targets = {target};
    std::map<std::string, Tolerances> tol;
    if (const auto it = config.tolerances.find(label); it != config.tolerances.end())
        tol.insert(*it);
    config.tolerances = std::move(tol);
    McReport rep = run_experiment(config);
    for (auto& s : rep.sections)
        if (s.label == label)
            return std::move(s);
    throw ConfigError("single-target run produced no section for " + label);
}

} // namespace

std::string to_string(QuadformB::Kind kind) {
    switch (kind) {
    case QuadformB::Kind::identity: return "identity";
    case QuadformB::Kind::resolvent: return "resolvent";
    case QuadformB::Kind::onatski_counterexample: return "onatski_counterexample";
    }
    return "?";
}

std::string to_string(Target::Kind kind) {
    switch (kind) {
    case Target::Kind::eval_clt: return "eval_clt";
    case Target::Kind::evec_clt: return "evec_clt";
    case Target::Kind::cosine: return "cosine";
    case Target::Kind::quadform: return "quadform";
    case Target::Kind::centering_shift: return "centering_shift";
    }
    return "?";
}

std::string Target::default_label() const {
    if (kind == Kind::quadform) {
        std::string s = "quadform:" + to_string(b.kind);
        if (b.kind == QuadformB::Kind::resolvent)
            s += ":" + one_based(b.nu);
        return s;
    }
    return to_string(kind) + ":" + one_based(nu);
}

const std::vector<std::string>& tolerance_keys(Target::Kind kind) {
    static const std::vector<std::string> eval{"mean_abs", "var_min", "var_max", "ks_max", "raw_var_rel",
                                               "max_exclusion_rate"};
    static const std::vector<std::string> evec{"var_rel", "frob_rel", "mean_z_max", "max_exclusion_rate"};
    static const std::vector<std::string> cos{"abs", "max_mean", "min_mean", "max_exclusion_rate"};
    static const std::vector<std::string> quad{"var_rel", "frob_rel", "ks_max", "ks_min", "max_exclusion_rate"};
    static const std::vector<std::string> shift{"shift_rel", "centered_mean_abs", "max_exclusion_rate"};
    switch (kind) {
    case Target::Kind::eval_clt: return eval;
    case Target::Kind::evec_clt: return evec;
    case Target::Kind::cosine: return cos;
    case Target::Kind::quadform: return quad;
    case Target::Kind::centering_shift: return shift;
    }
    return eval;
}

Tolerances default_tolerances(const Target& target, const SpikedModelSpec& model, std::int64_t reps) {
    const double R = static_cast<double>(std::max<std::int64_t>(reps, 1));
    const double mean_tol = 3.0 / std::sqrt(R) + 0.05;
    const double var_tol = 4.0 * std::sqrt(2.0 / R);
    const double ks_tol = 1.63 / std::sqrt(R) + 0.02;
    switch (target.kind) {
    case Target::Kind::eval_clt:
        return {{"mean_abs", mean_tol},
                {"var_min", 1.0 - var_tol - 0.05},
                {"var_max", 1.0 + var_tol + 0.05},
                {"ks_max", ks_tol},
                {"max_exclusion_rate", 0.01}};
    case Target::Kind::evec_clt:
        return {{"var_rel", var_tol + 0.1}, {"mean_z_max", 4.5}, {"max_exclusion_rate", 0.01}};
    case Target::Kind::cosine: {
        const double ell = model.ells.at(static_cast<std::size_t>(target.nu));
        if (is_supercritical(ell, model.gamma_n()))
            return {{"abs", 0.03}, {"max_exclusion_rate", 0.01}};
        return {{"max_mean", 0.05}, {"max_exclusion_rate", 0.01}};
    }
    case Target::Kind::quadform:
        if (target.b.kind == QuadformB::Kind::onatski_counterexample)
            return {{"ks_min", 0.05}, {"max_exclusion_rate", 0.01}};
        return {{"var_rel", var_tol + 0.05}, {"max_exclusion_rate", 0.01}};
    case Target::Kind::centering_shift:
        return {{"shift_rel", 0.3}, {"centered_mean_abs", mean_tol}, {"max_exclusion_rate", 0.01}};
    }
    return {};
}

void ExperimentConfig::validate() const {
    try {
        model.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (reps < 1)
        throw ConfigError("reps must be positive");
    if (workers < 1)
        throw ConfigError("workers must be positive");
    const double gamma_n = model.gamma_n();
    std::set<std::string> labels;
    for (const Target& t : targets) {
        const std::string label = t.resolved_label();
        if (label == kIdentityLabel)
            throw ConfigError("target label '" + label + "' is reserved");
        if (!labels.insert(label).second)
            throw ConfigError("duplicate target label '" + label + "'");
        if (t.is_clt() && reps < 100)
            throw ConfigError(label + ": CLT targets need reps >= 100");
        const Index nu = t.kind == Target::Kind::quadform ? t.b.nu : t.nu;
        const bool uses_nu = t.kind != Target::Kind::quadform || t.b.kind == QuadformB::Kind::resolvent;
        if (uses_nu && (nu < 0 || nu >= model.m))
            throw ConfigError(label + ": spike index out of range");
        const double ell = uses_nu ? model.ells[static_cast<std::size_t>(nu)] : 0.0;
        switch (t.kind) {
        case Target::Kind::evec_clt:
            if (model.m < 2)
                throw ConfigError(label + ": eigenvector CLT needs m >= 2");
            [[fallthrough]];
        case Target::Kind::eval_clt:
            if (!is_supercritical(ell, gamma_n))
                throw ConfigError(label + ": spike is not supercritical at gamma_n");
            break;
        case Target::Kind::cosine: break;
        case Target::Kind::quadform:
            if (t.b.kind == QuadformB::Kind::resolvent && !is_supercritical(ell, gamma_n))
                throw ConfigError(label + ": resolvent point needs a supercritical spike");
            break;
        case Target::Kind::centering_shift:
            if (!(t.gamma_limit > 0.0))
                throw ConfigError(label + ": gamma must be positive");
            if (t.gamma_limit == gamma_n)
                throw ConfigError(label + ": gamma equals p / n, there is no shift to detect");
            if (!is_supercritical(ell, gamma_n) || !is_supercritical(ell, t.gamma_limit))
                throw ConfigError(label + ": spike must be supercritical at gamma and gamma_n");
            break;
        }
    }
    for (const auto& [label, tol] : tolerances) {
        const auto it = std::find_if(targets.begin(), targets.end(),
                                     [&](const Target& t) { return t.resolved_label() == label; });
        if (it == targets.end())
            throw ConfigError("tolerances given for unknown target '" + label + "'");
        const auto& keys = tolerance_keys(it->kind);
        for (const auto& [key, value] : tol) {
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                throw ConfigError(label + ": unknown tolerance key '" + key + "'");
            if (!std::isfinite(value))
                throw ConfigError(label + ": tolerance '" + key + "' is not finite");
        }
    }
}

std::vector<ReplicateRecord> run_replicates(const ExperimentConfig& config) {
    config.validate();
    const PopulationAxes axes = population_axes(config.model);
    const Mat sigma = axes.sigma();
    const std::int64_t reps = config.reps;
    std::vector<ReplicateRecord> records(static_cast<std::size_t>(reps));

    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::int64_t r = next.fetch_add(1);
            if (r >= reps)
                return;
            try {
                records[static_cast<std::size_t>(r)] = reduce(config, axes, sigma, r);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(reps);
                return;
            }
        }
    };
    const int workers = static_cast<int>(std::min<std::int64_t>(config.workers, reps));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure)
        std::rethrow_exception(failure);
    return records;
}

TargetReport eval_clt_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                              const Target& target) {
    const Context ctx(config);
    const Tolerances tol = resolve_tolerances(config, target);
    const TheoryPrediction pred = ctx.predict_at(config, target.nu, ctx.gamma_n);
    const double sigma = std::sqrt(pred.sigma2);

    TargetReport rep;
    rep.label = target.resolved_label();
    rep.type = to_string(target.kind);
    std::vector<double> T, raw;
    for (const auto& rec : records) {
        const double ell_hat = rec.ell_hats(target.nu);
        if (!guard_ok(ell_hat, rec.mu1)) {
            ++rep.rejected;
            rep.values.push_back({rec.replicate, "excluded", 1.0});
            continue;
        }
        raw.push_back(ctx.root_n * (ell_hat - pred.rho));
        T.push_back(raw.back() / sigma);
        rep.values.push_back({rec.replicate, "raw", raw.back()});
        rep.values.push_back({rec.replicate, "T", T.back()});
    }
    rep.used = static_cast<std::int64_t>(T.size());

    rep.theory = {{"ell", pred.ell},         {"gamma_n", pred.gamma}, {"rho_n", pred.rho},
                  {"rho_dot", pred.rho_dot}, {"sigma2", pred.sigma2}, {"quartic_contraction", pred.quartic_contraction}};
    if (rep.used >= 2) {
        const double m = mean(T);
        const double v = sample_variance(T);
        const double ks = ks_normal(T);
        const double raw_var = sample_variance(raw);
        rep.metrics = {{"mean", m},          {"var", v},
                       {"ks", ks},           {"raw_mean", mean(raw)},
                       {"raw_var", raw_var}, {"raw_var_rel_err", rel_err(raw_var, pred.sigma2)}};
        for (const auto& [key, bound] : tol) {
            if (key == "mean_abs")
                rep.checks.push_back(make_check(key, std::abs(m), bound, "<="));
            else if (key == "var_min")
                rep.checks.push_back(make_check(key, v, bound, ">="));
            else if (key == "var_max")
                rep.checks.push_back(make_check(key, v, bound, "<="));
            else if (key == "ks_max")
                rep.checks.push_back(make_check(key, ks, bound, "<="));
            else if (key == "raw_var_rel")
                rep.checks.push_back(make_check(key, rel_err(raw_var, pred.sigma2), bound, "<="));
        }
    }
    finish(rep, tol, config.reps);
    return rep;
}

TargetReport evec_clt_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                              const Target& target) {
    const Context ctx(config);
    const Tolerances tol = resolve_tolerances(config, target);
    const TheoryPrediction pred = ctx.predict_at(config, target.nu, ctx.gamma_n);
    const Index m = config.model.m;
    const Index nu = target.nu;

    TargetReport rep;
    rep.label = target.resolved_label();
    rep.type = to_string(target.kind);
    std::vector<Vec> rows;
    for (const auto& rec : records) {
        if (!guard_ok(rec.ell_hats(nu), rec.mu1)) {
            ++rep.rejected;
            rep.values.push_back({rec.replicate, "excluded", 1.0});
            continue;
        }
        Vec y = rec.PtA.col(nu);
        y(nu) -= 1.0;
        y *= ctx.root_n;
        for (Index mu = 0; mu < m; ++mu) rep.values.push_back({rec.replicate, "y_" + one_based(mu), y(mu)});
        rows.push_back(std::move(y));
    }
    rep.used = static_cast<std::int64_t>(rows.size());
    rep.theory_cov = pred.evec_cov;
    for (Index mu = 0; mu < m; ++mu)
        if (mu != nu)
            rep.theory["var_" + one_based(mu)] = pred.evec_cov(mu, mu);

    if (rep.used >= 2) {
        const Mat Y = stack_rows(rows, m);
        rep.empirical_cov = sample_covariance(Y);
        const Vec means = Y.colwise().mean().transpose();
        double var_rel = 0.0, z_max = 0.0, diff2 = 0.0, ref2 = 0.0;
        for (Index mu = 0; mu < m; ++mu) {
            if (mu == nu)
                continue;
            const double ev = rep.empirical_cov(mu, mu);
            rep.metrics["var_" + one_based(mu)] = ev;
            rep.metrics["mean_" + one_based(mu)] = means(mu);
            var_rel = std::max(var_rel, rel_err(ev, pred.evec_cov(mu, mu)));
            z_max = std::max(z_max, std::abs(means(mu)) / std::sqrt(ev / static_cast<double>(rep.used)));
            for (Index k = 0; k < m; ++k) {
                if (k == nu)
                    continue;
                const double d = rep.empirical_cov(mu, k) - pred.evec_cov(mu, k);
                diff2 += d * d;
                ref2 += pred.evec_cov(mu, k) * pred.evec_cov(mu, k);
            }
        }
        const double frob = std::sqrt(diff2 / ref2);
        rep.metrics["nu_component_mean"] = means(nu);
        rep.metrics["var_rel_max"] = var_rel;
        rep.metrics["frob_rel"] = frob;
        rep.metrics["mean_z_max"] = z_max;
        for (const auto& [key, bound] : tol) {
            if (key == "var_rel")
                rep.checks.push_back(make_check(key, var_rel, bound, "<="));
            else if (key == "frob_rel")
                rep.checks.push_back(make_check(key, frob, bound, "<="));
            else if (key == "mean_z_max")
                rep.checks.push_back(make_check(key, z_max, bound, "<="));
        }
    }
    finish(rep, tol, config.reps);
    return rep;
}

TargetReport cosine_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                            const Target& target) {
    const Tolerances tol = resolve_tolerances(config, target);
    const double gamma_n = config.model.gamma_n();
    const double ell = config.model.ells[static_cast<std::size_t>(target.nu)];
    const bool super = is_supercritical(ell, gamma_n);
    const double limit = cosine_limit(ell, gamma_n);

    TargetReport rep;
    rep.label = target.resolved_label();
    rep.type = to_string(target.kind);
    std::vector<double> c;
    for (const auto& rec : records) {
        if (super && !guard_ok(rec.ell_hats(target.nu), rec.mu1)) {
            ++rep.rejected;
            rep.values.push_back({rec.replicate, "excluded", 1.0});
            continue;
        }
        c.push_back(rec.cos2(target.nu));
        rep.values.push_back({rec.replicate, "cos2", c.back()});
    }
    rep.used = static_cast<std::int64_t>(c.size());
    rep.theory = {{"ell", ell}, {"gamma_n", gamma_n}, {"cos2_limit", limit}, {"supercritical", super ? 1.0 : 0.0}};
    if (rep.used >= 2) {
        const double m = mean(c);
        rep.metrics = {{"mean", m}, {"sd", std::sqrt(sample_variance(c))}, {"abs_err", std::abs(m - limit)}};
        for (const auto& [key, bound] : tol) {
            if (key == "abs")
                rep.checks.push_back(make_check(key, std::abs(m - limit), bound, "<="));
            else if (key == "max_mean")
                rep.checks.push_back(make_check(key, m, bound, "<="));
            else if (key == "min_mean")
                rep.checks.push_back(make_check(key, m, bound, ">="));
        }
    }
    finish(rep, tol, config.reps);
    return rep;
}

TargetReport quadform_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                              const Target& target, std::size_t slot) {
    const Context ctx(config);
    const Tolerances tol = resolve_tolerances(config, target);
    const Index m = config.model.m;
    const auto pairs = upper_pairs(m);
    const Index L = static_cast<Index>(pairs.size());

    double theta = 1.0, omega = 1.0;
    if (target.b.kind == QuadformB::Kind::resolvent) {
        const auto rc = theta_omega_c(config.model.ells[static_cast<std::size_t>(target.b.nu)], ctx.gamma_n);
        theta = rc.theta;
        omega = rc.omega;
    } else if (target.b.kind == QuadformB::Kind::onatski_counterexample) {
        omega = 0.0;
    }
    const BilinearMoments moments = bilinear_JK_from_signal(ctx.axes.sigma(), ctx.kappa);
    const Mat D = quadform_covariance(moments, theta, omega);

    TargetReport rep;
    rep.label = target.resolved_label();
    rep.type = to_string(target.kind);
    rep.theory_cov = D;
    rep.theory["theta"] = theta;
    rep.theory["omega"] = omega;

    auto entry_name = [&](Index l) {
        return one_based(pairs[static_cast<std::size_t>(l)][0]) + "_" + one_based(pairs[static_cast<std::size_t>(l)][1]);
    };
    for (Index l = 0; l < L; ++l) rep.theory["var_" + entry_name(l)] = D(l, l);

    std::vector<Vec> rows;
    for (const auto& rec : records) {
        const Vec& q = rec.quadforms.at(slot);
        if (q.size() == 0) {
            ++rep.rejected;
            rep.values.push_back({rec.replicate, "excluded", 1.0});
            continue;
        }
        for (Index l = 0; l < L; ++l) rep.values.push_back({rec.replicate, "R_" + entry_name(l), q(l)});
        rows.push_back(q);
    }
    rep.used = static_cast<std::int64_t>(rows.size());

    if (rep.used >= 2) {
        const Mat Y = stack_rows(rows, L);
        rep.empirical_cov = sample_covariance(Y);
        const double dmax = D.diagonal().cwiseAbs().maxCoeff();
        double var_rel = 0.0;
        for (Index l = 0; l < L; ++l) {
            rep.metrics["var_" + entry_name(l)] = rep.empirical_cov(l, l);
            if (D(l, l) > 1e-12 * dmax)
                var_rel = std::max(var_rel, rel_err(rep.empirical_cov(l, l), D(l, l)));
        }
        const double frob = (rep.empirical_cov - D).norm() / D.norm();
        const std::vector<double> first = column(rows, 0);
        const double ks = D(0, 0) > 0.0 ? ks_normal(first, D(0, 0)) : 1.0;
        rep.metrics["var_rel_max"] = var_rel;
        rep.metrics["frob_rel"] = frob;
        rep.metrics["ks"] = ks;
        rep.metrics["mean_" + entry_name(0)] = mean(first);
        for (const auto& [key, bound] : tol) {
            if (key == "var_rel")
                rep.checks.push_back(make_check(key, var_rel, bound, "<="));
            else if (key == "frob_rel")
                rep.checks.push_back(make_check(key, frob, bound, "<="));
            else if (key == "ks_max")
                rep.checks.push_back(make_check(key, ks, bound, "<="));
            else if (key == "ks_min")
                rep.checks.push_back(make_check(key, ks, bound, ">"));
        }
    }
    finish(rep, tol, config.reps);
    return rep;
}

TargetReport centering_shift_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                                     const Target& target) {
    const Context ctx(config);
    const Tolerances tol = resolve_tolerances(config, target);
    const double ell = config.model.ells[static_cast<std::size_t>(target.nu)];
    const double gamma = target.gamma_limit;
    const double rho_limit = spike_forward(ell, gamma);
    const TheoryPrediction pred = ctx.predict_at(config, target.nu, ctx.gamma_n);
    const double sigma = std::sqrt(pred.sigma2);
    const double a = ctx.root_n * (ctx.gamma_n - gamma);
    const double shift = a * ell / (ell - 1.0);

    TargetReport rep;
    rep.label = target.resolved_label();
    rep.type = to_string(target.kind);
    std::vector<double> raw, T;
    for (const auto& rec : records) {
        const double ell_hat = rec.ell_hats(target.nu);
        if (!guard_ok(ell_hat, rec.mu1)) {
            ++rep.rejected;
            rep.values.push_back({rec.replicate, "excluded", 1.0});
            continue;
        }
        raw.push_back(ctx.root_n * (ell_hat - rho_limit));
        T.push_back(ctx.root_n * (ell_hat - pred.rho) / sigma);
        rep.values.push_back({rec.replicate, "shift_raw", raw.back()});
        rep.values.push_back({rec.replicate, "T", T.back()});
    }
    rep.used = static_cast<std::int64_t>(T.size());
    rep.theory = {{"ell", ell},         {"gamma", gamma},         {"gamma_n", ctx.gamma_n}, {"a", a},
                  {"shift", shift},     {"rho_limit", rho_limit}, {"rho_n", pred.rho},      {"sigma2", pred.sigma2}};
    if (rep.used >= 2) {
        const double shift_mean = mean(raw);
        const double centered = mean(T);
        rep.metrics = {{"shift_mean", shift_mean},
                       {"shift_rel_err", rel_err(shift_mean, shift)},
                       {"centered_mean", centered},
                       {"centered_var", sample_variance(T)}};
        for (const auto& [key, bound] : tol) {
            if (key == "shift_rel")
                rep.checks.push_back(make_check(key, rel_err(shift_mean, shift), bound, "<="));
            else if (key == "centered_mean_abs")
                rep.checks.push_back(make_check(key, std::abs(centered), bound, "<="));
        }
    }
    finish(rep, tol, config.reps);
    return rep;
}

TargetReport identities_section(const std::vector<ReplicateRecord>& records) {
    TargetReport rep;
    rep.label = kIdentityLabel;
    rep.type = "identities";
    std::int64_t det_bad = 0, q_bad = 0;
    double det_ratio = 0.0, q_rel = 0.0;
    for (const auto& rec : records) {
        for (std::size_t i = 0; i < rec.identities.size(); ++i) {
            const auto& c = rec.identities[i];
            ++rep.used;
            det_bad += c.det_ok ? 0 : 1;
            q_bad += c.q_ok ? 0 : 1;
            const double ratio = c.scale > 0.0 ? c.det_abs / c.scale : c.det_abs;
            det_ratio = std::max(det_ratio, ratio);
            q_rel = std::max(q_rel, c.q_rel);
            const std::string nu = one_based(rec.identity_nu[i]);
            rep.values.push_back({rec.replicate, "det_ratio_" + nu, ratio});
            rep.values.push_back({rec.replicate, "q_rel_" + nu, c.q_rel});
        }
    }
    rep.metrics = {{"checked", static_cast<double>(rep.used)},
                   {"det_violations", static_cast<double>(det_bad)},
                   {"q_violations", static_cast<double>(q_bad)},
                   {"max_det_ratio", det_ratio},
                   {"max_q_rel", q_rel}};
    rep.tolerances = {{"det_rel", 1e-8}, {"q_rel", 1e-8}};
    rep.checks = {make_check("det_violations", static_cast<double>(det_bad), 0.0, "<="),
                  make_check("q_violations", static_cast<double>(q_bad), 0.0, "<=")};
    rep.pass = det_bad == 0 && q_bad == 0;
    return rep;
}

TargetReport run_eval_clt(const ExperimentConfig& config, Index nu) { return single(config, Target::eval_clt(nu)); }

TargetReport run_evec_clt(const ExperimentConfig& config, Index nu) { return single(config, Target::evec_clt(nu)); }

TargetReport run_cosine(const ExperimentConfig& config, Index nu) { return single(config, Target::cosine(nu)); }

TargetReport run_quadform_clt(const ExperimentConfig& config, QuadformB b) {
    return single(config, Target::quadform(b));
}

TargetReport run_centering_shift(const ExperimentConfig& config, Index nu, double gamma) {
    return single(config, Target::centering_shift(nu, gamma));
}

McReport aggregate(std::vector<TargetReport> sections) {
    std::set<std::string> labels;
    for (const auto& s : sections)
        if (!labels.insert(s.label).second)
            throw ConfigError("duplicate section label '" + s.label + "'");
    McReport out;
    out.pass = std::all_of(sections.begin(), sections.end(), [](const TargetReport& s) { return s.pass; });
    out.sections = std::move(sections);
    return out;
}

McReport run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<ReplicateRecord> records = run_replicates(config);
    const auto slots = quadform_slots(config);

    std::vector<TargetReport> sections;
    for (std::size_t i = 0; i < config.targets.size(); ++i) {
        const Target& t = config.targets[i];
        switch (t.kind) {
        case Target::Kind::eval_clt: sections.push_back(eval_clt_section(config, records, t)); break;
        case Target::Kind::evec_clt: sections.push_back(evec_clt_section(config, records, t)); break;
        case Target::Kind::cosine: sections.push_back(cosine_section(config, records, t)); break;
        case Target::Kind::quadform: sections.push_back(quadform_section(config, records, t, slots[i])); break;
        case Target::Kind::centering_shift: sections.push_back(centering_shift_section(config, records, t)); break;
        }
    }
    if (needs_spectrum(config))
        sections.push_back(identities_section(records));

    McReport report = aggregate(std::move(sections));
    report.workers = config.workers;
    report.config = config;
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace spiked
