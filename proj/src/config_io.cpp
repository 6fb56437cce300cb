#include "spiked/config_io.hpp"

#include <charconv>
#include <fstream>
#include <set>

namespace spiked {

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object())
        throw ConfigError(where + ": expected an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError(where + ": unknown field '" + item.key() + "'");
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key))
        throw ConfigError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

Index one_based_index(const json& j, const std::string& where) {
    const auto nu = get_field<std::int64_t>(j, "nu", where);
    if (nu < 1)
        throw ConfigError(where + ": nu is one based and must be >= 1");
    return static_cast<Index>(nu - 1);
}

Rotation rotation_from_json(const json& j, std::uint64_t model_seed) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "identity")
            return Rotation::identity();
        if (s == "random_orthogonal")
            return Rotation::random_orthogonal(model_seed);
        throw ConfigError("model.rotation: unknown rotation '" + s + "'");
    }
    require_keys(j, {"type", "seed"}, "model.rotation");
    const auto type = get_field<std::string>(j, "type", "model.rotation");
    if (type == "identity")
        return Rotation::identity();
    if (type != "random_orthogonal")
        throw ConfigError("model.rotation: unknown rotation '" + type + "'");
    const std::uint64_t seed = j.contains("seed") ? get_field<std::uint64_t>(j, "seed", "model.rotation") : model_seed;
    return Rotation::random_orthogonal(seed);
}

SignalDistribution signal_from_json(const json& j) {
    const std::string where = "model.signal_dist";
    std::string type;
    if (j.is_string()) {
        type = j.get<std::string>();
    } else {
        require_keys(j, {"type", "law", "w2"}, where);
        type = get_field<std::string>(j, "type", where);
    }
    if (type == "gaussian")
        return SignalDistribution::gaussian();
    if (type == "iid_factors") {
        if (!j.is_object())
            throw ConfigError(where + ": iid_factors needs a 'law'");
        try {
            return SignalDistribution::iid_factors(factor_law_from_string(get_field<std::string>(j, "law", where)));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    if (type == "scale_mixture") {
        if (!j.is_object())
            throw ConfigError(where + ": scale_mixture needs 'w2'");
        return SignalDistribution::scale_mixture(get_field<std::vector<double>>(j, "w2", where));
    }
    throw ConfigError(where + ": unknown distribution '" + type + "'");
}

json signal_to_json(const SignalDistribution& d) {
    switch (d.kind) {
    case SignalDistribution::Kind::gaussian: return "gaussian";
    case SignalDistribution::Kind::iid_factors: return json{{"type", "iid_factors"}, {"law", to_string(d.law)}};
    case SignalDistribution::Kind::scale_mixture: return json{{"type", "scale_mixture"}, {"w2", d.w2_support}};
    }
    return nullptr;
}

Target target_from_json(const json& j, std::size_t i) {
    const std::string where = "targets[" + std::to_string(i) + "]";
    require_keys(j, {"type", "nu", "B", "gamma", "label"}, where);
    const auto type = get_field<std::string>(j, "type", where);
    Target t;
    if (type == "eval_clt")
        t = Target::eval_clt(one_based_index(j, where));
    else if (type == "evec_clt")
        t = Target::evec_clt(one_based_index(j, where));
    else if (type == "cosine")
        t = Target::cosine(one_based_index(j, where));
    else if (type == "centering_shift")
        t = Target::centering_shift(one_based_index(j, where), get_field<double>(j, "gamma", where));
    else if (type == "quadform") {
        if (!j.contains("B"))
            throw ConfigError(where + ": quadform needs 'B'");
        const json& b = j.at("B");
        QuadformB qb;
        std::string kind;
        if (b.is_string()) {
            kind = b.get<std::string>();
        } else {
            require_keys(b, {"type", "nu"}, where + ".B");
            kind = get_field<std::string>(b, "type", where + ".B");
        }
        if (kind == "identity")
            qb.kind = QuadformB::Kind::identity;
        else if (kind == "onatski_counterexample")
            qb.kind = QuadformB::Kind::onatski_counterexample;
        else if (kind == "resolvent") {
            if (!b.is_object())
                throw ConfigError(where + ".B: resolvent needs 'nu'");
            qb.kind = QuadformB::Kind::resolvent;
            qb.nu = one_based_index(b, where + ".B");
        } else
            throw ConfigError(where + ".B: unknown B spec '" + kind + "'");
        t = Target::quadform(qb);
    } else
        throw ConfigError(where + ": unknown target type '" + type + "'");
    if (j.contains("label"))
        t.label = get_field<std::string>(j, "label", where);
    return t;
}

json target_to_json(const Target& t) {
    json j{{"type", to_string(t.kind)}};
    switch (t.kind) {
    case Target::Kind::quadform:
        if (t.b.kind == QuadformB::Kind::resolvent)
            j["B"] = json{{"type", "resolvent"}, {"nu", t.b.nu + 1}};
        else
            j["B"] = to_string(t.b.kind);
        break;
    case Target::Kind::centering_shift:
        j["nu"] = t.nu + 1;
        j["gamma"] = t.gamma_limit;
        break;
    default: j["nu"] = t.nu + 1; break;
    }
    j["label"] = t.resolved_label();
    return j;
}

json matrix_to_json(const Mat& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

} // namespace

SpikedModelSpec model_from_json(const json& j) {
    const std::string where = "model";
    require_keys(j, {"m", "p", "n", "ells", "rotation", "signal_dist", "noise_dist", "seed"}, where);
    SpikedModelSpec s;
    s.ells = get_field<std::vector<double>>(j, "ells", where);
    s.m = j.contains("m") ? get_field<Index>(j, "m", where) : static_cast<Index>(s.ells.size());
    s.p = get_field<Index>(j, "p", where);
    s.n = get_field<Index>(j, "n", where);
    s.seed = j.contains("seed") ? get_field<std::uint64_t>(j, "seed", where) : 0;
    s.rotation = j.contains("rotation") ? rotation_from_json(j.at("rotation"), s.seed) : Rotation::identity();
    s.signal_dist = j.contains("signal_dist") ? signal_from_json(j.at("signal_dist")) : SignalDistribution::gaussian();
    if (j.contains("noise_dist")) {
        try {
            s.noise_dist = noise_distribution_from_string(get_field<std::string>(j, "noise_dist", where));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("model.noise_dist: ") + e.what());
        }
    }
    s.validate();
    return s;
}

json to_json(const SpikedModelSpec& s) {
    json rotation = s.rotation.kind == Rotation::Kind::identity
                        ? json("identity")
                        : json{{"type", "random_orthogonal"}, {"seed", s.rotation.seed}};
    return json{{"m", s.m},
                {"p", s.p},
                {"n", s.n},
                {"ells", s.ells},
                {"rotation", rotation},
                {"signal_dist", signal_to_json(s.signal_dist)},
                {"noise_dist", to_string(s.noise_dist)},
                {"seed", s.seed}};
}

ExperimentConfig experiment_from_json(const json& j) {
    require_keys(j, {"model", "reps", "targets", "tolerances", "workers"}, "config");
    ExperimentConfig c;
    if (!j.contains("model"))
        throw ConfigError("config: missing field 'model'");
    c.model = model_from_json(j.at("model"));
    c.reps = get_field<std::int64_t>(j, "reps", "config");
    c.workers = j.contains("workers") ? get_field<int>(j, "workers", "config") : 1;
    if (j.contains("targets")) {
        const json& ts = j.at("targets");
        if (!ts.is_array())
            throw ConfigError("config.targets: expected an array");
        for (std::size_t i = 0; i < ts.size(); ++i) c.targets.push_back(target_from_json(ts[i], i));
    }
    if (j.contains("tolerances")) {
        const json& tol = j.at("tolerances");
        if (!tol.is_object())
            throw ConfigError("config.tolerances: expected an object keyed by target label");
        for (const auto& item : tol.items()) {
            if (!item.value().is_object())
                throw ConfigError("config.tolerances." + item.key() + ": expected an object");
            Tolerances block;
            for (const auto& kv : item.value().items()) {
                if (!kv.value().is_number())
                    throw ConfigError("config.tolerances." + item.key() + "." + kv.key() + ": expected a number");
                block[kv.key()] = kv.value().get<double>();
            }
            c.tolerances[item.key()] = std::move(block);
        }
    }
    c.validate();
    return c;
}

json to_json(const ExperimentConfig& c) {
    json targets = json::array();
    for (const auto& t : c.targets) targets.push_back(target_to_json(t));
    json tol = json::object();
    for (const auto& [label, block] : c.tolerances) {
        json b = json::object();
        for (const auto& [k, v] : block) b[k] = v;
        tol[label] = std::move(b);
    }
    return json{{"model", to_json(c.model)},
                {"reps", c.reps},
                {"targets", std::move(targets)},
                {"tolerances", std::move(tol)},
                {"workers", c.workers}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

json to_json(const McReport& report, const json& provenance) {
    json sections = json::array();
    for (const auto& s : report.sections) {
        json checks = json::array();
        for (const auto& c : s.checks)
            checks.push_back(
                {{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"bound", c.bound}, {"pass", c.pass}});
        json sec{{"label", s.label},
                 {"type", s.type},
                 {"pass", s.pass},
                 {"used", s.used},
                 {"rejected", s.rejected},
                 {"metrics", s.metrics},
                 {"theory", s.theory},
                 {"tolerances", s.tolerances},
                 {"checks", std::move(checks)}};
        if (s.empirical_cov.size() > 0)
            sec["empirical_cov"] = matrix_to_json(s.empirical_cov);
        if (s.theory_cov.size() > 0)
            sec["theory_cov"] = matrix_to_json(s.theory_cov);
        sections.push_back(std::move(sec));
    }
    json out{{"version", kVersion}, {"pass", report.pass}, {"sections", std::move(sections)}};
    out["config"] = report.config ? to_json(*report.config) : json(nullptr);
    out["provenance"] = provenance;
    out["runtime"] = {{"seconds", report.runtime_seconds}, {"workers", report.workers}};
    return out;
}

void write_report_json(const std::filesystem::path& path, const McReport& report, const json& provenance) {
    auto out = open_output(path);
    out << to_json(report, provenance).dump(2) << '\n';
    if (!out)
        throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string csv_comment_header(const std::string& schema, const json& config, const json& provenance) {
    std::string s = "# " + schema + " spiked " + kVersion + "\n";
    s += "# config " + config.dump() + "\n";
    if (!provenance.empty())
        s += "# provenance " + provenance.dump() + "\n";
    return s;
}

void write_replicates_csv(const std::filesystem::path& path, const McReport& report, const json& provenance) {
    auto out = open_output(path);
    const json config = report.config ? to_json(*report.config) : json(nullptr);
    out << csv_comment_header("replicates-v1", config, provenance);
    out << "replicate,target,statistic,value\n";
    for (const auto& s : report.sections)
        for (const auto& v : s.values)
            out << v.replicate << ',' << s.label << ',' << v.statistic << ',' << format_double(v.value) << '\n';
    if (!out)
        throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

} // namespace spiked
