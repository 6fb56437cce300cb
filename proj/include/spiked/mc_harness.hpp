#pragma once

// Monte Carlo experiments confronting the closed forms with simulation.
//
// A run generates `reps` independent replicates of one spiked model, reduces
// each to a small record, then builds one report section per target from the
// records in replicate order. Every pass/fail decision is a comparison
// against a tolerance stored in the section, so a report can be re-checked
// without rerunning anything.

#include "spiked/core.hpp"
#include "spiked/model_gen.hpp"
#include "spiked/spectra.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spiked {

using Tolerances = std::map<std::string, double>;

/// Weight matrix B_n of the quadratic-form experiment.
struct QuadformB {
    enum class Kind { identity, resolvent, onatski_counterexample };
    Kind kind = Kind::identity;
    Index nu = 0; // resolvent: evaluated at rho(ell_nu, gamma_n), zero based
};

std::string to_string(QuadformB::Kind kind);

struct Target {
    enum class Kind { eval_clt, evec_clt, cosine, quadform, centering_shift };
    Kind kind = Kind::eval_clt;
    Index nu = 0;              // zero based
    QuadformB b;               // quadform only
    double gamma_limit = 0.0;  // centering_shift: gamma the spike map is centered at
    std::string label;         // empty: default_label()

    static Target eval_clt(Index nu) { return {Kind::eval_clt, nu, {}, 0.0, {}}; }
    static Target evec_clt(Index nu) { return {Kind::evec_clt, nu, {}, 0.0, {}}; }
    static Target cosine(Index nu) { return {Kind::cosine, nu, {}, 0.0, {}}; }
    static Target quadform(QuadformB b) { return {Kind::quadform, 0, b, 0.0, {}}; }
    static Target centering_shift(Index nu, double gamma) { return {Kind::centering_shift, nu, {}, gamma, {}}; }

    /// "eval_clt:1", "quadform:resolvent:1", ... with one-based spike indices.
    std::string default_label() const;
    std::string resolved_label() const { return label.empty() ? default_label() : label; }
    bool is_clt() const { return kind != Kind::cosine; }
};

std::string to_string(Target::Kind kind);

struct ExperimentConfig {
    SpikedModelSpec model;
    std::int64_t reps = 0;
    std::vector<Target> targets;
    std::map<std::string, Tolerances> tolerances; // keyed by target label
    int workers = 1;

    /// Throws ConfigError on any inconsistency (including unknown tolerance keys).
    void validate() const;
};

/// Tolerances applied to a target when the config carries no block for it.
Tolerances default_tolerances(const Target& target, const SpikedModelSpec& model, std::int64_t reps);

/// Tolerance keys understood for a target kind.
const std::vector<std::string>& tolerance_keys(Target::Kind kind);

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    std::string relation; // "<=", ">=" or ">"
    bool pass = false;
};

/// One named per-replicate statistic, as written to replicates.csv.
struct ReplicateValue {
    std::int64_t replicate = 0;
    std::string statistic;
    double value = 0.0;
};

struct TargetReport {
    std::string label;
    std::string type;
    std::map<std::string, double> metrics; // empirical quantities
    std::map<std::string, double> theory;  // predictions
    Tolerances tolerances;                 // the bounds the checks used
    std::vector<Check> checks;
    std::int64_t used = 0;
    std::int64_t rejected = 0;             // resolvent-guard exclusions
    Mat empirical_cov;                     // evec_clt and quadform only
    Mat theory_cov;
    std::vector<ReplicateValue> values;
    bool pass = false;
};

struct McReport {
    std::vector<TargetReport> sections;
    bool pass = true;
    double runtime_seconds = 0.0;
    int workers = 1;
    std::optional<ExperimentConfig> config;
};

/// Everything a section needs from one replicate.
struct ReplicateRecord {
    std::int64_t replicate = 0;
    bool has_spectrum = false;
    Vec ell_hats;
    Vec cos2;
    Vec u_norm2;
    Mat PtA;            // column nu = P^T a_nu
    double mu1 = 0.0;
    std::vector<Index> identity_nu;             // spikes whose Schur identities were checked
    std::vector<SchurIdentityCheck> identities;
    std::vector<Vec> quadforms;                 // per quadform target, vech of R_n; empty when guarded out
};

/// Runs generate + reduce for every replicate on `config.workers` threads.
/// The result is ordered by replicate index and independent of the worker count.
std::vector<ReplicateRecord> run_replicates(const ExperimentConfig& config);

/// Section builders over precomputed records.
TargetReport eval_clt_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                              const Target& target);
TargetReport evec_clt_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                              const Target& target);
TargetReport cosine_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                            const Target& target);
TargetReport quadform_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                              const Target& target, std::size_t quadform_slot);
TargetReport centering_shift_section(const ExperimentConfig& config, const std::vector<ReplicateRecord>& records,
                                     const Target& target);
/// Zero-violation check of the Schur determinant and Q identities over all records.
TargetReport identities_section(const std::vector<ReplicateRecord>& records);

/// Single-target conveniences; each runs its own replicates.
TargetReport run_eval_clt(const ExperimentConfig& config, Index nu);
TargetReport run_evec_clt(const ExperimentConfig& config, Index nu);
TargetReport run_cosine(const ExperimentConfig& config, Index nu);
TargetReport run_quadform_clt(const ExperimentConfig& config, QuadformB b);
TargetReport run_centering_shift(const ExperimentConfig& config, Index nu, double gamma);

/// Deterministic merge; overall pass iff every section passes. Duplicate labels throw ConfigError.
McReport aggregate(std::vector<TargetReport> sections);

/// All targets of `config` from one set of replicates, plus the identity section when spectra were computed.
McReport run_experiment(const ExperimentConfig& config);

} // namespace spiked
