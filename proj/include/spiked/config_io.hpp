#pragma once

// JSON experiment configs and the report.json / replicates.csv artifacts.

#include "spiked/mc_harness.hpp"
#include "spiked/model_gen.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace spiked {

using json = nlohmann::ordered_json;

SpikedModelSpec model_from_json(const json& j);
json to_json(const SpikedModelSpec& model);

/// Parses {"model", "reps", "targets", "tolerances", "workers"}; throws ConfigError on anything malformed.
ExperimentConfig experiment_from_json(const json& j);
json to_json(const ExperimentConfig& config);

/// Reads and parses a config file; I/O failures throw ConfigError naming the path.
json read_json_file(const std::filesystem::path& path);

/// `provenance` is embedded verbatim (overrides, command line).
json to_json(const McReport& report, const json& provenance = json::object());

void write_report_json(const std::filesystem::path& path, const McReport& report,
                       const json& provenance = json::object());

/// Comment header lines (each starting with '#') naming the schema, library version and resolved config.
std::string csv_comment_header(const std::string& schema, const json& config, const json& provenance);

/// One row per replicate per target: replicate,target,statistic,value.
void write_replicates_csv(const std::filesystem::path& path, const McReport& report,
                          const json& provenance = json::object());

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

} // namespace spiked
