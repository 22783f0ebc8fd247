#pragma once

// Declarative experiment runner: config parsing, the experiment catalog,
// validation, execution and report/CSV output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "estlab/prob.hpp"

namespace estlab {

enum class ParamType { Int, Real, Bool, RealList, Choice };

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::Real;
    std::string default_value;
    std::string description;
    std::optional<double> min;   // inclusive unless min_exclusive
    bool min_exclusive = false;
    std::optional<double> max;   // inclusive
    std::vector<std::string> choices;
};

struct ExperimentInfo {
    std::string id;
    std::string description;
    std::string anchor;    // where the claim comes from, in words
    std::string operation; // module operation exercised
    std::vector<ParamSpec> params;
};

const std::vector<ExperimentInfo>& experiment_catalog();
const ExperimentInfo* find_experiment(std::string_view id);
nlohmann::ordered_json catalog_json();

struct ExperimentConfig {
    std::string id;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::map<std::string, std::string> overrides; // raw text, checked by validate
    std::vector<std::string> unknown_keys;        // keys outside [params] that parse could not place
    unsigned jobs = 1;                            // never part of the report
};

// Line-oriented "key = value" text with [experiment] and [params] sections.
// '#' and ';' start comments. Throws InvalidConfig on malformed lines.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Accepts "name" or "params.name" for parameters and "seed" / "id".
void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value);

enum class Severity { Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string path; // e.g. "params.sigma_x"
    std::string message;
};

std::vector<Diagnostic> validate(const ExperimentConfig& config);
bool has_errors(const std::vector<Diagnostic>& diagnostics);
nlohmann::ordered_json to_json(const std::vector<Diagnostic>& diagnostics);

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

// Header row, comma separated, doubles with 17 significant digits, LF endings.
void write_csv(std::ostream& os, const Table& table);

struct ExperimentOutput {
    nlohmann::ordered_json report;
    std::vector<Table> tables;
    std::vector<Table> plots;
    bool all_pass = true;
};

// Throws UnknownExperiment / InvalidOverride when validation fails.
ExperimentOutput run_experiment(const ExperimentConfig& config);

// Writes report.json, tables/*.csv and plotdata/*.csv into `dir`. Files are
// staged in a sibling directory and moved into place at the end, so a failure
// leaves no partial output behind.
void write_outputs(const ExperimentOutput& output, const std::filesystem::path& dir);

// Two classes over X = {0..5}, Y on half-integer levels; the channel maps
// x=1 and x=4 onto the shared level y=1.5.
PipelineChain naive_tree_chain();

} // namespace estlab
