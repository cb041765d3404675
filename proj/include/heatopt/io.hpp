#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatopt/design.hpp"
#include "heatopt/estimator.hpp"
#include "heatopt/optimizer.hpp"

namespace heatopt {

struct OutputConfig {
    std::string directory = "run";
    int snapshot_every = 0;  // write a design image every k iterations, 0 = off
    int image_scale = 1;     // pixels per ground cell

    bool operator==(const OutputConfig&) const = default;
};

/// Full run description. Defaults reproduce the standard problem: unit
/// square, left-edge sink, f = 1e-2, gamma = 1e-3, V = 0.4, p = 4, Q1
/// elements on the model grid, C = 1.
struct RunConfig {
    ProblemSetup problem;
    OptimizerConfig optimizer;
    OutputConfig output;

    bool operator==(const RunConfig&) const = default;
};

/// Parses and validates a config document. Unknown keys and value-range
/// violations are rejected with the offending key path in the message.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_file(const std::filesystem::path& path);

nlohmann::json config_to_json(const RunConfig& config);

/// Plain-text design format: a "N gamma volume" header line, then N rows
/// of N values, top row of the domain first. Values round-trip exactly.
void save_design(const DesignField& field, const std::filesystem::path& path);
DesignField load_design(const std::filesystem::path& path);

/// Grayscale PGM, one scale x scale block per ground cell, row 0 at the
/// top of the domain; pixel = round-half-up of 255 (k - gamma)/(1 - gamma).
void write_design_image(const DesignField& field, const std::filesystem::path& path,
                        int scale = 1, bool ascii = false);

/// Per-element eta^2 as a PGM heatmap (log-scaled to the max) and CSV.
void write_error_heatmap(const ErrorBreakdown& errors, int n, const std::filesystem::path& path);
void write_error_csv(const ErrorBreakdown& errors, int n, const std::filesystem::path& path);

/// History CSV with the fixed column schema
/// iter,phi_h,e_apost,phi_c,volume,qm,change,cg_iters.
extern const char* const kHistoryCsvHeader;
void write_history_csv(const OptimizationHistory& history, const std::filesystem::path& path);
std::string history_csv_row(const IterationRecord& record);

nlohmann::json summary_json(const RunConfig& config, const OptimizationHistory& history);

}  // namespace heatopt
