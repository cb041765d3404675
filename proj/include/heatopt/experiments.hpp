#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatopt/design.hpp"
#include "heatopt/io.hpp"

namespace heatopt {

/// Fixed design evaluated on a family of nested computational grids.
struct RefinementRow {
    int n = 0;
    double phi = 0.0;
    double ratio = 0.0;  // phi / phi on the coarsest grid
    double e_apost = 0.0;
};

struct RefinementReport {
    std::vector<RefinementRow> rows;
    double qm = 0.0;
};

/// Solves with Q1 elements on each grid, the coarsest of which must be
/// the design's model grid and every size a multiple of it.
RefinementReport run_refinement_study(const DesignField& design, const BoundarySpec& boundary,
                                      const std::vector<int>& grid_sizes, double penal, double f,
                                      const SolverOptions& options = {});

/// One full optimization per correction value plus a fine-grid check of
/// the final design.
struct SweepRow {
    double correction = 0.0;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string error;
    double phi_coarse = 0.0;
    double e_coarse = 0.0;
    double phi_fine = 0.0;
    double e_fine = 0.0;
    double qm = 0.0;
    std::string design_file;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    int fine_n = 512;
};

SweepReport run_c_sweep(const std::vector<double>& corrections, const RunConfig& base,
                        const std::filesystem::path& outdir, int fine_n = 512,
                        bool parallel = false);

/// One optimization per model-grid size at a fixed correction parameter.
struct ModelRefineRow {
    int cells = 0;
    double phi = 0.0;
    double e_apost = 0.0;
    double qm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
    std::string error;
    std::string design_file;
};

struct ModelRefineReport {
    std::vector<ModelRefineRow> rows;
    double correction = 1.0;
};

/// Sizes must follow the 32·i family.
ModelRefineReport run_model_refinement(const std::vector<int>& cell_counts, double correction,
                                       const RunConfig& base, const std::filesystem::path& outdir);

void write_refinement_csv(const RefinementReport& report, const std::filesystem::path& path);
void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path);
void write_model_refine_csv(const ModelRefineReport& report, const std::filesystem::path& path);

nlohmann::json refinement_json(const RefinementReport& report);
nlohmann::json sweep_json(const SweepReport& report);
nlohmann::json model_refine_json(const ModelRefineReport& report);

}  // namespace heatopt
