#include "heatopt/experiments.hpp"

#include <json.hpp>

#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "heatopt/estimator.hpp"
#include "heatopt/fem.hpp"
#include "heatopt/optimizer.hpp"

namespace heatopt {

using nlohmann::json;

RefinementReport run_refinement_study(const DesignField& design, const BoundarySpec& boundary,
                                      const std::vector<int>& grid_sizes, double penal, double f,
                                      const SolverOptions& options) {
    if (grid_sizes.empty()) throw std::invalid_argument("refinement study needs grid sizes");
    if (grid_sizes.front() != design.cells)
        throw std::invalid_argument("coarsest grid must coincide with the model grid");
    for (std::size_t i = 0; i < grid_sizes.size(); ++i) {
        if (grid_sizes[i] % design.cells != 0)
            throw std::invalid_argument("grid size " + std::to_string(grid_sizes[i]) +
                                        " is not nested in the model grid");
        if (i > 0 && grid_sizes[i] <= grid_sizes[i - 1])
            throw std::invalid_argument("grid sizes must be strictly increasing");
    }

    const StructuredGrid model_grid = build_grid(design.cells, boundary);
    RefinementReport report;
    report.qm = design.cells >= 2 ? qm_value(design) : 0.0;
    double phi0 = 0.0;
    for (int n : grid_sizes) {
        const StructuredGrid grid = n == design.cells ? model_grid : refine(model_grid, n / design.cells);
        const FemSpace space(grid, 1);
        const AssembledSystem system = assemble(design, penal, space, f);
        const FemSolution solution = solve(system, options);
        RefinementRow row;
        row.n = n;
        row.phi = compliance(solution);
        if (report.rows.empty()) phi0 = row.phi;
        row.ratio = phi0 != 0.0 ? row.phi / phi0 : 0.0;
        row.e_apost = estimate(design, penal, solution, f).total;
        report.rows.push_back(row);
    }
    return report;
}

namespace {

SweepRow sweep_one(double correction, const RunConfig& base, const std::filesystem::path& outdir,
                   int fine_n) {
    SweepRow row;
    row.correction = correction;
    try {
        OptimizerConfig cfg = base.optimizer;
        cfg.correction = correction;
        const OptimizeResult result = optimize(base.problem, cfg);
        if (result.history.aborted) {
            row.failed = true;
            row.error = result.history.error;
            return row;
        }
        const auto& last = result.history.records.back();
        row.iterations = last.iter;
        row.converged = result.history.converged;
        row.phi_coarse = last.phi_h;
        row.e_coarse = last.e_apost;
        row.qm = last.qm;

        std::ostringstream name;
        name << "design_c" << std::setprecision(12) << correction << ".txt";
        const std::filesystem::path design_path = outdir / name.str();
        save_design(result.design, design_path);
        write_design_image(result.design, design_path.parent_path() /
                                              (design_path.stem().string() + ".pgm"),
                           base.output.image_scale);
        row.design_file = design_path.filename().string();

        if (fine_n % base.problem.cells != 0)
            throw std::invalid_argument("fine grid is not nested in the model grid");
        const StructuredGrid model_grid = build_grid(base.problem.cells, base.problem.boundary);
        const StructuredGrid fine = refine(model_grid, fine_n / base.problem.cells);
        const FemSpace space(fine, 1);
        const AssembledSystem system = assemble(result.design, cfg.penal, space, base.problem.source);
        const FemSolution solution = solve(system, cfg.solver);
        row.phi_fine = compliance(solution);
        row.e_fine = estimate(result.design, cfg.penal, solution, base.problem.source).total;
    } catch (const std::exception& ex) {
        row.failed = true;
        row.error = ex.what();
    }
    return row;
}

}  // namespace

SweepReport run_c_sweep(const std::vector<double>& corrections, const RunConfig& base,
                        const std::filesystem::path& outdir, int fine_n, bool parallel) {
    for (double c : corrections)
        if (c < 0.0) throw std::invalid_argument("correction values must be nonnegative");
    std::filesystem::create_directories(outdir);

    SweepReport report;
    report.fine_n = fine_n;
    if (parallel) {
        std::vector<std::future<SweepRow>> futures;
        futures.reserve(corrections.size());
        for (double c : corrections)
            futures.push_back(std::async(std::launch::async, sweep_one, c, base, outdir, fine_n));
        for (auto& f : futures) report.rows.push_back(f.get());
    } else {
        for (double c : corrections) report.rows.push_back(sweep_one(c, base, outdir, fine_n));
    }
    return report;
}

ModelRefineReport run_model_refinement(const std::vector<int>& cell_counts, double correction,
                                       const RunConfig& base, const std::filesystem::path& outdir) {
    for (int cells : cell_counts)
        if (cells <= 0 || cells % 32 != 0)
            throw std::invalid_argument("model grid sizes must follow the 32*i family");
    std::filesystem::create_directories(outdir);

    ModelRefineReport report;
    report.correction = correction;
    for (int cells : cell_counts) {
        ModelRefineRow row;
        row.cells = cells;
        try {
            RunConfig cfg = base;
            cfg.problem.cells = cells;
            cfg.optimizer.correction = correction;
            const OptimizeResult result = optimize(cfg.problem, cfg.optimizer);
            if (result.history.aborted) {
                row.failed = true;
                row.error = result.history.error;
            } else {
                const auto& last = result.history.records.back();
                row.phi = last.phi_h;
                row.e_apost = last.e_apost;
                row.qm = last.qm;
                row.iterations = last.iter;
                row.converged = result.history.converged;
                const std::filesystem::path design_path =
                    outdir / ("design_n" + std::to_string(cells) + ".txt");
                save_design(result.design, design_path);
                row.design_file = design_path.filename().string();
            }
        } catch (const std::exception& ex) {
            row.failed = true;
            row.error = ex.what();
        }
        report.rows.push_back(row);
    }
    return report;
}

void write_refinement_csv(const RefinementReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path.string());
    out << std::setprecision(17);
    out << "n,phi_h,phi_ratio,e_apost\n";
    for (const auto& r : report.rows)
        out << r.n << ',' << r.phi << ',' << r.ratio << ',' << r.e_apost << '\n';
}

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path.string());
    out << std::setprecision(17);
    out << "correction,iterations,converged,failed,phi_coarse,e_coarse,phi_fine,e_fine,qm,design_file\n";
    for (const auto& r : report.rows)
        out << r.correction << ',' << r.iterations << ',' << r.converged << ',' << r.failed << ','
            << r.phi_coarse << ',' << r.e_coarse << ',' << r.phi_fine << ',' << r.e_fine << ','
            << r.qm << ',' << r.design_file << '\n';
}

void write_model_refine_csv(const ModelRefineReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path.string());
    out << std::setprecision(17);
    out << "cells,phi_h,e_apost,qm,iterations,converged,failed,design_file\n";
    for (const auto& r : report.rows)
        out << r.cells << ',' << r.phi << ',' << r.e_apost << ',' << r.qm << ',' << r.iterations
            << ',' << r.converged << ',' << r.failed << ',' << r.design_file << '\n';
}

json refinement_json(const RefinementReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"n", r.n}, {"phi_h", r.phi}, {"phi_ratio", r.ratio}, {"e_apost", r.e_apost}});
    return json{{"qm", report.qm}, {"rows", rows}};
}

json sweep_json(const SweepReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"correction", r.correction}, {"iterations", r.iterations},
                 {"converged", r.converged},   {"failed", r.failed},
                 {"phi_coarse", r.phi_coarse}, {"e_coarse", r.e_coarse},
                 {"phi_fine", r.phi_fine},     {"e_fine", r.e_fine},
                 {"qm", r.qm},                 {"design_file", r.design_file}};
        if (r.failed) row["error"] = r.error;
        rows.push_back(row);
    }
    return json{{"fine_n", report.fine_n}, {"rows", rows}};
}

json model_refine_json(const ModelRefineReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"cells", r.cells},     {"phi_h", r.phi},
                 {"e_apost", r.e_apost}, {"qm", r.qm},
                 {"iterations", r.iterations}, {"converged", r.converged},
                 {"failed", r.failed},   {"design_file", r.design_file}};
        if (r.failed) row["error"] = r.error;
        rows.push_back(row);
    }
    return json{{"correction", report.correction}, {"rows", rows}};
}

}  // namespace heatopt
