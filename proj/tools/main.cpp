// Command-line driver: single runs, the parameter sweeps, refinement
// studies, and the file exports. See README.md for the formats.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "heatopt/estimator.hpp"
#include "heatopt/experiments.hpp"
#include "heatopt/io.hpp"
#include "heatopt/optimizer.hpp"
#include "heatopt/sensitivity.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

heatopt::RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return heatopt::RunConfig{};
    return heatopt::parse_config_file(path);
}

void write_json_file(const json& doc, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

int run_optimize(const std::string& config_path, const std::string& out_override) {
    heatopt::RunConfig cfg = load_config_or_default(config_path);
    if (!out_override.empty()) cfg.output.directory = out_override;
    const fs::path outdir = cfg.output.directory;
    fs::create_directories(outdir);

    std::ofstream history_csv(outdir / "history.csv");
    history_csv << heatopt::kHistoryCsvHeader << '\n';

    const auto on_iteration = [&](const heatopt::DesignField& design,
                                  const heatopt::IterationRecord& rec) {
        history_csv << heatopt::history_csv_row(rec) << '\n';
        history_csv.flush();
        if (cfg.output.snapshot_every > 0 && rec.iter % cfg.output.snapshot_every == 0) {
            std::ostringstream name;
            name << "design_" << std::setw(4) << std::setfill('0') << rec.iter << ".pgm";
            heatopt::write_design_image(design, outdir / name.str(), cfg.output.image_scale);
        }
        std::cout << "iter " << rec.iter << "  phi_h " << rec.phi_h << "  e_apost " << rec.e_apost
                  << "  volume " << rec.volume << "  change " << rec.change << '\n';
    };

    const heatopt::OptimizeResult result =
        heatopt::optimize(cfg.problem, cfg.optimizer, on_iteration);

    heatopt::save_design(result.design, outdir / "design.txt");
    heatopt::write_design_image(result.design, outdir / "design.pgm", cfg.output.image_scale);
    write_json_file(heatopt::summary_json(cfg, result.history), outdir / "summary.json");

    if (result.history.aborted) {
        std::cerr << "run aborted: " << result.history.error << '\n';
        return 1;
    }
    std::cout << (result.history.converged ? "converged" : "stopped at iteration cap") << " after "
              << result.history.records.back().iter << " iterations\n";
    return 0;
}

int run_sweep(const std::string& config_path, const std::vector<double>& values, int fine_n,
              bool parallel, const std::string& out_override) {
    heatopt::RunConfig cfg = load_config_or_default(config_path);
    if (!out_override.empty()) cfg.output.directory = out_override;
    const fs::path outdir = cfg.output.directory;

    const heatopt::SweepReport report =
        heatopt::run_c_sweep(values, cfg, outdir, fine_n, parallel);
    heatopt::write_sweep_csv(report, outdir / "sweep.csv");
    json doc = heatopt::sweep_json(report);
    doc["config"] = heatopt::config_to_json(cfg);
    write_json_file(doc, outdir / "sweep.json");

    int failures = 0;
    for (const auto& row : report.rows) {
        if (row.failed) {
            ++failures;
            std::cerr << "C=" << row.correction << " failed: " << row.error << '\n';
        } else {
            std::cout << "C=" << row.correction << "  phi_coarse " << row.phi_coarse
                      << "  phi_fine " << row.phi_fine << "  qm " << row.qm << '\n';
        }
    }
    return failures == 0 ? 0 : 1;
}

int run_refine_study(const std::string& design_path, const std::string& config_path,
                     const std::vector<int>& grids, const std::string& out_override) {
    const heatopt::RunConfig cfg = load_config_or_default(config_path);
    const heatopt::DesignField design = heatopt::load_design(design_path);
    const heatopt::RefinementReport report = heatopt::run_refinement_study(
        design, cfg.problem.boundary, grids, cfg.optimizer.penal, cfg.problem.source,
        cfg.optimizer.solver);

    const fs::path outdir = out_override.empty() ? fs::path(cfg.output.directory)
                                                 : fs::path(out_override);
    fs::create_directories(outdir);
    heatopt::write_refinement_csv(report, outdir / "report.csv");
    json doc = heatopt::refinement_json(report);
    doc["config"] = heatopt::config_to_json(cfg);
    doc["design_file"] = design_path;
    write_json_file(doc, outdir / "report.json");

    for (const auto& row : report.rows)
        std::cout << "n=" << row.n << "  phi_h " << row.phi << "  ratio " << row.ratio
                  << "  e_apost " << row.e_apost << '\n';
    std::cout << "qm " << report.qm << '\n';
    return 0;
}

int run_model_refine(const std::string& config_path, const std::vector<int>& sizes,
                     double correction, const std::string& out_override) {
    heatopt::RunConfig cfg = load_config_or_default(config_path);
    if (!out_override.empty()) cfg.output.directory = out_override;
    const fs::path outdir = cfg.output.directory;

    const heatopt::ModelRefineReport report =
        heatopt::run_model_refinement(sizes, correction, cfg, outdir);
    heatopt::write_model_refine_csv(report, outdir / "model_refine.csv");
    json doc = heatopt::model_refine_json(report);
    doc["config"] = heatopt::config_to_json(cfg);
    write_json_file(doc, outdir / "model_refine.json");

    int failures = 0;
    for (const auto& row : report.rows) {
        if (row.failed) {
            ++failures;
            std::cerr << "N=" << row.cells << " failed: " << row.error << '\n';
        } else {
            std::cout << "N=" << row.cells << "  phi_h " << row.phi << "  e_apost " << row.e_apost
                      << "  qm " << row.qm << '\n';
        }
    }
    return failures == 0 ? 0 : 1;
}

int run_qm(const std::string& design_path, bool printed) {
    const heatopt::DesignField design = heatopt::load_design(design_path);
    const auto formula = printed ? heatopt::QmFormula::AsPrinted : heatopt::QmFormula::Corrected;
    std::cout << std::setprecision(17) << heatopt::qm_value(design, formula) << '\n';
    return 0;
}

int run_check_gradients(const std::string& config_path, int cells_override) {
    heatopt::RunConfig cfg = load_config_or_default(config_path);
    if (cells_override > 0) cfg.problem.cells = cells_override;
    const auto& problem = cfg.problem;
    const double penal = cfg.optimizer.penal;

    const heatopt::StructuredGrid grid = heatopt::build_grid(problem.cells, problem.boundary);
    const heatopt::FemSpace space(grid, 1);

    // A mildly heterogeneous feasible design exercises every term.
    heatopt::DesignField design = heatopt::uniform_design(problem.cells, problem.gamma,
                                                          cfg.optimizer.volume, 0.0);
    for (int iy = 0; iy < problem.cells; ++iy)
        for (int ix = 0; ix < problem.cells; ++ix)
            design.at(ix, iy) = 0.15 + 0.6 * ((ix * 7 + iy * 13) % 11) / 11.0;

    const heatopt::AssembledSystem system = heatopt::assemble(design, penal, space, problem.source);
    const heatopt::FemSolution solution = heatopt::solve(system);

    const auto solve_phi = [&](const heatopt::DesignField& k) {
        return heatopt::compliance(
            heatopt::solve(heatopt::assemble(k, penal, space, problem.source)));
    };
    const auto solve_eapost = [&](const heatopt::DesignField& k) {
        const heatopt::FemSolution sol =
            heatopt::solve(heatopt::assemble(k, penal, space, problem.source));
        return heatopt::estimate(k, penal, sol, problem.source).total;
    };

    const auto max_rel_error = [](const heatopt::GradientField& analytic,
                                  const heatopt::GradientField& fd) {
        double worst = 0.0;
        for (std::size_t c = 0; c < analytic.values.size(); ++c) {
            const double denom = std::max(std::abs(fd.values[c]), 1e-12);
            worst = std::max(worst, std::abs(analytic.values[c] - fd.values[c]) / denom);
        }
        return worst;
    };

    const heatopt::GradientField dphi = heatopt::compliance_gradient(design, penal, solution);
    const heatopt::GradientField dphi_fd = heatopt::finite_difference_gradient(solve_phi, design);
    const double err_phi = max_rel_error(dphi, dphi_fd);

    const heatopt::GradientField de =
        heatopt::estimator_gradient(design, penal, solution, problem.source, system);
    const heatopt::GradientField de_fd = heatopt::finite_difference_gradient(solve_eapost, design);
    const double err_e = max_rel_error(de, de_fd);

    const double c = cfg.optimizer.correction;
    const auto solve_combined = [&](const heatopt::DesignField& k) {
        return solve_phi(k) + c * solve_eapost(k);
    };
    const heatopt::GradientField dc =
        heatopt::combined_gradient(design, penal, solution, problem.source, c, system);
    const heatopt::GradientField dc_fd =
        heatopt::finite_difference_gradient(solve_combined, design);
    const double err_c = max_rel_error(dc, dc_fd);

    std::cout << "compliance gradient: max relative FD error " << err_phi << " (tolerance 1e-4)\n";
    std::cout << "estimator gradient:  max relative FD error " << err_e << " (tolerance 1e-3)\n";
    std::cout << "combined gradient:   max relative FD error " << err_c << " (tolerance 1e-3)\n";

    const bool ok = err_phi <= 1e-4 && err_e <= 1e-3 && err_c <= 1e-3;
    std::cout << (ok ? "gradients match" : "GRADIENT CHECK FAILED") << '\n';
    return ok ? 0 : 1;
}

int run_render(const std::string& design_path, const std::string& out, int scale, bool ascii,
               const std::string& eta_out, const std::string& config_path) {
    const heatopt::DesignField design = heatopt::load_design(design_path);
    heatopt::write_design_image(design, out, scale, ascii);
    std::cout << "wrote " << out << '\n';

    if (!eta_out.empty()) {
        const heatopt::RunConfig cfg = load_config_or_default(config_path);
        const heatopt::StructuredGrid grid =
            heatopt::build_grid(design.cells, cfg.problem.boundary);
        const heatopt::FemSpace space(grid, 1);
        const heatopt::AssembledSystem system =
            heatopt::assemble(design, cfg.optimizer.penal, space, cfg.problem.source);
        const heatopt::FemSolution solution = heatopt::solve(system, cfg.optimizer.solver);
        const heatopt::ErrorBreakdown errors =
            heatopt::estimate(design, cfg.optimizer.penal, solution, cfg.problem.source);
        heatopt::write_error_heatmap(errors, grid.n(), eta_out);
        heatopt::write_error_csv(errors, grid.n(),
                                 fs::path(eta_out).replace_extension(".csv"));
        std::cout << "wrote " << eta_out << " (E_apost = " << errors.total << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured-grid thermal topology optimization with an "
                 "error-corrected objective"};
    app.require_subcommand(1);

    std::string config_path, design_path, out_dir, eta_out;
    std::vector<double> c_values;
    std::vector<int> grids{64, 128, 256, 512};
    std::vector<int> sizes;
    int fine_n = 512, scale = 1, cells_override = 0;
    double correction = 1.0;
    bool parallel = false, printed = false, ascii = false;

    auto* opt = app.add_subcommand("optimize", "Run a single optimization");
    opt->add_option("config", config_path, "JSON run configuration")->required();
    opt->add_option("--out", out_dir, "Output directory (overrides the config)");

    auto* sweep = app.add_subcommand("sweep-c", "Optimize for a list of correction parameters");
    sweep->add_option("config", config_path, "JSON run configuration")->required();
    sweep->add_option("--values", c_values, "Correction parameter values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--fine-n", fine_n, "Verification grid size");
    sweep->add_flag("--parallel", parallel, "Run the sweep entries concurrently");
    sweep->add_option("--out", out_dir, "Output directory (overrides the config)");

    auto* refine = app.add_subcommand("refine-study", "Evaluate a design on nested grids");
    refine->add_option("design", design_path, "Design file")->required();
    refine->add_option("--grids", grids, "Grid sizes, coarsest first")->delimiter(',');
    refine->add_option("--config", config_path, "JSON run configuration");
    refine->add_option("--out", out_dir, "Output directory");

    auto* model = app.add_subcommand("model-refine", "Optimize over a family of model grids");
    model->add_option("config", config_path, "JSON run configuration")->required();
    model->add_option("--sizes", sizes, "Model grid sizes (multiples of 32)")
        ->required()
        ->delimiter(',');
    model->add_option("--correction", correction, "Correction parameter");
    model->add_option("--out", out_dir, "Output directory (overrides the config)");

    auto* qm = app.add_subcommand("qm", "Print the quasi-monotonicity value of a design");
    qm->add_option("design", design_path, "Design file")->required();
    qm->add_flag("--printed", printed, "Use the m(a,b,c) first-factor variant");

    auto* check = app.add_subcommand("check-gradients", "Finite-difference gradient verification");
    check->add_option("config", config_path, "JSON run configuration")->required();
    check->add_option("--cells", cells_override, "Model grid override (keep it small)");

    auto* render = app.add_subcommand("render", "Export a design as a PGM image");
    render->add_option("design", design_path, "Design file")->required();
    render->add_option("--out", out_dir, "Output image path")->required();
    render->add_option("--scale", scale, "Pixels per ground cell");
    render->add_flag("--ascii", ascii, "Write P2 instead of P5");
    render->add_option("--eta", eta_out, "Also solve and export the per-element error heatmap");
    render->add_option("--config", config_path, "JSON run configuration for --eta");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*opt) return run_optimize(config_path, out_dir);
        if (*sweep) return run_sweep(config_path, c_values, fine_n, parallel, out_dir);
        if (*refine) return run_refine_study(design_path, config_path, grids, out_dir);
        if (*model) return run_model_refine(config_path, sizes, correction, out_dir);
        if (*qm) return run_qm(design_path, printed);
        if (*check) return run_check_gradients(config_path, cells_override);
        if (*render) return run_render(design_path, out_dir, scale, ascii, eta_out, config_path);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
