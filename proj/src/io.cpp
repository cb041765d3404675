#include "heatopt/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace heatopt {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config error at '" + path + "': " + what);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) known = true;
        if (!known) fail(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
    }
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) fail(path + "." + key, "expected a number");
    return obj[key].get<double>();
}

int get_integer(const json& obj, const std::string& path, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) fail(path + "." + key, "expected an integer");
    return obj[key].get<int>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) fail(path + "." + key, "expected a string");
    return obj[key].get<std::string>();
}

Side side_from_string(const std::string& s, const std::string& path) {
    if (s == "left") return Side::Left;
    if (s == "right") return Side::Right;
    if (s == "bottom") return Side::Bottom;
    if (s == "top") return Side::Top;
    fail(path, "side must be one of left/right/bottom/top");
}

const char* side_to_string(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Bottom: return "bottom";
        case Side::Top: return "top";
    }
    return "left";
}

}  // namespace

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("config error: document must be an object");
    check_keys(doc, "", {"problem", "discretization", "optimizer", "output"});
    RunConfig cfg;

    if (doc.contains("problem")) {
        const json& p = doc["problem"];
        if (!p.is_object()) fail("problem", "expected an object");
        check_keys(p, "problem", {"cells", "source", "gamma", "volume", "penal", "sinks"});
        cfg.problem.cells = get_integer(p, "problem", "cells", cfg.problem.cells);
        cfg.problem.source = get_number(p, "problem", "source", cfg.problem.source);
        cfg.problem.gamma = get_number(p, "problem", "gamma", cfg.problem.gamma);
        cfg.optimizer.volume = get_number(p, "problem", "volume", cfg.optimizer.volume);
        cfg.optimizer.penal = get_number(p, "problem", "penal", cfg.optimizer.penal);
        if (p.contains("sinks")) {
            if (!p["sinks"].is_array()) fail("problem.sinks", "expected an array");
            cfg.problem.boundary.sinks.clear();
            int idx = 0;
            for (const json& s : p["sinks"]) {
                const std::string path = "problem.sinks[" + std::to_string(idx++) + "]";
                if (!s.is_object()) fail(path, "expected an object");
                check_keys(s, path, {"side", "center", "length"});
                SinkSegment seg;
                seg.side = side_from_string(get_string(s, path, "side", "left"), path + ".side");
                seg.center = get_number(s, path, "center", seg.center);
                seg.length = get_number(s, path, "length", seg.length);
                if (seg.center < 0.0 || seg.center > 1.0) fail(path + ".center", "must lie in [0,1]");
                if (seg.length <= 0.0 || seg.length > 1.0) fail(path + ".length", "must lie in (0,1]");
                cfg.problem.boundary.sinks.push_back(seg);
            }
        }
    }

    if (doc.contains("discretization")) {
        const json& d = doc["discretization"];
        if (!d.is_object()) fail("discretization", "expected an object");
        check_keys(d, "discretization", {"order", "refine"});
        cfg.optimizer.order = get_integer(d, "discretization", "order", cfg.optimizer.order);
        cfg.problem.refine_ratio = get_integer(d, "discretization", "refine", cfg.problem.refine_ratio);
    }

    if (doc.contains("optimizer")) {
        const json& o = doc["optimizer"];
        if (!o.is_object()) fail("optimizer", "expected an object");
        check_keys(o, "optimizer",
                   {"correction", "move_limit", "change_tol", "max_iters", "filter_radius"});
        cfg.optimizer.correction = get_number(o, "optimizer", "correction", cfg.optimizer.correction);
        cfg.optimizer.move_limit = get_number(o, "optimizer", "move_limit", cfg.optimizer.move_limit);
        cfg.optimizer.change_tol = get_number(o, "optimizer", "change_tol", cfg.optimizer.change_tol);
        cfg.optimizer.max_iters = get_integer(o, "optimizer", "max_iters", cfg.optimizer.max_iters);
        cfg.optimizer.filter_radius =
            get_number(o, "optimizer", "filter_radius", cfg.optimizer.filter_radius);
    }

    if (doc.contains("output")) {
        const json& o = doc["output"];
        if (!o.is_object()) fail("output", "expected an object");
        check_keys(o, "output", {"directory", "snapshot_every", "image_scale"});
        cfg.output.directory = get_string(o, "output", "directory", cfg.output.directory);
        cfg.output.snapshot_every = get_integer(o, "output", "snapshot_every", cfg.output.snapshot_every);
        cfg.output.image_scale = get_integer(o, "output", "image_scale", cfg.output.image_scale);
    }

    // Range checks, with the defaults already merged in.
    if (cfg.problem.cells < 1) fail("problem.cells", "must be a positive integer");
    if (cfg.problem.source < 0.0) fail("problem.source", "must be nonnegative");
    if (cfg.problem.gamma <= 0.0 || cfg.problem.gamma >= 1.0) fail("problem.gamma", "must lie in (0,1)");
    if (cfg.optimizer.volume < cfg.problem.gamma || cfg.optimizer.volume > 1.0)
        fail("problem.volume", "must lie in [gamma, 1]");
    if (cfg.optimizer.penal < 1.0) fail("problem.penal", "must be at least 1");
    if (cfg.optimizer.order != 1 && cfg.optimizer.order != 2)
        fail("discretization.order", "must be 1 or 2");
    if (cfg.problem.refine_ratio < 1) fail("discretization.refine", "must be a positive integer");
    if (cfg.optimizer.correction < 0.0) fail("optimizer.correction", "must be nonnegative");
    if (cfg.optimizer.move_limit <= 0.0 || cfg.optimizer.move_limit > 1.0)
        fail("optimizer.move_limit", "must lie in (0,1]");
    if (cfg.optimizer.change_tol <= 0.0) fail("optimizer.change_tol", "must be positive");
    if (cfg.optimizer.max_iters < 0) fail("optimizer.max_iters", "must be nonnegative");
    if (cfg.optimizer.filter_radius < 0.0) fail("optimizer.filter_radius", "must be nonnegative");
    if (cfg.output.snapshot_every < 0) fail("output.snapshot_every", "must be nonnegative");
    if (cfg.output.image_scale < 1) fail("output.image_scale", "must be a positive integer");
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& ex) {
        throw std::invalid_argument("config error in " + path.string() + ": " + ex.what());
    }
    return parse_config(doc);
}

json config_to_json(const RunConfig& cfg) {
    json sinks = json::array();
    for (const auto& s : cfg.problem.boundary.sinks)
        sinks.push_back({{"side", side_to_string(s.side)}, {"center", s.center}, {"length", s.length}});
    return json{
        {"problem",
         {{"cells", cfg.problem.cells},
          {"source", cfg.problem.source},
          {"gamma", cfg.problem.gamma},
          {"volume", cfg.optimizer.volume},
          {"penal", cfg.optimizer.penal},
          {"sinks", sinks}}},
        {"discretization", {{"order", cfg.optimizer.order}, {"refine", cfg.problem.refine_ratio}}},
        {"optimizer",
         {{"correction", cfg.optimizer.correction},
          {"move_limit", cfg.optimizer.move_limit},
          {"change_tol", cfg.optimizer.change_tol},
          {"max_iters", cfg.optimizer.max_iters},
          {"filter_radius", cfg.optimizer.filter_radius}}},
        {"output",
         {{"directory", cfg.output.directory},
          {"snapshot_every", cfg.output.snapshot_every},
          {"image_scale", cfg.output.image_scale}}}};
}

void save_design(const DesignField& field, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write design file: " + path.string());
    out << std::setprecision(17);
    out << field.cells << ' ' << field.gamma << ' ' << field.volume_target << '\n';
    for (int iy = field.cells - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < field.cells; ++ix) {
            if (ix > 0) out << ' ';
            out << field.at(ix, iy);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

DesignField load_design(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open design file: " + path.string());
    DesignField field;
    if (!(in >> field.cells >> field.gamma >> field.volume_target) || field.cells < 1)
        throw std::runtime_error("malformed design header in " + path.string());
    field.values.assign(static_cast<std::size_t>(field.cells) * field.cells, 0.0);
    for (int iy = field.cells - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < field.cells; ++ix) {
            if (!(in >> field.at(ix, iy)))
                throw std::runtime_error("malformed design data in " + path.string());
        }
    }
    return field;
}

namespace {

int design_pixel(double value, double gamma) {
    const double t = 255.0 * (value - gamma) / (1.0 - gamma);
    // round half up; the 1e-9 absorbs division noise at exact halves
    const int pixel = static_cast<int>(std::floor(t + 0.5 + 1e-9));
    return std::clamp(pixel, 0, 255);
}

void write_pgm(const std::vector<int>& pixels, int width, int height,
               const std::filesystem::path& path, bool ascii) {
    std::ofstream out(path, ascii ? std::ios::out : (std::ios::out | std::ios::binary));
    if (!out) throw std::runtime_error("cannot write image: " + path.string());
    if (ascii) {
        out << "P2\n" << width << ' ' << height << "\n255\n";
        for (int row = 0; row < height; ++row) {
            for (int col = 0; col < width; ++col) {
                if (col > 0) out << ' ';
                out << pixels[row * width + col];
            }
            out << '\n';
        }
    } else {
        out << "P5\n" << width << ' ' << height << "\n255\n";
        for (int px : pixels) out.put(static_cast<char>(px));
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void write_design_image(const DesignField& field, const std::filesystem::path& path, int scale,
                        bool ascii) {
    if (scale < 1) throw std::invalid_argument("image scale must be a positive integer");
    const int n = field.cells;
    const int side = n * scale;
    std::vector<int> pixels(static_cast<std::size_t>(side) * side);
    for (int row = 0; row < side; ++row) {
        const int iy = n - 1 - row / scale;  // row 0 is the top of the domain
        for (int col = 0; col < side; ++col)
            pixels[static_cast<std::size_t>(row) * side + col] =
                design_pixel(field.at(col / scale, iy), field.gamma);
    }
    write_pgm(pixels, side, side, path, ascii);
}

void write_error_heatmap(const ErrorBreakdown& errors, int n, const std::filesystem::path& path) {
    if (static_cast<int>(errors.eta_sq.size()) != n * n)
        throw std::invalid_argument("error breakdown does not match the grid size");
    double max_eta = 0.0;
    for (double e : errors.eta_sq) max_eta = std::max(max_eta, e);
    std::vector<int> pixels(errors.eta_sq.size());
    for (int row = 0; row < n; ++row) {
        const int ey = n - 1 - row;
        for (int ex = 0; ex < n; ++ex) {
            const double e = errors.eta_sq[ey * n + ex];
            const double t = max_eta > 0.0 ? e / max_eta : 0.0;
            pixels[static_cast<std::size_t>(row) * n + ex] =
                std::clamp(static_cast<int>(std::floor(255.0 * t + 0.5)), 0, 255);
        }
    }
    write_pgm(pixels, n, n, path, false);
}

void write_error_csv(const ErrorBreakdown& errors, int n, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path.string());
    out << std::setprecision(17);
    out << "element,ex,ey,eta_sq\n";
    for (std::size_t e = 0; e < errors.eta_sq.size(); ++e)
        out << e << ',' << e % n << ',' << e / n << ',' << errors.eta_sq[e] << '\n';
    out << "# total," << errors.total << ",interior," << errors.interior_part << ",jump,"
        << errors.jump_part << '\n';
}

const char* const kHistoryCsvHeader = "iter,phi_h,e_apost,phi_c,volume,qm,change,cg_iters";

std::string history_csv_row(const IterationRecord& r) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << r.iter << ',' << r.phi_h << ',' << r.e_apost << ',' << r.phi_c << ',' << r.volume << ','
        << r.qm << ',' << r.change << ',' << r.cg_iters;
    return out.str();
}

void write_history_csv(const OptimizationHistory& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path.string());
    out << kHistoryCsvHeader << '\n';
    for (const auto& r : history.records) out << history_csv_row(r) << '\n';
}

json summary_json(const RunConfig& config, const OptimizationHistory& history) {
    json result;
    result["schema"] = 1;
    result["config"] = config_to_json(config);
    json run;
    run["iterations"] = history.records.empty() ? 0 : history.records.back().iter;
    run["converged"] = history.converged;
    run["aborted"] = history.aborted;
    if (history.aborted) run["error"] = history.error;
    if (!history.records.empty()) {
        const auto& last = history.records.back();
        run["phi_h"] = last.phi_h;
        run["e_apost"] = last.e_apost;
        run["phi_c"] = last.phi_c;
        run["volume"] = last.volume;
        run["qm"] = last.qm;
    }
    run["solver"] = {{"tolerance", config.optimizer.solver.tolerance},
                     {"iter_cap_factor", config.optimizer.solver.iter_cap_factor}};
    result["result"] = run;
    return result;
}

}  // namespace heatopt
