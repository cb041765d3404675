#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "heatopt/io.hpp"

using namespace heatopt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("heatopt_test_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("io") {

TEST_CASE("empty config document yields the standard defaults") {
    const RunConfig cfg = parse_config(json::object());
    CHECK(cfg.problem.cells == 64);
    CHECK(cfg.problem.source == 1e-2);
    CHECK(cfg.problem.gamma == 1e-3);
    CHECK(cfg.problem.refine_ratio == 1);
    CHECK(cfg.optimizer.volume == 0.4);
    CHECK(cfg.optimizer.penal == 4.0);
    CHECK(cfg.optimizer.correction == 1.0);
    CHECK(cfg.optimizer.order == 1);
    CHECK(cfg.optimizer.move_limit == 0.2);
    CHECK(cfg.optimizer.change_tol == 0.01);
    CHECK(cfg.optimizer.max_iters == 400);
    CHECK(cfg.optimizer.filter_radius == 0.0);
    REQUIRE(cfg.problem.boundary.sinks.size() == 1);
    CHECK(cfg.problem.boundary.sinks[0].side == Side::Left);
    CHECK(cfg.problem.boundary.sinks[0].center == 0.5);
    CHECK(cfg.problem.boundary.sinks[0].length == 0.2);
}

TEST_CASE("range violations are rejected with the key path") {
    CHECK_THROWS_WITH_AS(parse_config(json{{"problem", {{"penal", 0.5}}}}),
                         doctest::Contains("problem.penal"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(json{{"problem", {{"gamma", 1.5}}}}),
                         doctest::Contains("problem.gamma"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(json{{"optimizer", {{"move_limit", 0.0}}}}),
                         doctest::Contains("optimizer.move_limit"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(json{{"discretization", {{"order", 3}}}}),
                         doctest::Contains("discretization.order"), std::invalid_argument);
}

TEST_CASE("unknown keys are rejected with their path") {
    CHECK_THROWS_WITH_AS(parse_config(json{{"problem", {{"cels", 64}}}}),
                         doctest::Contains("problem.cels"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config(json{{"mystery", 1}}), doctest::Contains("mystery"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        parse_config(json{{"problem", {{"sinks", json::array({{{"side", "left"}, {"len", 1}}})}}}}),
        doctest::Contains("sinks[0].len"), std::invalid_argument);
}

TEST_CASE("feasible uniform start falls out of the defaults") {
    const RunConfig cfg = parse_config(json{{"problem", {{"volume", 0.4}, {"cells", 64}}}});
    CHECK(cfg.optimizer.volume == 0.4);
    CHECK(cfg.problem.gamma < cfg.optimizer.volume);
}

TEST_CASE("config echo round-trips exactly") {
    json doc;
    doc["problem"] = {{"cells", 32},
                      {"source", 0.02},
                      {"gamma", 5e-4},
                      {"volume", 0.35},
                      {"penal", 3.0},
                      {"sinks", json::array({{{"side", "bottom"}, {"center", 0.5}, {"length", 0.25}}})}};
    doc["discretization"] = {{"order", 2}, {"refine", 2}};
    doc["optimizer"] = {{"correction", 0.8},
                        {"move_limit", 0.1},
                        {"change_tol", 0.005},
                        {"max_iters", 123},
                        {"filter_radius", 0.05}};
    doc["output"] = {{"directory", "out"}, {"snapshot_every", 10}, {"image_scale", 4}};
    const RunConfig cfg = parse_config(doc);
    const RunConfig again = parse_config(config_to_json(cfg));
    CHECK(again == cfg);

    // and through the summary echo as well
    OptimizationHistory history;
    history.records.push_back(IterationRecord{0, 1e-4, 2e-5, 1.2e-4, 0.35, 0.0, 0.0, 7});
    const json summary = summary_json(cfg, history);
    CHECK(parse_config(summary["config"]) == cfg);
    CHECK(summary["result"]["phi_h"] == 1e-4);
}

TEST_CASE("design files round-trip bit-exactly") {
    TempDir dir;
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> dist(1e-3, 1.0);
    DesignField field = uniform_design(5, 1e-3, 0.4, 0.0);
    for (double& v : field.values) v = dist(rng);

    const fs::path path = dir.path / "design.txt";
    save_design(field, path);
    const DesignField loaded = load_design(path);
    CHECK(loaded.cells == field.cells);
    CHECK(loaded.gamma == field.gamma);
    CHECK(loaded.volume_target == field.volume_target);
    CHECK(loaded.values == field.values);
}

TEST_CASE("malformed design files are rejected") {
    TempDir dir;
    const fs::path path = dir.path / "broken.txt";
    std::ofstream(path) << "3 0.001 0.4\n0.1 0.2 0.3\n0.4 0.5\n";
    CHECK_THROWS_AS(load_design(path), std::runtime_error);
    CHECK_THROWS_AS(load_design(dir.path / "missing.txt"), std::runtime_error);
}

TEST_CASE("design image pixel mapping") {
    TempDir dir;
    const double gamma = 1e-3;

    auto read_pgm = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::string magic;
        int w, h, maxval;
        in >> magic >> w >> h >> maxval;
        in.get();
        std::vector<unsigned char> data(w * h);
        in.read(reinterpret_cast<char*>(data.data()), w * h);
        return std::pair{magic, data};
    };

    SUBCASE("full material is white, ersatz is black") {
        const fs::path white = dir.path / "white.pgm";
        write_design_image(uniform_design(3, gamma, 0.4, 1.0), white);
        const auto [magic, data] = read_pgm(white);
        CHECK(magic == "P5");
        for (unsigned char px : data) CHECK(int(px) == 255);

        const fs::path black = dir.path / "black.pgm";
        write_design_image(uniform_design(3, gamma, 0.4, gamma), black);
        for (unsigned char px : read_pgm(black).second) CHECK(int(px) == 0);
    }
    SUBCASE("midpoint rounds half up to 128") {
        const fs::path mid = dir.path / "mid.pgm";
        write_design_image(uniform_design(2, gamma, 0.4, (1.0 + gamma) / 2.0), mid);
        for (unsigned char px : read_pgm(mid).second) CHECK(int(px) == 128);
    }
    SUBCASE("row zero is the top of the domain and scale repeats pixels") {
        DesignField f = uniform_design(2, gamma, 0.4, gamma);
        f.at(0, 1) = 1.0;  // top-left cell
        const fs::path path = dir.path / "orient.pgm";
        write_design_image(f, path, 2);
        const auto [magic, data] = read_pgm(path);
        REQUIRE(data.size() == 16);
        CHECK(int(data[0]) == 255);
        CHECK(int(data[1]) == 255);
        CHECK(int(data[4]) == 255);
        CHECK(int(data[3]) == 0);
        CHECK(int(data[15]) == 0);
    }
    SUBCASE("ascii variant") {
        const fs::path path = dir.path / "ascii.pgm";
        write_design_image(uniform_design(2, gamma, 0.4, 1.0), path, 1, true);
        std::ifstream in(path);
        std::string magic;
        in >> magic;
        CHECK(magic == "P2");
    }
}

TEST_CASE("history csv schema") {
    CHECK(std::string(kHistoryCsvHeader) == "iter,phi_h,e_apost,phi_c,volume,qm,change,cg_iters");
    OptimizationHistory history;
    history.records.push_back(IterationRecord{3, 1.5e-4, 2e-6, 1.52e-4, 0.4, 0.25, 0.01, 42});
    TempDir dir;
    const fs::path path = dir.path / "history.csv";
    write_history_csv(history, path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == kHistoryCsvHeader);
    CHECK(row.substr(0, 2) == "3,");
    CHECK(row.find(",42") != std::string::npos);
}

}  // TEST_SUITE
