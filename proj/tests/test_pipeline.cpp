#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "doctest.h"

#include "dcr/io.hpp"
#include "dcr/metrics.hpp"
#include "dcr/pipeline.hpp"

using namespace dcr;
namespace fs = std::filesystem;

namespace {

// A desk-top miniature of the default scenario: same structure, fewer rays.
nlohmann::json small_config(const std::string& scenario, const fs::path& out) {
    return {
        {"scenario", scenario},
        {"geometry",
         {{"source_to_detector_mm", 600.0},
          {"source_to_isocenter_mm", 300.0},
          {"detector_cols", 128},
          {"detector_rows", 1},
          {"pixel_size_mm", {2.0, 2.0}},
          {"angles", {{"start", 0.0}, {"step", 1.0}, {"count", 211}}}}},
        {"grid", {{"dims", {64, 64, 1}}, {"spacing_mm", {3.0, 3.0, 1.0}}}},
        {"phantom", {{"preset", "shepp_logan"}, {"half_extent_mm", 80.0}}},
        {"restriction", {{"kept_cols", 64}, {"range_deg", 150.0}, {"stride", 4}}},
        {"noise", {{"enabled", true}, {"seed", 17}}},
        {"prior",
         {{"kind", "degraded_oracle"},
          {"degradation",
           {{"blur_fwhm_mm", 4.0},
            {"bias_amplitude_hu", 50.0},
            {"seed", 3},
            {"fake_lesions", {{{"center_mm", {0.0, -20.0, 0.0}}, {"radius_mm", 9.0}, {"contrast_hu", 100.0}}}}}}}},
        {"solver", {{"n_max", 2}, {"l_max", 2}}},
        {"output_dir", out.string()},
    };
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config validation lists every problem") {
    CHECK(validate_config(PipelineConfig::defaults(Scenario::truncation)).empty());
    CHECK(validate_config_json(nlohmann::json::object()).empty());

    const auto diags = validate_config_json(nlohmann::json::parse(R"({
        "solver": {"lambda": 2.5, "n_max": 0},
        "prior": {"kind": "file", "path": "/nonexistent/prior.json"}})"));
    REQUIRE(diags.size() == 3);
    CHECK(std::count_if(diags.begin(), diags.end(), [](const std::string& d) { return d.find("relaxation") != std::string::npos; }) == 1);
    CHECK(std::count_if(diags.begin(), diags.end(), [](const std::string& d) { return d.find("/nonexistent/prior.json") != std::string::npos; }) == 1);

    const auto parse = validate_config_json(nlohmann::json::parse(R"({"scenario": "helical"})"));
    REQUIRE(parse.size() == 1);
    CHECK(parse[0].rfind("config:", 0) == 0);

    auto cfg = PipelineConfig::defaults(Scenario::truncation);
    cfg.kept_cols = 0;
    cfg.geometry.source_to_isocenter_mm = 2000.0;
    CHECK(validate_config(cfg).size() >= 2);
}

TEST_CASE("defaults and config round trip") {
    const auto t = PipelineConfig::defaults(Scenario::truncation);
    CHECK(t.geometry.source_to_detector_mm == 1200.0);
    CHECK(t.geometry.detector_cols == 620);
    CHECK(t.kept_cols == 300);
    CHECK(t.geometry.num_views() == 211);
    CHECK(t.grid.dims[0] == 256);
    CHECK(t.prior.kind == PriorKind::degraded_oracle);
    CHECK(t.prior.degradation.blur_fwhm_mm == 2.0);
    CHECK(t.prior.degradation.bias_amplitude_hu == 50.0);
    REQUIRE(t.prior.degradation.fake_lesions.size() == 1);
    CHECK(t.prior.degradation.fake_lesions[0].contrast_hu == 100.0);
    CHECK(PipelineConfig::defaults(Scenario::sparse_view).geometry.num_views() == 360);

    const auto back = pipeline_config_from_json(to_json(t));
    CHECK(to_json(back) == to_json(t));
    const auto noisy = pipeline_config_from_json(nlohmann::json::parse(R"({"noise": {"enabled": true}})"));
    CHECK(noisy.solver.e1 == 0.05);
    const auto pinned = pipeline_config_from_json(nlohmann::json::parse(R"({"noise": {"enabled": true}, "solver": {"e1": 0.01}})"));
    CHECK(pinned.solver.e1 == 0.01);
}

TEST_CASE("pipeline runs are deterministic and artifacts reload") {
    const fs::path root = fs::temp_directory_path() / "dcr_test_pipeline";
    fs::remove_all(root);
    const auto a = run_pipeline(pipeline_config_from_json(small_config("truncation", root / "a")));
    const auto b = run_pipeline(pipeline_config_from_json(small_config("truncation", root / "b")));
    CHECK(a.to_json() == b.to_json());
    CHECK(a.arms.size() == 5);
    for (const char* name : {"truth.raw", "sinogram.raw", "fbp.raw", "wce_fbp.raw", "prior.raw", "wtv.raw", "dcr.raw",
                             "sinogram_inpainted.raw", "dcr_trace.csv", "report.json"}) {
        INFO(name);
        REQUIRE(fs::exists(root / "a" / name));
        CHECK(slurp(root / "a" / name) == slurp(root / "b" / name));
    }

    const Volume truth = load_volume(root / "a" / "truth.json");
    const RegionMask fov = fov_disk_mask(truth.grid, a.fov_radius_mm);
    for (const auto& [arm, file] : std::map<std::string, std::string>{{"dcr", "dcr.json"}, {"wce", "wce_fbp.json"}, {"prior", "prior.json"}})
        CHECK(rmse_hu(load_volume(root / "a" / file), truth, fov) == a.arms.at(arm).fov_rmse_hu);
    const auto header = read_json_file(root / "a" / "sinogram.json");
    CHECK(header.at("measured_views") == 211);
    CHECK(header.at("measured_rays") == 211 * 64);
    CHECK(load_sinogram(root / "a" / "sinogram_inpainted.json").mask == load_sinogram(root / "a" / "sinogram.json").mask);
}

TEST_CASE("limited-angle run keeps 151 views") {
    const fs::path out = fs::temp_directory_path() / "dcr_test_pipeline_la";
    fs::remove_all(out);
    const auto r = run_pipeline(pipeline_config_from_json(small_config("limited_angle", out)));
    CHECK(r.measured_views == 151);
    CHECK(read_json_file(out / "sinogram.json").at("measured_views") == 151);
    CHECK(r.arms.count("wce") == 0);
    CHECK(r.arms.size() == 4);
}

TEST_CASE("sparse-view run keeps 90 views") {
    const fs::path out = fs::temp_directory_path() / "dcr_test_pipeline_sv";
    fs::remove_all(out);
    auto j = small_config("sparse_view", out);
    j["geometry"]["angles"] = {{"start", 0.0}, {"step", 1.0}, {"count", 360}};
    const auto r = run_pipeline(pipeline_config_from_json(j));
    CHECK(r.measured_views == 90);
}

TEST_CASE("stage failures are tagged") {
    auto cfg = PipelineConfig::defaults(Scenario::truncation);
    cfg.output_dir = fs::temp_directory_path() / "dcr_test_pipeline_bad";
    cfg.prior.kind = PriorKind::file;
    cfg.prior.path = "/nonexistent/prior.json";
    try {
        run_pipeline(cfg);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("[validate]") != std::string::npos);
    }

    auto j = small_config("truncation", fs::temp_directory_path() / "dcr_test_pipeline_bad2");
    j["prior"]["degradation"]["fake_lesions"][0]["center_mm"] = {500.0, 0.0, 0.0};
    try {
        run_pipeline(pipeline_config_from_json(j));
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).rfind("[prior] ", 0) == 0);
    }
}

}
